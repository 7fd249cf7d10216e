//! Per-transform convex quadratic `g(X) = (beta |X|^2 + |X b|^2) / 2 - <D, X>`
//! and its projected gradient-descent solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::ConstraintTag;

pub const DEFAULT_GD_MAX_ITER: usize = 10_000;

/// Data of the gradient `X (beta I + b b^T) - D`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub beta: f64,
    pub b: DVector<f64>,
    pub d: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn new(beta: f64, b: DVector<f64>, d: DMatrix<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        if d.nrows() != d.ncols() || d.ncols() != b.len() {
            return Err(Error::Dimension {
                expected: b.len(),
                got: d.ncols(),
            });
        }
        if b.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("quadratic form has non-finite entries"));
        }
        Ok(Self { beta, b, d })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, x: &DMatrix<f64>) -> f64 {
        let xb = x * &self.b;
        0.5 * (self.beta * x.norm_squared() + xb.norm_squared()) - self.d.dot(x)
    }

    pub fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xb = x * &self.b;
        x * self.beta + xb * self.b.transpose() - &self.d
    }

    /// Curvature `beta |G|^2 + |G b|^2` along direction `G`.
    pub fn curvature(&self, g: &DMatrix<f64>) -> f64 {
        self.beta * g.norm_squared() + (g * &self.b).norm_squared()
    }
}

/// Exact minimizer of `g(X - eta G)` over `eta`.
pub fn line_search_eta(x: &DMatrix<f64>, g: &DMatrix<f64>, q: &QuadraticForm) -> f64 {
    let den = q.curvature(g);
    if !(den > f64::MIN_POSITIVE) {
        return 0.0;
    }
    let eta = q.gradient(x).dot(g) / den;
    eta.max(0.0)
}

/// Projection onto the constraint set of `tag`.
pub fn project(x: &DMatrix<f64>, tag: ConstraintTag) -> Result<DMatrix<f64>> {
    match tag {
        ConstraintTag::Unconstrained => Ok(x.clone()),
        ConstraintTag::Symmetric => Ok((x + x.transpose()) * 0.5),
        ConstraintTag::Orthogonal => {
            let n = x.nrows();
            if n == 0 {
                return Ok(x.clone());
            }
            let svd = x.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smax > 0.0) || smin <= smax * n as f64 * f64::EPSILON {
                return Err(Error::DegenerateProjection);
            }
            let u = svd.u.expect("u requested");
            let vt = svd.v_t.expect("v_t requested");
            Ok(u * vt)
        }
    }
}

/// Closed-form stationary point via the matrix inversion lemma.
pub fn unconstrained_solution(q: &QuadraticForm) -> DMatrix<f64> {
    let b2 = q.b.norm_squared();
    let db = &q.d * &q.b;
    (&q.d - db * q.b.transpose() / (q.beta + b2)) / q.beta
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdOutcome {
    pub x: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn relative_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    let diff = (new - old).norm();
    let base = old.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// Projected gradient descent with exact line search.
pub fn gd_solve(
    x0: &DMatrix<f64>,
    q: &QuadraticForm,
    tag: ConstraintTag,
    eps: f64,
    max_iter: usize,
) -> Result<GdOutcome> {
    let mut x = x0.clone();
    let mut best = x.clone();
    let mut best_value = q.value(&x);
    for it in 0..max_iter {
        let g = q.gradient(&x);
        if g.iter().all(|v| *v == 0.0) {
            return Ok(GdOutcome {
                x,
                iterations: it,
                converged: true,
            });
        }
        let eta = line_search_eta(&x, &g, q);
        let next = project(&(&x - g * eta), tag)?;
        let change = relative_change(&next, &x);
        x = next;
        let value = q.value(&x);
        if value <= best_value {
            best_value = value;
            best.copy_from(&x);
        }
        if change < eps {
            return Ok(GdOutcome {
                x,
                iterations: it + 1,
                converged: true,
            });
        }
    }
    log::warn!("gradient descent hit the {max_iter}-iteration cap");
    Ok(GdOutcome {
        x: best,
        iterations: max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_form(d: usize, seed: u64) -> QuadraticForm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta = rng.random_range(0.5..2.0);
        let b = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let dm = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        QuadraticForm::new(beta, b, dm).unwrap()
    }

    fn random_matrix(d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gradient_step_decreases() {
        let q = random_form(4, 1);
        let x = random_matrix(4, 2);
        let g = q.gradient(&x);
        let eta = line_search_eta(&x, &g, &q);
        assert!(q.value(&(&x - &g * eta)) < q.value(&x));
    }

    #[test]
    fn isotropic_step_is_inverse_beta() {
        let mut q = random_form(3, 3);
        q.b.fill(0.0);
        let x = random_matrix(3, 4);
        let g = q.gradient(&x);
        assert!((line_search_eta(&x, &g, &q) - 1.0 / q.beta).abs() < 1e-12);
    }

    fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        (a + b) / 2.0
    }

    #[test]
    fn eta_matches_numerical_minimizer() {
        for seed in 0..5 {
            let q = random_form(4, 10 + seed);
            let x = random_matrix(4, 20 + seed);
            let g = random_matrix(4, 30 + seed);
            let eta = line_search_eta(&x, &g, &q);
            let phi = |e: f64| q.value(&(&x - &g * e));
            // coarse grid, then golden-section refinement
            let grid: Vec<f64> = (0..=400).map(|k| -2.0 + k as f64 * 0.01).collect();
            let start = grid
                .iter()
                .copied()
                .min_by(|a, b| phi(*a).total_cmp(&phi(*b)))
                .unwrap();
            let oracle = golden(phi, start - 0.01, start + 0.01).max(0.0);
            assert!((eta - oracle).abs() < 1e-8, "{eta} vs {oracle}");
        }
    }

    #[test]
    fn symmetric_projection() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 2.0, 3.0]);
        let p = project(&x, ConstraintTag::Symmetric).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
        assert_eq!(project(&p, ConstraintTag::Symmetric).unwrap(), p);
    }

    fn rotation(a: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
    }

    #[test]
    fn orthogonal_projection_of_scaled_rotation() {
        let r = rotation(0.7);
        let p = project(&(&r * 2.0), ConstraintTag::Orthogonal).unwrap();
        assert!((&p - &r).norm() < 1e-12);
        assert!((project(&p, ConstraintTag::Orthogonal).unwrap() - &p).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_projection_matches_sweep() {
        let x = random_matrix(2, 5);
        let p = project(&x, ConstraintTag::Orthogonal).unwrap();
        // every 2x2 orthogonal matrix is a rotation or a reflection
        let mut best = f64::INFINITY;
        let mut arg = DMatrix::zeros(2, 2);
        for k in 0..200_000 {
            let a = k as f64 * std::f64::consts::TAU / 200_000.0;
            let rot = rotation(a);
            let refl = DMatrix::from_row_slice(2, 2, &[a.cos(), a.sin(), a.sin(), -a.cos()]);
            for q in [rot, refl] {
                let dist = (&x - &q).norm();
                if dist < best {
                    best = dist;
                    arg = q;
                }
            }
        }
        assert!((&p - &arg).norm() < 1e-4);
        assert!((&x - &p).norm() <= best + 1e-12);
    }

    #[test]
    fn orthogonal_projection_of_singular_matrix_fails() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            project(&x, ConstraintTag::Orthogonal),
            Err(Error::DegenerateProjection)
        ));
    }

    #[test]
    fn closed_form_trivial_cases() {
        let mut q = random_form(3, 6);
        let d = q.d.clone();
        q.d.fill(0.0);
        assert_eq!(unconstrained_solution(&q), DMatrix::zeros(3, 3));
        q.d = d;
        q.b.fill(0.0);
        assert!((unconstrained_solution(&q) - &q.d / q.beta).norm() < 1e-15);
    }

    #[test]
    fn closed_form_matches_linear_solve() {
        let q = random_form(5, 7);
        let x = unconstrained_solution(&q);
        assert!(q.gradient(&x).norm() <= 1e-9 * (1.0 + q.d.norm()));
        let h = DMatrix::identity(5, 5) * q.beta + &q.b * q.b.transpose();
        // X H = D  <=>  H X^T = D^T
        let xt = h.lu().solve(&q.d.transpose()).unwrap();
        assert!((x - xt.transpose()).norm() < 1e-10);
    }

    #[test]
    fn gd_from_solution_stops_immediately() {
        let q = random_form(4, 8);
        let x = unconstrained_solution(&q);
        let out = gd_solve(&x, &q, ConstraintTag::Unconstrained, 1e-8, DEFAULT_GD_MAX_ITER).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 1);
        assert!((out.x - x).norm() < 1e-12);
    }

    #[test]
    fn gd_reaches_closed_form() {
        for seed in 0..5 {
            let q = random_form(5, 40 + seed);
            let star = unconstrained_solution(&q);
            let out = gd_solve(
                &DMatrix::zeros(5, 5),
                &q,
                ConstraintTag::Unconstrained,
                1e-12,
                DEFAULT_GD_MAX_ITER,
            )
            .unwrap();
            assert!((out.x - &star).norm() <= 1e-6 * (1.0 + star.norm()));
        }
    }

    #[test]
    fn symmetric_gd_keeps_symmetry_and_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(4, 10);
        let truth = (&a + a.transpose()) * 0.5;
        let f = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let g = &truth * &f;
        let q = QuadraticForm::new(2.0, &f * 2f64.sqrt(), g * f.transpose() * 2.0 + &truth * 2.0).unwrap();
        let x0 = DMatrix::zeros(4, 4);
        let out = gd_solve(&x0, &q, ConstraintTag::Symmetric, 1e-10, DEFAULT_GD_MAX_ITER).unwrap();
        assert_eq!(out.x, out.x.transpose());
        assert!(q.value(&out.x) <= q.value(&x0));
    }

    #[test]
    fn orthogonal_gd_stays_orthogonal() {
        let q = random_form(3, 11);
        let x0 = DMatrix::identity(3, 3);
        let out = gd_solve(&x0, &q, ConstraintTag::Orthogonal, 1e-10, 500).unwrap();
        assert!(ConstraintTag::Orthogonal.holds(&out.x));
    }

    #[test]
    fn zero_start_uses_absolute_change() {
        let mut q = random_form(2, 12);
        q.d.fill(0.0);
        let out = gd_solve(&DMatrix::zeros(2, 2), &q, ConstraintTag::Unconstrained, 1e-3, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.x, DMatrix::zeros(2, 2));
    }

    #[test]
    fn cap_returns_best_iterate_with_flag() {
        let q = random_form(6, 13);
        let x0 = DMatrix::zeros(6, 6);
        let out = gd_solve(&x0, &q, ConstraintTag::Unconstrained, 1e-300, 2).unwrap();
        assert!(!out.converged);
        assert!(q.value(&out.x) <= q.value(&x0));
    }
}
