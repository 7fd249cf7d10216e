//! Learning the transformations: MAP objective, conditional updates and the
//! ICM loop, plus the outer layout/dynamics alternation.

pub mod problem;
pub mod quadratic;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use problem::{ObjectiveBreakdown, Problem, Slot, VARIANCE_FLOOR};
pub use quadratic::{
    gd_solve, line_search_eta, project, unconstrained_solution, GdOutcome, QuadraticForm,
    DEFAULT_GD_MAX_ITER,
};

use crate::error::{Error, Result};
use crate::features::{extract_all, BinSpec};
use crate::layout::{init_layout, update_layout, LayoutConfig, SegmentInput};
use crate::neighborhood::{build_neighborhoods, NeighborhoodSystem};
use crate::types::{
    ConstraintTag, FeatureSet, GridFrame, IterationRecord, ModelParams, SwarmLayout, SwarmModel,
    Transform,
};

/// Starting point of each per-transform descent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// Previous ICM iterate.
    #[default]
    Prev,
    /// Projected closed-form unconstrained solution. Unstable when beta is small.
    Projected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcmConfig {
    pub window: usize,
    pub eps: f64,
    pub k_max: usize,
    pub constraint: ConstraintTag,
    pub init: InitScheme,
    pub gd_eps: f64,
    pub gd_max_iter: usize,
}

impl Default for IcmConfig {
    fn default() -> Self {
        Self {
            window: 3,
            eps: 1e-3,
            k_max: 50,
            constraint: ConstraintTag::Unconstrained,
            init: InitScheme::Prev,
            gd_eps: 1e-9,
            gd_max_iter: DEFAULT_GD_MAX_ITER,
        }
    }
}

impl IcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("temporal window must be at least 1"));
        }
        if !(self.eps > 0.0) || !(self.gd_eps > 0.0) {
            return Err(Error::invalid("convergence thresholds must be positive"));
        }
        if self.gd_max_iter == 0 {
            return Err(Error::invalid("gradient descent needs at least one iteration"));
        }
        Ok(())
    }
}

/// Result of one ICM run.
#[derive(Clone, Debug)]
pub struct IcmOutcome {
    pub transforms: Vec<DMatrix<f64>>,
    pub params: ModelParams,
    pub diagnostics: Vec<IterationRecord>,
    pub converged: bool,
    /// Per-transform descents that stopped at the iteration cap.
    pub gd_capped: usize,
}

impl IcmOutcome {
    pub fn to_transforms(&self, problem: &Problem, tag: ConstraintTag) -> Vec<Transform> {
        problem
            .slots
            .iter()
            .zip(&self.transforms)
            .map(|(s, x)| Transform {
                t: s.t,
                element: s.element,
                tag,
                matrix: x.clone(),
            })
            .collect()
    }
}

fn initial_transform(d: usize, tag: ConstraintTag) -> DMatrix<f64> {
    match tag {
        // the zero matrix has no orthogonal projection
        ConstraintTag::Orthogonal => DMatrix::identity(d, d),
        _ => DMatrix::zeros(d, d),
    }
}

fn max_relative_change(new: &[DMatrix<f64>], old: &[DMatrix<f64>]) -> f64 {
    new.iter()
        .zip(old)
        .map(|(n, o)| {
            let diff = (n - o).norm();
            let base = o.norm();
            if base > 0.0 {
                diff / base
            } else {
                diff
            }
        })
        .fold(0.0, f64::max)
}

/// ICM over an indexed problem. `warm` replaces the zero initialization; with
/// a warm start the noise scales are re-estimated before the first sweep.
pub fn icm_solve(
    problem: &Problem,
    config: &IcmConfig,
    warm: Option<(Vec<DMatrix<f64>>, ModelParams)>,
    outer: usize,
) -> Result<IcmOutcome> {
    config.validate()?;
    if problem.is_empty() {
        return Err(Error::EmptyLayout);
    }
    let d = problem.dim;
    let tag = config.constraint;
    let warm_start = warm.is_some();
    let (mut xs, mut params) = match warm {
        Some((xs, params)) => {
            if xs.len() != problem.len() {
                return Err(Error::Dimension {
                    expected: problem.len(),
                    got: xs.len(),
                });
            }
            (xs, params)
        }
        None => (
            vec![initial_transform(d, tag); problem.len()],
            ModelParams::initial(config.window, problem.transitions()),
        ),
    };
    if params.alpha.len() != config.window {
        params.alpha.resize(config.window, 0.0);
        params.window = config.window;
    }

    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut gd_capped = 0;
    let slots: Vec<usize> = (0..problem.len()).collect();
    for k in 0..config.k_max.max(1) {
        if k > 0 || warm_start {
            params = problem.update_variances(&xs, &params);
            params.alpha = problem.update_ar_coefficients(&xs, &params.alpha);
        }

        // Jacobi sweep: every descent reads only the iteration-k state
        let sweep = crate::par_map(&slots, |&s| -> Result<(DMatrix<f64>, DMatrix<f64>, bool)> {
            let q = problem.assemble_quadratic(s, &xs, &params)?;
            let grad = q.gradient(&xs[s]);
            let x0 = match config.init {
                InitScheme::Prev => xs[s].clone(),
                InitScheme::Projected => {
                    project(&unconstrained_solution(&q), tag).unwrap_or_else(|_| xs[s].clone())
                }
            };
            let out = gd_solve(&x0, &q, tag, config.gd_eps, config.gd_max_iter)?;
            Ok((out.x, grad, out.converged))
        });
        let mut proposal = Vec::with_capacity(xs.len());
        let mut lin = 0.0;
        let mut delta = Vec::with_capacity(xs.len());
        for (s, r) in sweep.into_iter().enumerate() {
            let (x, grad, ok) = r?;
            if !ok {
                gd_capped += 1;
            }
            let dx = &x - &xs[s];
            lin += grad.dot(&dx);
            delta.push(dx);
            proposal.push(x);
        }

        // exact line search along the joint sweep direction; J is quadratic
        // in the transforms, so J(x + s dx) = J(x) + s lin + s^2 curv
        let mut step = 1.0;
        if tag != ConstraintTag::Orthogonal {
            let curv = problem.curvature(&delta, &params);
            if curv > 0.0 {
                step = (-lin / (2.0 * curv)).clamp(0.0, 1.0);
            }
        }
        let next: Vec<DMatrix<f64>> = if step == 1.0 {
            proposal
        } else {
            xs.iter().zip(&delta).map(|(x, dx)| x + dx * step).collect()
        };

        let change = max_relative_change(&next, &xs);
        xs = next;
        let objective = problem.objective(&xs, &params)?.total();
        log::debug!("icm {k}: J = {objective:.6e}, delta = {change:.3e}, step = {step}");
        diagnostics.push(IterationRecord {
            outer,
            iteration: k,
            objective,
            delta: change,
            sigma_s: params.sigma_s,
            sigma_t: params.sigma_t,
            step,
        });
        if change < config.eps {
            converged = true;
            break;
        }
    }
    if gd_capped > 0 {
        log::warn!("{gd_capped} gradient descents stopped at the iteration cap");
    }
    Ok(IcmOutcome {
        transforms: xs,
        params,
        diagnostics,
        converged,
        gd_capped,
    })
}

/// ICM from the zero initialization on a fixed layout.
pub fn icm_learn(
    features: &FeatureSet,
    layout: &SwarmLayout,
    nbrs: &NeighborhoodSystem,
    config: &IcmConfig,
) -> Result<SwarmModel> {
    let problem = Problem::new(layout, features, nbrs)?;
    let out = icm_solve(&problem, config, None, 0)?;
    Ok(SwarmModel {
        layout: layout.clone(),
        constraint: config.constraint,
        transforms: out.to_transforms(&problem, config.constraint),
        params: out.params,
        diagnostics: out.diagnostics,
        converged: out.converged,
    })
}

/// Objective of a learned model under its own neighbourhoods.
pub fn objective(
    model: &SwarmModel,
    features: &FeatureSet,
    nbrs: &NeighborhoodSystem,
) -> Result<ObjectiveBreakdown> {
    let problem = Problem::new(&model.layout, features, nbrs)?;
    let xs = problem_transforms(&problem, model)?;
    problem.objective(&xs, &model.params)
}

/// Transforms of `model` in the slot order of `problem`.
pub fn problem_transforms(problem: &Problem, model: &SwarmModel) -> Result<Vec<DMatrix<f64>>> {
    problem
        .slots
        .iter()
        .map(|s| {
            model
                .transform(s.t, s.element)
                .map(|x| x.matrix.clone())
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "model has no transform for element {} in frame {}",
                        s.element, s.t
                    ))
                })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnConfig {
    pub icm: IcmConfig,
    pub j_max: usize,
    pub layout: LayoutConfig,
    pub bins: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            icm: IcmConfig::default(),
            j_max: 5,
            layout: LayoutConfig::default(),
            bins: 40,
        }
    }
}

pub enum LearnInput<'a> {
    /// Known layout: only the dynamics are learned.
    Layout {
        layout: &'a SwarmLayout,
        features: &'a FeatureSet,
    },
    /// Low-level segments: layout and dynamics are learned jointly.
    Segments {
        frames: &'a [GridFrame],
        segments: &'a SegmentInput,
    },
}

/// Alternates layout updates and ICM. Each ICM pass costs O(F d^3) per
/// element in the worst case.
pub fn learn(input: LearnInput<'_>, config: &LearnConfig) -> Result<SwarmModel> {
    match input {
        LearnInput::Layout { layout, features } => {
            let nbrs = build_neighborhoods(layout, config.icm.window)?;
            icm_learn(features, layout, &nbrs, &config.icm)
        }
        LearnInput::Segments { frames, segments } => {
            let spec = BinSpec::new(config.bins)?;
            let mut layout = init_layout(segments, &config.layout)?;
            let mut model: Option<SwarmModel> = None;
            for j in 0..=config.j_max {
                let updated = update_layout(frames, segments, &layout, model.as_ref(), &spec, &config.layout)?;
                if updated.is_empty() {
                    return Err(Error::EmptyLayout);
                }
                let unchanged = updated == layout && model.is_some();
                layout = updated;
                if unchanged {
                    log::info!("layout stable after {j} outer iterations");
                    break;
                }
                let features = extract_all(&layout, frames, spec)?;
                let nbrs = build_neighborhoods(&layout, config.icm.window)?;
                let problem = Problem::new(&layout, &features, &nbrs)?;
                let out = icm_solve(&problem, &config.icm, None, j)?;
                let mut diagnostics = model.map(|m| m.diagnostics).unwrap_or_default();
                diagnostics.extend(out.diagnostics.iter().cloned());
                model = Some(SwarmModel {
                    layout: layout.clone(),
                    constraint: config.icm.constraint,
                    transforms: out.to_transforms(&problem, config.icm.constraint),
                    params: out.params,
                    diagnostics,
                    converged: out.converged,
                });
            }
            model.ok_or(Error::EmptyLayout)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ElementMatte, Run};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(e: u32, t: usize, x: usize) -> ElementMatte {
        let runs = (2..6).map(|row| Run { row, start: x, len: 4 }).collect();
        ElementMatte::from_runs(e, t, runs).unwrap()
    }

    fn layout(frames: usize, k: usize) -> SwarmLayout {
        let fr = (1..=frames)
            .map(|t| (0..k).map(|e| square(e as u32, t, 2 + 8 * e)).collect())
            .collect();
        SwarmLayout::from_frames(8 * k + 2, 8, fr)
    }

    fn rotation(d: usize, a: f64) -> DMatrix<f64> {
        let mut r = DMatrix::identity(d, d);
        r[(0, 0)] = a.cos();
        r[(0, 1)] = -a.sin();
        r[(1, 0)] = a.sin();
        r[(1, 1)] = a.cos();
        r
    }

    fn driven_features(d: usize, frames: usize, k: usize, a: &DMatrix<f64>, seed: u64) -> FeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fs = FeatureSet::new(d);
        for e in 0..k as u32 {
            let mut f = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            for t in 1..=frames {
                fs.insert(t, e, f.iter().copied().collect()).unwrap();
                f = a * f;
            }
        }
        fs
    }

    #[test]
    fn single_pair_is_reconstructed() {
        let lay = layout(2, 1);
        let r = rotation(4, 0.4);
        let fs = driven_features(4, 2, 1, &r, 1);
        let nbrs = build_neighborhoods(&lay, 1).unwrap();
        let cfg = IcmConfig {
            window: 1,
            ..IcmConfig::default()
        };
        let model = icm_learn(&fs, &lay, &nbrs, &cfg).unwrap();
        let a = &model.transforms[0].matrix;
        let f1 = DVector::from_column_slice(fs.get(1, 0).unwrap());
        let f2 = DVector::from_column_slice(fs.get(2, 0).unwrap());
        assert!((&f2 - a * &f1).norm() / f2.norm() <= 1e-3);
    }

    #[test]
    fn objective_never_increases() {
        for (seed, tag) in [
            (2u64, ConstraintTag::Unconstrained),
            (3, ConstraintTag::Symmetric),
            (4, ConstraintTag::Unconstrained),
        ] {
            let lay = layout(6, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut fs = FeatureSet::new(4);
            for t in 1..=6 {
                for e in 0..3 {
                    fs.insert(t, e, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                }
            }
            let nbrs = build_neighborhoods(&lay, 2).unwrap();
            let cfg = IcmConfig {
                window: 2,
                constraint: tag,
                k_max: 30,
                ..IcmConfig::default()
            };
            let model = icm_learn(&fs, &lay, &nbrs, &cfg).unwrap();
            for w in model.diagnostics.windows(2) {
                assert!(
                    w[1].objective <= w[0].objective + 1e-9 * (1.0 + w[0].objective.abs()),
                    "{} -> {}",
                    w[0].objective,
                    w[1].objective
                );
            }
            assert!(model.transforms.iter().all(|x| tag.holds(&x.matrix)));
        }
    }

    #[test]
    fn shared_transform_is_a_fixed_point() {
        let lay = layout(5, 3);
        let a = rotation(3, 0.3) * 0.9;
        let fs = driven_features(3, 5, 3, &a, 5);
        let nbrs = build_neighborhoods(&lay, 2).unwrap();
        let problem = Problem::new(&lay, &fs, &nbrs).unwrap();
        let cfg = IcmConfig {
            window: 2,
            k_max: 1,
            ..IcmConfig::default()
        };
        let xs = vec![a.clone(); problem.len()];
        let params = ModelParams::initial(2, 4);
        let out = icm_solve(&problem, &cfg, Some((xs, params)), 0).unwrap();
        for x in &out.transforms {
            assert!((x - &a).norm() <= 1e-10, "{}", (x - &a).norm());
        }
    }

    #[test]
    fn orthogonal_tag_is_preserved() {
        let lay = layout(4, 2);
        let r = rotation(3, 0.2);
        let fs = driven_features(3, 4, 2, &r, 6);
        let nbrs = build_neighborhoods(&lay, 1).unwrap();
        let cfg = IcmConfig {
            window: 1,
            constraint: ConstraintTag::Orthogonal,
            k_max: 10,
            gd_max_iter: 2000,
            ..IcmConfig::default()
        };
        let model = icm_learn(&fs, &lay, &nbrs, &cfg).unwrap();
        assert!(model.transforms.iter().all(|x| ConstraintTag::Orthogonal.holds(&x.matrix)));
    }

    #[test]
    fn projected_init_runs() {
        let lay = layout(4, 2);
        let fs = driven_features(3, 4, 2, &rotation(3, 0.2), 7);
        let nbrs = build_neighborhoods(&lay, 1).unwrap();
        let cfg = IcmConfig {
            window: 1,
            init: InitScheme::Projected,
            ..IcmConfig::default()
        };
        let model = icm_learn(&fs, &lay, &nbrs, &cfg).unwrap();
        assert!(!model.diagnostics.is_empty());
        assert!(model.diagnostics.iter().all(|r| r.objective.is_finite()));
    }

    #[test]
    fn learn_with_known_layout_equals_icm() {
        let lay = layout(4, 2);
        let fs = driven_features(3, 4, 2, &rotation(3, 0.2), 8);
        let cfg = LearnConfig {
            icm: IcmConfig {
                window: 2,
                ..IcmConfig::default()
            },
            j_max: 0,
            ..LearnConfig::default()
        };
        let a = learn(
            LearnInput::Layout {
                layout: &lay,
                features: &fs,
            },
            &cfg,
        )
        .unwrap();
        let nbrs = build_neighborhoods(&lay, 2).unwrap();
        let b = icm_learn(&fs, &lay, &nbrs, &cfg.icm).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_layout_is_a_fault() {
        let lay = SwarmLayout::empty(10, 10, 3);
        let fs = FeatureSet::new(4);
        let nbrs = build_neighborhoods(&lay, 1).unwrap();
        assert!(matches!(
            icm_learn(&fs, &lay, &nbrs, &IcmConfig::default()),
            Err(Error::EmptyLayout)
        ));
    }
}
