//! Indexed learning problem: transform slots, their features and neighbours,
//! the MAP objective and its conditional minimizers.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::quadratic::QuadraticForm;
use crate::error::{Error, Result};
use crate::neighborhood::NeighborhoodSystem;
use crate::types::{FeatureSet, ModelParams, SwarmLayout};

/// Lower bound applied to every variance estimate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// One transform slot `(t, element)` mapping frame `t` to `t + 1`.
#[derive(Clone, Debug)]
pub struct Slot {
    pub t: usize,
    pub element: u32,
    pub f: DVector<f64>,
    pub f_next: DVector<f64>,
    /// Spatial neighbours that also own a transform at `t`.
    pub spatial: Vec<(usize, f64)>,
    /// Slot indices of lags 1..rho of the same element.
    pub history: Vec<usize>,
    /// `(u, k)`: slot `u` uses this slot as its lag `k` (1-based).
    pub future: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub dim: usize,
    pub window: usize,
    pub num_frames: usize,
    pub slots: Vec<Slot>,
    index: BTreeMap<(usize, u32), usize>,
}

impl Problem {
    pub fn new(layout: &SwarmLayout, features: &FeatureSet, nbrs: &NeighborhoodSystem) -> Result<Self> {
        let keys = layout.transform_slots();
        if keys.is_empty() {
            return Err(Error::EmptyLayout);
        }
        let dim = features.dim();
        let index: BTreeMap<(usize, u32), usize> =
            keys.iter().enumerate().map(|(k, key)| (*key, k)).collect();
        let feature = |t: usize, e: u32| -> Result<DVector<f64>> {
            features
                .get(t, e)
                .map(DVector::from_column_slice)
                .ok_or_else(|| Error::invalid(format!("missing features for element {e} in frame {t}")))
        };
        let mut slots = Vec::with_capacity(keys.len());
        for &(t, e) in &keys {
            let spatial = nbrs
                .spatial(t, e)
                .iter()
                .filter_map(|&(j, w)| index.get(&(t, j)).map(|&s| (s, w)))
                .collect();
            let mut history = Vec::new();
            for &tp in nbrs.temporal(t, e).iter().take(nbrs.window()) {
                match index.get(&(tp, e)) {
                    Some(&s) => history.push(s),
                    None => break,
                }
            }
            slots.push(Slot {
                t,
                element: e,
                f: feature(t, e)?,
                f_next: feature(t + 1, e)?,
                spatial,
                history,
                future: Vec::new(),
            });
        }
        for u in 0..slots.len() {
            let hist = slots[u].history.clone();
            for (k, s) in hist.into_iter().enumerate() {
                slots[s].future.push((u, k + 1));
            }
        }
        Ok(Self {
            dim,
            window: nbrs.window(),
            num_frames: layout.num_frames(),
            slots,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot_index(&self, t: usize, element: u32) -> Option<usize> {
        self.index.get(&(t, element)).copied()
    }

    pub fn transitions(&self) -> usize {
        self.num_frames.saturating_sub(1)
    }

    /// Elements with a transform in frame `t`.
    pub fn frame_counts(&self) -> Vec<usize> {
        let mut k = vec![0; self.transitions()];
        for s in &self.slots {
            k[s.t - 1] += 1;
        }
        k
    }

    pub fn c_s(&self) -> f64 {
        let d2 = (self.dim * self.dim) as f64;
        self.slots
            .iter()
            .map(|s| 0.5 * d2 * (s.spatial.len() * s.spatial.len()) as f64)
            .sum()
    }

    pub fn c_t(&self) -> f64 {
        let d2 = (self.dim * self.dim) as f64;
        self.slots
            .iter()
            .map(|s| 0.5 * d2 * (s.history.len() * s.history.len()) as f64)
            .sum()
    }

    /// AR prediction `sum_k alpha_k A_{t-k}` of slot `s`.
    pub fn prediction(&self, s: usize, xs: &[DMatrix<f64>], alpha: &[f64]) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.dim, self.dim);
        for (k, &h) in self.slots[s].history.iter().enumerate() {
            p += &xs[h] * alpha[k];
        }
        p
    }

    /// Per-slot residual terms `(e_R, e_S, e_T)` (e_T without future terms).
    pub fn residuals(&self, s: usize, xs: &[DMatrix<f64>], alpha: &[f64]) -> (f64, f64, f64) {
        let slot = &self.slots[s];
        let er = (&slot.f_next - &xs[s] * &slot.f).norm_squared();
        let es = slot
            .spatial
            .iter()
            .map(|&(j, w)| w * (&xs[s] - &xs[j]).norm_squared())
            .sum();
        let et = (&xs[s] - self.prediction(s, xs, alpha)).norm_squared();
        (er, es, et)
    }

    /// Temporal residual of slot `s` including the terms of later transforms
    /// that use it as a lag.
    pub fn temporal_residual_full(&self, s: usize, xs: &[DMatrix<f64>], alpha: &[f64]) -> f64 {
        let mut total = (&xs[s] - self.prediction(s, xs, alpha)).norm_squared();
        for &(u, k) in &self.slots[s].future {
            let mut r = &xs[s] * alpha[k - 1] - &xs[u];
            for (j, &h) in self.slots[u].history.iter().enumerate() {
                if j + 1 != k {
                    r += &xs[h] * alpha[j];
                }
            }
            total += r.norm_squared();
        }
        total
    }

    pub fn objective(&self, xs: &[DMatrix<f64>], params: &ModelParams) -> Result<ObjectiveBreakdown> {
        params.validate()?;
        if params.gamma.len() != self.transitions() {
            return Err(Error::Dimension {
                expected: self.transitions(),
                got: params.gamma.len(),
            });
        }
        let mut r = vec![0.0; self.transitions()];
        let (mut s_sum, mut t_sum) = (0.0, 0.0);
        for s in 0..self.len() {
            let (er, es, et) = self.residuals(s, xs, &params.alpha);
            r[self.slots[s].t - 1] += er;
            s_sum += es;
            t_sum += et;
        }
        let counts = self.frame_counts();
        let d = self.dim as f64;
        let mut reconstruction = 0.0;
        let mut log_terms = 0.0;
        for t in 0..self.transitions() {
            if counts[t] == 0 {
                continue;
            }
            let g2 = params.gamma[t] * params.gamma[t];
            reconstruction += r[t] / g2;
            log_terms += 0.5 * d * counts[t] as f64 * g2.ln();
        }
        let (c_s, c_t) = (self.c_s(), self.c_t());
        let ss2 = params.sigma_s * params.sigma_s;
        let st2 = params.sigma_t * params.sigma_t;
        log_terms += c_s * ss2.ln() + c_t * st2.ln();
        Ok(ObjectiveBreakdown {
            reconstruction,
            spatial: s_sum / ss2,
            temporal: t_sum / st2,
            log_terms,
            c_s,
            c_t,
            frame_residuals: r,
            spatial_residual: s_sum,
            temporal_residual: t_sum,
        })
    }

    /// Maximum-likelihood noise scales for fixed transforms and AR coefficients.
    pub fn update_variances(&self, xs: &[DMatrix<f64>], params: &ModelParams) -> ModelParams {
        let mut r = vec![0.0; self.transitions()];
        let (mut s_sum, mut t_sum) = (0.0, 0.0);
        for s in 0..self.len() {
            let (er, es, et) = self.residuals(s, xs, &params.alpha);
            r[self.slots[s].t - 1] += er;
            s_sum += es;
            t_sum += et;
        }
        let counts = self.frame_counts();
        let d = self.dim as f64;
        let mut out = params.clone();
        for t in 0..self.transitions() {
            if counts[t] > 0 {
                out.gamma[t] = (2.0 * r[t] / (d * counts[t] as f64)).max(VARIANCE_FLOOR).sqrt();
            }
        }
        let (c_s, c_t) = (self.c_s(), self.c_t());
        if c_s > 0.0 {
            out.sigma_s = (s_sum / c_s).max(VARIANCE_FLOOR).sqrt();
        }
        if c_t > 0.0 {
            out.sigma_t = (t_sum / c_t).max(VARIANCE_FLOOR).sqrt();
        }
        out
    }

    /// Least-squares AR coefficients; minimum-norm when the Gram system is singular.
    pub fn update_ar_coefficients(&self, xs: &[DMatrix<f64>], alpha: &[f64]) -> Vec<f64> {
        let w = alpha.len();
        let mut gram = DMatrix::<f64>::zeros(w, w);
        let mut m = DVector::<f64>::zeros(w);
        let mut any = false;
        for (s, slot) in self.slots.iter().enumerate() {
            let rho = slot.history.len().min(w);
            if rho == 0 {
                continue;
            }
            any = true;
            for k in 0..rho {
                let hk = &xs[slot.history[k]];
                m[k] += xs[s].dot(hk);
                for j in 0..rho {
                    gram[(k, j)] += xs[slot.history[j]].dot(hk);
                }
            }
        }
        if !any {
            log::warn!("no temporal neighbourhoods; AR coefficients left unchanged");
            return alpha.to_vec();
        }
        let scale = gram.amax();
        if scale == 0.0 {
            return vec![0.0; w];
        }
        let svd = gram.svd(true, true);
        match svd.solve(&m, scale * w as f64 * f64::EPSILON * 16.0) {
            Ok(a) => a.iter().copied().collect(),
            Err(_) => alpha.to_vec(),
        }
    }

    /// Quadratic model of `J` in the transform of slot `s`, every other
    /// transform held at `xs`.
    pub fn assemble_quadratic(&self, s: usize, xs: &[DMatrix<f64>], params: &ModelParams) -> Result<QuadraticForm> {
        let slot = &self.slots[s];
        let d = self.dim;
        let alpha = &params.alpha;
        let g2 = params.gamma[slot.t - 1].powi(2);
        let ss2 = params.sigma_s.powi(2);
        let st2 = params.sigma_t.powi(2);

        let wsum: f64 = slot.spatial.iter().map(|&(_, w)| w).sum();
        let future_alpha2: f64 = slot.future.iter().map(|&(_, k)| alpha[k - 1].powi(2)).sum();
        let beta = 4.0 * wsum / ss2 + 2.0 * (1.0 + future_alpha2) / st2;
        let b = &slot.f * (2.0 / g2).sqrt();

        let mut dm = &slot.f_next * slot.f.transpose() * (2.0 / g2);
        let mut nb = DMatrix::zeros(d, d);
        for &(j, w) in &slot.spatial {
            nb += &xs[j] * w;
        }
        dm += nb * (4.0 / ss2);
        dm += self.prediction(s, xs, alpha) * (2.0 / st2);
        for &(u, k) in &slot.future {
            let mut r = xs[u].clone();
            for (j, &h) in self.slots[u].history.iter().enumerate() {
                if j + 1 != k {
                    r -= &xs[h] * alpha[j];
                }
            }
            dm += r * (2.0 * alpha[k - 1] / st2);
        }
        QuadraticForm::new(beta, b, dm)
    }

    /// Homogeneous quadratic part of `J` evaluated at a displacement `dx`.
    pub fn curvature(&self, dx: &[DMatrix<f64>], params: &ModelParams) -> f64 {
        let ss2 = params.sigma_s.powi(2);
        let st2 = params.sigma_t.powi(2);
        let mut total = 0.0;
        for (s, slot) in self.slots.iter().enumerate() {
            let (er, es, et) = {
                let er = (&dx[s] * &slot.f).norm_squared();
                let es: f64 = slot
                    .spatial
                    .iter()
                    .map(|&(j, w)| w * (&dx[s] - &dx[j]).norm_squared())
                    .sum();
                let et = (&dx[s] - self.prediction(s, dx, &params.alpha)).norm_squared();
                (er, es, et)
            };
            total += er / params.gamma[slot.t - 1].powi(2) + es / ss2 + et / st2;
        }
        total
    }
}

/// Terms of the MAP objective.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveBreakdown {
    /// `sum_t R_t / gamma_t^2`.
    pub reconstruction: f64,
    /// `S / sigma_S^2`.
    pub spatial: f64,
    /// `T / sigma_T^2`.
    pub temporal: f64,
    pub log_terms: f64,
    pub c_s: f64,
    pub c_t: f64,
    /// `R_t` indexed by `t - 1`.
    pub frame_residuals: Vec<f64>,
    pub spatial_residual: f64,
    pub temporal_residual: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.spatial + self.temporal + self.log_terms
    }
}
