//! Model evaluation and motion discrimination.

pub mod cluster;
pub mod dtw;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use cluster::{adjusted_rand_index, canonical_labels, classical_mds, kmeans, spectral_cluster};
pub use dtw::{dtw_cost, dtw_from_costs, nn_dtw_classify, transform_distance};

use crate::dynamics::{icm_learn, problem_transforms, IcmConfig, Problem};
use crate::error::{Error, Result};
use crate::neighborhood::build_neighborhoods;
use crate::types::{FeatureSet, SwarmLayout, SwarmModel};

/// Per-frame normalized residuals. `n_*` count the elements averaged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t: usize,
    pub zeta_r: f64,
    pub zeta_s: f64,
    pub zeta_t: f64,
    pub n_r: usize,
    pub n_s: usize,
    pub n_t: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
}

impl ResidualReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,zeta_r,zeta_s,zeta_t,n_r,n_s,n_t\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.t, r.zeta_r, r.zeta_s, r.zeta_t, r.n_r, r.n_s, r.n_t
            );
        }
        s
    }
}

/// Normalized residuals of a model; an element with no spatial (temporal)
/// neighbours is left out of that frame's spatial (temporal) average.
pub fn residual_metrics(model: &SwarmModel, features: &FeatureSet) -> Result<ResidualReport> {
    let nbrs = build_neighborhoods(&model.layout, model.params.window)?;
    let problem = Problem::new(&model.layout, features, &nbrs)?;
    let xs = problem_transforms(&problem, model)?;
    let alpha = &model.params.alpha;
    let frames = problem.transitions();
    let mut sums = vec![[0.0f64; 3]; frames];
    let mut counts = vec![[0usize; 3]; frames];
    for (s, slot) in problem.slots.iter().enumerate() {
        let k = slot.t - 1;
        let (er, es, _) = problem.residuals(s, &xs, alpha);
        let fnorm = slot.f.norm();
        if fnorm > 0.0 {
            sums[k][0] += er.sqrt() / fnorm;
            counts[k][0] += 1;
        }
        let anorm = xs[s].norm();
        if anorm == 0.0 {
            continue;
        }
        if !slot.spatial.is_empty() {
            sums[k][1] += es.sqrt() / (slot.spatial.len() as f64 * anorm);
            counts[k][1] += 1;
        }
        if !slot.history.is_empty() {
            let et = problem.temporal_residual_full(s, &xs, alpha);
            sums[k][2] += et.sqrt() / (slot.history.len() as f64 * anorm);
            counts[k][2] += 1;
        }
    }
    let avg = |s: f64, n: usize| if n > 0 { s / n as f64 } else { 0.0 };
    let rows = (0..frames)
        .map(|k| ResidualRow {
            t: k + 1,
            zeta_r: avg(sums[k][0], counts[k][0]),
            zeta_s: avg(sums[k][1], counts[k][1]),
            zeta_t: avg(sums[k][2], counts[k][2]),
            n_r: counts[k][0],
            n_s: counts[k][1],
            n_t: counts[k][2],
        })
        .collect();
    Ok(ResidualReport { rows })
}

/// Labeled symmetric matrix of non-negative distances with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: values.nrows(),
            });
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !(v >= 0.0 && v.is_finite()) || v != values[(j, i)] {
                    return Err(Error::invalid("distances must be finite, non-negative and symmetric"));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            s.push_str(l);
            for j in 0..self.len() {
                let _ = write!(s, ",{}", self.values[(i, j)]);
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::invalid("empty distance matrix"))?;
        let labels: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let n = labels.len();
        let mut values = DMatrix::zeros(n, n);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            if i >= n {
                return Err(Error::invalid("distance matrix has too many rows"));
            }
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or_default().trim();
            if label != labels[i] {
                return Err(Error::invalid(format!("row {i} labelled {label}, expected {}", labels[i])));
            }
            let parsed: Vec<f64> = cells
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::invalid(format!("row {i}: {e}"))))
                .collect::<Result<_>>()?;
            if parsed.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: parsed.len(),
                });
            }
            for (j, v) in parsed.into_iter().enumerate() {
                values[(i, j)] = v;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Dimension { expected: n, got: rows });
        }
        Self::new(labels, values)
    }
}

/// DTW cost between the transform sequences of every pair of elements.
pub fn pairwise_dtw_matrix(model: &SwarmModel) -> Result<DistanceMatrix> {
    let ids = model.elements();
    if ids.len() < 2 {
        return Err(Error::invalid("need at least two element chains"));
    }
    let seqs: Vec<Vec<DMatrix<f64>>> = ids
        .iter()
        .map(|&e| model.chain_transforms(e).into_iter().cloned().collect())
        .collect();
    let n = ids.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let costs = crate::par_map(&pairs, |&(i, j)| dtw_cost(&seqs[i], &seqs[j]));
    let mut values = DMatrix::zeros(n, n);
    for (&(i, j), c) in pairs.iter().zip(costs) {
        let c = c?;
        values[(i, j)] = c;
        values[(j, i)] = c;
    }
    DistanceMatrix::new(ids.iter().map(|e| format!("e{e}")).collect(), values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutFrame {
    pub t: usize,
    pub model: f64,
    pub identity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub first: usize,
    pub last: usize,
    pub elements: usize,
    /// Mean of `|f_hat - f| / |f|` over held-out frames and elements.
    pub model_residual: f64,
    /// Same with every held-out transform replaced by the identity.
    pub identity_residual: f64,
    /// `model_residual / identity_residual`; 1 when both vanish.
    pub ratio: f64,
    pub frames: Vec<HoldoutFrame>,
}

/// Predicts the held-out frames `first..=last` from the AR model. Requires
/// the window of transforms before frame `first - 1` for every element
/// present in frame `first - 1`; later frames are never read.
pub fn holdout_reconstruct(model: &SwarmModel, features: &FeatureSet, first: usize, last: usize) -> Result<HoldoutReport> {
    if first < 2 || last < first {
        return Err(Error::invalid(format!("bad held-out span {first}..={last}")));
    }
    let w = model.params.window;
    let alpha = &model.params.alpha;
    let anchor = first - 1;
    if anchor <= w {
        return Err(Error::InsufficientHistory(format!(
            "{w} transforms must precede frame {anchor}"
        )));
    }
    let elements: Vec<u32> = model
        .layout
        .frames
        .get(anchor - 1)
        .map(|f| f.iter().map(|m| m.element).collect())
        .unwrap_or_default();
    if elements.is_empty() {
        return Err(Error::InsufficientHistory(format!("no elements in frame {anchor}")));
    }
    let steps = last - anchor;
    let mut model_sum = vec![0.0; steps];
    let mut ident_sum = vec![0.0; steps];
    let mut used = 0;
    for &e in &elements {
        // lag j of the first prediction is the transform of frame anchor - j
        let mut hist: Vec<DMatrix<f64>> = Vec::with_capacity(w);
        for j in 1..=w {
            let x = model.transform(anchor - j, e).ok_or_else(|| {
                Error::InsufficientHistory(format!("element {e} lacks a transform in frame {}", anchor - j))
            })?;
            hist.push(x.matrix.clone());
        }
        let f0 = features
            .get(anchor, e)
            .ok_or_else(|| Error::invalid(format!("missing features for element {e} in frame {anchor}")))?;
        let f0 = DVector::from_column_slice(f0);
        let mut f = f0.clone();
        let mut truth = Vec::with_capacity(steps);
        for t in first..=last {
            let ft = features
                .get(t, e)
                .ok_or_else(|| Error::invalid(format!("missing features for element {e} in frame {t}")))?;
            truth.push(DVector::from_column_slice(ft));
        }
        for (k, ft) in truth.iter().enumerate() {
            let mut a = DMatrix::zeros(f.len(), f.len());
            for (j, h) in hist.iter().enumerate() {
                a += h * alpha[j];
            }
            f = &a * f;
            hist.insert(0, a);
            hist.truncate(w);
            let norm = ft.norm();
            if norm == 0.0 {
                return Err(Error::ZeroNorm);
            }
            model_sum[k] += (&f - ft).norm() / norm;
            ident_sum[k] += (&f0 - ft).norm() / norm;
        }
        used += 1;
    }
    let frames: Vec<HoldoutFrame> = (0..steps)
        .map(|k| HoldoutFrame {
            t: first + k,
            model: model_sum[k] / used as f64,
            identity: ident_sum[k] / used as f64,
        })
        .collect();
    let model_residual = frames.iter().map(|f| f.model).sum::<f64>() / steps as f64;
    let identity_residual = frames.iter().map(|f| f.identity).sum::<f64>() / steps as f64;
    let ratio = if identity_residual > 0.0 {
        model_residual / identity_residual
    } else if model_residual == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(HoldoutReport {
        first,
        last,
        elements: used,
        model_residual,
        identity_residual,
        ratio,
        frames,
    })
}

/// Learns on the frames before the span, then reconstructs the span.
pub fn holdout_experiment(
    layout: &SwarmLayout,
    features: &FeatureSet,
    first: usize,
    last: usize,
    config: &IcmConfig,
) -> Result<HoldoutReport> {
    if last > layout.num_frames() {
        return Err(Error::invalid(format!("span ends after frame {}", layout.num_frames())));
    }
    let train = layout.truncated(first.saturating_sub(1));
    let nbrs = build_neighborhoods(&train, config.window)?;
    let model = icm_learn(features, &train, &nbrs, config)?;
    holdout_reconstruct(&model, features, first, last)
}
