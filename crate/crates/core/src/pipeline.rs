//! End-to-end synthetic reproduction run.
//!
//! Generates the same-rotation and opposite-rotation eight-element sequences,
//! learns their dynamics on the ground-truth layout, and evaluates the
//! learned models: residual curves, DTW distances, spectral clustering, MDS
//! and a leave-five-out reconstruction.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::cluster::{adjusted_rand_index, canonical_labels, classical_mds, spectral_cluster};
use crate::analysis::{self, DistanceMatrix, HoldoutReport, ResidualReport};
use crate::bundle::{write_atomic, write_json, Bundle};
use crate::dynamics::{icm_learn, IcmConfig};
use crate::error::{Error, Result};
use crate::features::{extract_all, BinSpec};
use crate::neighborhood::build_neighborhoods;
use crate::plot;
use crate::synth::{generate_sequence, Shape, SynthConfig, SyntheticSequence};
use crate::types::{FeatureSet, SwarmModel};

pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub bins: usize,
    pub icm: IcmConfig,
    pub holdout_first: usize,
    pub holdout_last: usize,
    pub clusters: usize,
    pub mds_dim: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bins: 40,
            icm: IcmConfig::default(),
            holdout_first: 21,
            holdout_last: 25,
            clusters: 2,
            mds_dim: 3,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        BinSpec::new(self.bins)?;
        self.icm.validate()?;
        if self.holdout_first < 2 || self.holdout_last < self.holdout_first {
            return Err(Error::invalid("bad held-out span"));
        }
        if self.clusters < 2 || self.mds_dim == 0 {
            return Err(Error::invalid("clusters must be >= 2 and mds_dim >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Separation of two groups in an embedding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// Distance between the group centroids.
    pub gap: f64,
    /// Largest point-to-own-centroid distance over both groups.
    pub spread: f64,
}

pub fn separation(points: &DMatrix<f64>, groups: &[usize]) -> Separation {
    let k = groups.iter().copied().max().map_or(0, |m| m + 1);
    let dim = points.ncols();
    let mut centroids = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &g) in groups.iter().enumerate() {
        counts[g] += 1;
        for j in 0..dim {
            centroids[g][j] += points[(i, j)];
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    let dist = |a: &[f64], i: usize| (0..dim).map(|j| (a[j] - points[(i, j)]).powi(2)).sum::<f64>().sqrt();
    let spread = groups.iter().enumerate().map(|(i, &g)| dist(&centroids[g], i)).fold(0.0, f64::max);
    let mut gap = f64::INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            let d = (0..dim).map(|j| (centroids[a][j] - centroids[b][j]).powi(2)).sum::<f64>().sqrt();
            gap = gap.min(d);
        }
    }
    Separation { gap, spread }
}

#[derive(Clone, Debug)]
pub struct VariantReport {
    pub name: String,
    pub sequence: SyntheticSequence,
    pub features: FeatureSet,
    pub model: SwarmModel,
    pub residuals: ResidualReport,
    pub distances: DistanceMatrix,
    pub labels: Vec<usize>,
    /// Shape class of each element (first-occurrence order).
    pub truth: Vec<usize>,
    pub ari: f64,
    pub mds: DMatrix<f64>,
    pub separation: Separation,
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub same: VariantReport,
    pub opposite: VariantReport,
    pub holdout: HoldoutReport,
    pub checks: Vec<Check>,
}

impl PipelineReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }

    /// Writes every artifact under `dir`; each file is replaced atomically.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for v in [&self.same, &self.opposite] {
            let base = dir.join(&v.name);
            Bundle {
                frames: v.sequence.frames.clone(),
                layout: v.sequence.layout.clone(),
                segments: Some(v.sequence.segments.clone()),
                ground_truth: Some(v.sequence.ground_truth.clone()),
            }
            .write(&base.join("bundle"))?;
            write_json(&base.join("model.json"), &v.model)?;
            write_atomic(&base.join("zeta.csv"), v.residuals.to_csv().as_bytes())?;
            write_atomic(&base.join("distances.csv"), v.distances.to_csv().as_bytes())?;
            write_atomic(&base.join("mds.csv"), mds_csv(&v.distances.labels, &v.mds).as_bytes())?;
            write_atomic(&base.join("labels.csv"), labels_csv(v).as_bytes())?;
            write_atomic(&base.join("zeta.svg"), zeta_svg(&v.name, &v.residuals).as_bytes())?;
            write_atomic(&base.join("mds.svg"), mds_svg(v).as_bytes())?;
        }
        write_json(&dir.join("holdout.json"), &self.holdout)?;
        write_json(&dir.join("summary.json"), &self.checks)?;
        write_atomic(&dir.join("summary.txt"), self.summary_text().as_bytes())
    }
}

pub fn mds_csv(labels: &[String], coords: &DMatrix<f64>) -> String {
    let mut s = String::from("label");
    for j in 0..coords.ncols() {
        let _ = write!(s, ",x{}", j + 1);
    }
    s.push('\n');
    for (i, l) in labels.iter().enumerate() {
        s.push_str(l);
        for j in 0..coords.ncols() {
            let _ = write!(s, ",{}", coords[(i, j)]);
        }
        s.push('\n');
    }
    s
}

fn labels_csv(v: &VariantReport) -> String {
    let mut s = String::from("element,shape,sign,label\n");
    for (k, &e) in v.model.elements().iter().enumerate() {
        let gt = &v.sequence.ground_truth;
        let shape = match gt.shape(e) {
            Some(Shape::Leaf) => "leaf",
            Some(Shape::TexturedSquare) => "textured-square",
            None => "",
        };
        let _ = writeln!(s, "{e},{shape},{},{}", gt.sign(e).unwrap_or(0), v.labels[k]);
    }
    s
}

fn zeta_svg(name: &str, r: &ResidualReport) -> String {
    let pick = |f: &dyn Fn(&analysis::ResidualRow) -> Option<f64>| -> Vec<(f64, f64)> {
        r.rows.iter().filter_map(|row| f(row).map(|v| (row.t as f64, v))).collect()
    };
    plot::line_plot(
        &format!("residuals ({name})"),
        &[
            ("zeta_R", pick(&|x| (x.n_r > 0).then_some(x.zeta_r))),
            ("zeta_S", pick(&|x| (x.n_s > 0).then_some(x.zeta_s))),
            ("zeta_T", pick(&|x| (x.n_t > 0).then_some(x.zeta_t))),
        ],
    )
}

fn mds_svg(v: &VariantReport) -> String {
    let pts: Vec<(f64, f64)> = (0..v.mds.nrows())
        .map(|i| (v.mds[(i, 0)], if v.mds.ncols() > 1 { v.mds[(i, 1)] } else { 0.0 }))
        .collect();
    plot::scatter_plot(&format!("MDS ({})", v.name), &pts, &v.truth, &["leaf", "square"])
}

fn run_variant(name: &str, opposite: bool, config: &PipelineConfig) -> Result<VariantReport> {
    let sequence = generate_sequence(&SynthConfig::standard(opposite))?;
    let spec = BinSpec::new(config.bins)?;
    let features = extract_all(&sequence.layout, &sequence.frames, spec)?;
    let nbrs = build_neighborhoods(&sequence.layout, config.icm.window)?;
    let model = icm_learn(&features, &sequence.layout, &nbrs, &config.icm)?;
    let residuals = analysis::residual_metrics(&model, &features)?;
    let distances = analysis::pairwise_dtw_matrix(&model)?;
    let labels = spectral_cluster(&distances, config.clusters)?;
    let shapes: Vec<usize> = model
        .elements()
        .iter()
        .map(|&e| match sequence.ground_truth.shape(e) {
            Some(Shape::Leaf) => 0,
            _ => 1,
        })
        .collect();
    let truth = canonical_labels(&shapes);
    let ari = adjusted_rand_index(&labels, &truth);
    let mds = classical_mds(&distances, config.mds_dim.min(distances.len() - 1))?;
    let separation = separation(&mds, &truth);
    Ok(VariantReport {
        name: name.to_string(),
        sequence,
        features,
        model,
        residuals,
        distances,
        labels,
        truth,
        ari,
        mds,
        separation,
    })
}

fn monotone_check(v: &VariantReport, k_max: usize) -> [Check; 2] {
    let j: Vec<f64> = v.model.diagnostics.iter().map(|d| d.objective).collect();
    let worst = j.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    [
        Check::new(
            &format!("monotone-{}", v.name),
            j.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK),
            format!("largest increase {worst:.3e} over {} iterations", j.len()),
        ),
        Check::new(
            &format!("converged-{}", v.name),
            v.model.converged,
            format!(
                "{} iterations (cap {k_max}), final delta {:.3e}",
                j.len(),
                v.model.diagnostics.last().map_or(f64::NAN, |d| d.delta)
            ),
        ),
    ]
}

fn coefficient_of_variation(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if mean == 0.0 {
        if var == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        var.sqrt() / mean.abs()
    }
}

/// Fraction of frames (with both neighbour metrics defined) where the spatial
/// and temporal residuals exceed the reconstruction residual.
pub fn zeta_ordering(r: &ResidualReport) -> (usize, usize) {
    let rows: Vec<_> = r.rows.iter().filter(|x| x.n_r > 0 && x.n_s > 0 && x.n_t > 0).collect();
    let good = rows.iter().filter(|x| x.zeta_s > x.zeta_r && x.zeta_t > x.zeta_r).count();
    (good, rows.len())
}

/// Largest coefficient of variation over time among the three curves, and
/// whether every value is finite.
pub fn zeta_stability(r: &ResidualReport) -> (f64, bool) {
    let finite = r.rows.iter().all(|x| x.zeta_r.is_finite() && x.zeta_s.is_finite() && x.zeta_t.is_finite());
    let col = |f: &dyn Fn(&analysis::ResidualRow) -> Option<f64>| -> Vec<f64> { r.rows.iter().filter_map(f).collect() };
    let cv = [
        coefficient_of_variation(&col(&|x| (x.n_r > 0).then_some(x.zeta_r))),
        coefficient_of_variation(&col(&|x| (x.n_s > 0).then_some(x.zeta_s))),
        coefficient_of_variation(&col(&|x| (x.n_t > 0).then_some(x.zeta_t))),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    (cv, finite)
}

fn dtw_sanity(v: &VariantReport) -> Check {
    let m = &v.distances.values;
    let n = m.nrows();
    let diag = (0..n).all(|i| m[(i, i)] == 0.0);
    let sym = (0..n).all(|i| (0..n).all(|j| m[(i, j)] == m[(j, i)]));
    Check::new(
        &format!("dtw-sanity-{}", v.name),
        diag && sym,
        format!("zero diagonal {diag}, symmetric {sym}"),
    )
}

/// Runs both variants and the holdout experiment and evaluates every check.
pub fn pipeline_synthetic(config: &PipelineConfig) -> Result<PipelineReport> {
    config.validate()?;
    let same = run_variant("same", false, config)?;
    let opposite = run_variant("opposite", true, config)?;
    let holdout = analysis::holdout_experiment(
        &same.sequence.layout,
        &same.features,
        config.holdout_first,
        config.holdout_last,
        &config.icm,
    )?;

    let mut checks = Vec::new();
    for v in [&same, &opposite] {
        checks.extend(monotone_check(v, config.icm.k_max));
    }
    let (good, total) = zeta_ordering(&same.residuals);
    checks.push(Check::new(
        "zeta-ordering",
        total > 0 && good as f64 >= 0.9 * total as f64,
        format!("{good}/{total} frames with zeta_S > zeta_R and zeta_T > zeta_R"),
    ));
    let (cv, finite) = zeta_stability(&same.residuals);
    checks.push(Check::new(
        "zeta-stable",
        finite && cv < 0.5,
        format!("finite {finite}, largest coefficient of variation {cv:.3}"),
    ));
    checks.push(Check::new(
        "cluster-ari",
        opposite.ari == 1.0,
        format!("ARI {:.6} (same-rotation variant {:.6})", opposite.ari, same.ari),
    ));
    let sep = opposite.separation;
    checks.push(Check::new(
        "mds-separation",
        sep.gap > sep.spread,
        format!("centroid gap {:.3e}, within-type spread {:.3e}", sep.gap, sep.spread),
    ));
    checks.push(Check::new(
        "holdout-ratio",
        holdout.ratio < 1.0,
        format!(
            "frames {}..={}: model {:.4}, identity {:.4}, ratio {:.4}",
            holdout.first, holdout.last, holdout.model_residual, holdout.identity_residual, holdout.ratio
        ),
    ));
    checks.push(dtw_sanity(&same));
    checks.push(dtw_sanity(&opposite));

    Ok(PipelineReport {
        config: config.clone(),
        same,
        opposite,
        holdout,
        checks,
    })
}
