//! `swarmdyn` command-line entry point. [`run`] parses the arguments,
//! dispatches to the library and maps failures to exit codes: 1 for bad
//! input, 2 for runtime faults.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;
use serde::{Deserialize, Serialize};
use swarmdyn::analysis::{
    classical_mds, holdout_experiment, nn_dtw_classify, pairwise_dtw_matrix, residual_metrics,
    spectral_cluster, DistanceMatrix,
};
use swarmdyn::bundle::{read_json, write_atomic, write_json, Bundle};
use swarmdyn::dynamics::{learn, LearnInput};
use swarmdyn::features::{extract_all, BinSpec};
use swarmdyn::neighborhood::build_neighborhoods;
use swarmdyn::pipeline::{mds_csv, pipeline_synthetic, PipelineConfig};
use swarmdyn::synth::{generate_sequence, SynthConfig};
use swarmdyn::{plot, Error, FeatureSet, Result, SwarmModel};

pub use config::{Cli, RunConfig};
use config::*;

pub const THREADS_ENV: &str = "SWARMDYN_THREADS";

/// Provenance written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub seed: Option<u64>,
    pub config: RunConfig,
    /// Effective library configuration after defaults and overrides.
    pub resolved: serde_json::Value,
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match with_threads(cli.threads, || execute(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 1,
        e if e.is_validation() => 1,
        _ => 2,
    }
}

fn with_threads(flag: Option<usize>, f: impl FnOnce() -> Result<()> + Send) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Invalid(format!("{THREADS_ENV}={v} is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    let Some(n) = n else { return f() };
    if n == 0 {
        return Err(Error::Invalid("thread count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// `out/run.json` for directory outputs, `out.run.json` beside file outputs.
pub fn record_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        return out.join("run.json");
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.run.json"))
}

fn write_record(config: &RunConfig, out: &Path, is_dir: bool, seed: Option<u64>, resolved: impl Serialize) -> Result<()> {
    let path = record_path(out, is_dir);
    let resolved = serde_json::to_value(resolved).map_err(|source| Error::Json { path: path.clone(), source })?;
    let record = RunRecord {
        tool: "swarmdyn".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: swarmdyn::VERSION.into(),
        seed,
        config: config.clone(),
        resolved,
    };
    write_json(&path, &record)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_features(path: Option<&Path>, bundle: &Bundle, bins: usize) -> Result<FeatureSet> {
    match path {
        Some(p) => read_json(p),
        None => {
            check_bins(bins)?;
            extract_all(&bundle.layout, &bundle.frames, BinSpec::new(bins)?)
        }
    }
}

/// Parses `key,value` rows after a header line.
fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once(',').ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            msg: format!("line {}: expected two columns", i + 1),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn execute(config: &RunConfig) -> Result<()> {
    match config {
        RunConfig::Gen(a) => {
            let mut synth = match (&a.config, a.preset) {
                (Some(p), _) => read_json::<SynthConfig>(p)?,
                (None, Some(preset)) => SynthConfig::standard(preset == Preset::Opposite),
                (None, None) => return Err(Error::Invalid("gen needs --config or --preset".into())),
            };
            if let Some(seed) = a.seed {
                synth.seed = seed;
            }
            let seq = generate_sequence(&synth)?;
            Bundle {
                frames: seq.frames,
                layout: seq.layout,
                segments: Some(seq.segments),
                ground_truth: Some(seq.ground_truth),
            }
            .write(&a.out)?;
            write_record(config, &a.out, true, Some(synth.seed), &synth)
        }
        RunConfig::Features(a) => {
            check_bins(a.bins)?;
            let bundle = Bundle::read(&a.bundle)?;
            let fs = extract_all(&bundle.layout, &bundle.frames, BinSpec::new(a.bins)?)?;
            write_json(&a.out, &fs)?;
            write_record(config, &a.out, false, None, serde_json::json!({ "bins": a.bins }))
        }
        RunConfig::Neighborhoods(a) => {
            let bundle = Bundle::read(&a.bundle)?;
            let nbrs = build_neighborhoods(&bundle.layout, a.wt)?;
            write_json(&a.out, &nbrs)?;
            write_record(config, &a.out, false, None, serde_json::json!({ "window": a.wt }))
        }
        RunConfig::Learn(a) => {
            let cfg = a.to_config()?;
            let bundle = Bundle::read(&a.bundle)?;
            let model = if a.segments {
                let segments = bundle
                    .segments
                    .as_ref()
                    .ok_or_else(|| Error::Invalid(format!("{} has no segments", a.bundle.display())))?;
                check_bins(a.bins)?;
                learn(LearnInput::Segments { frames: &bundle.frames, segments }, &cfg)?
            } else {
                let features = load_features(a.features.as_deref(), &bundle, a.bins)?;
                learn(LearnInput::Layout { layout: &bundle.layout, features: &features }, &cfg)?
            };
            let mut csv = String::from("outer,iteration,objective,delta,sigma_s,sigma_t\n");
            for d in &model.diagnostics {
                log::info!("iteration {} J={} delta={}", d.iteration, d.objective, d.delta);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    d.outer, d.iteration, d.objective, d.delta, d.sigma_s, d.sigma_t
                );
            }
            write_json(&a.out, &model)?;
            let diag = a.diagnostics.clone().unwrap_or_else(|| {
                let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                a.out.with_file_name(format!("{stem}.diagnostics.csv"))
            });
            write_atomic(&diag, csv.as_bytes())?;
            if !model.converged {
                log::warn!("ICM stopped at the iteration cap without converging");
            }
            write_record(config, &a.out, false, None, &cfg)
        }
        RunConfig::Residuals(a) => {
            let model: SwarmModel = read_json(&a.model)?;
            let features: FeatureSet = read_json(&a.features)?;
            let rep = residual_metrics(&model, &features)?;
            write_atomic(&a.out, rep.to_csv().as_bytes())?;
            if let Some(svg) = &a.svg {
                let pick = |f: fn(&swarmdyn::analysis::ResidualRow) -> Option<f64>| -> Vec<(f64, f64)> {
                    rep.rows.iter().filter_map(|r| f(r).map(|v| (r.t as f64, v))).collect()
                };
                let plot = plot::line_plot(
                    "normalized residuals",
                    &[
                        ("zeta_R", pick(|r| (r.n_r > 0).then_some(r.zeta_r))),
                        ("zeta_S", pick(|r| (r.n_s > 0).then_some(r.zeta_s))),
                        ("zeta_T", pick(|r| (r.n_t > 0).then_some(r.zeta_t))),
                    ],
                );
                write_atomic(svg, plot.as_bytes())?;
            }
            write_record(config, &a.out, false, None, serde_json::Value::Null)
        }
        RunConfig::Distmat(a) => {
            let model: SwarmModel = read_json(&a.model)?;
            let dm = pairwise_dtw_matrix(&model)?;
            write_atomic(&a.out, dm.to_csv().as_bytes())?;
            write_record(config, &a.out, false, None, serde_json::Value::Null)
        }
        RunConfig::Cluster(a) => {
            let dm = DistanceMatrix::from_csv(&read_text(&a.distances)?)?;
            let labels = spectral_cluster(&dm, a.k)?;
            let mut csv = String::from("label,cluster\n");
            for (l, c) in dm.labels.iter().zip(&labels) {
                let _ = writeln!(csv, "{l},{c}");
            }
            write_atomic(&a.out, csv.as_bytes())?;
            write_record(config, &a.out, false, None, serde_json::json!({ "k": a.k }))
        }
        RunConfig::Mds(a) => {
            let dm = DistanceMatrix::from_csv(&read_text(&a.distances)?)?;
            let coords = classical_mds(&dm, a.dim)?;
            write_atomic(&a.out, mds_csv(&dm.labels, &coords).as_bytes())?;
            if let Some(svg) = &a.svg {
                let groups: Vec<usize> = match &a.labels {
                    Some(p) => {
                        let pairs = read_pairs(p)?;
                        dm.labels
                            .iter()
                            .map(|l| {
                                pairs
                                    .iter()
                                    .find(|(k, _)| k == l)
                                    .and_then(|(_, v)| v.parse().ok())
                                    .ok_or_else(|| Error::Format {
                                        path: p.clone(),
                                        msg: format!("no cluster for {l}"),
                                    })
                            })
                            .collect::<Result<_>>()?
                    }
                    None => vec![0; dm.len()],
                };
                let names: Vec<String> = (0..=groups.iter().copied().max().unwrap_or(0))
                    .map(|g| format!("cluster {g}"))
                    .collect();
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                let pts: Vec<(f64, f64)> = (0..coords.nrows())
                    .map(|i| (coords[(i, 0)], if coords.ncols() > 1 { coords[(i, 1)] } else { 0.0 }))
                    .collect();
                write_atomic(svg, plot::scatter_plot("MDS", &pts, &groups, &names).as_bytes())?;
            }
            write_record(config, &a.out, false, None, serde_json::json!({ "dim": a.dim }))
        }
        RunConfig::Holdout(a) => {
            let icm = a.icm.to_config()?;
            let bundle = Bundle::read(&a.bundle)?;
            let features = load_features(a.features.as_deref(), &bundle, a.bins)?;
            let rep = holdout_experiment(&bundle.layout, &features, a.first, a.last, &icm)?;
            write_json(&a.out, &rep)?;
            write_record(config, &a.out, false, None, &icm)
        }
        RunConfig::Classify(a) => {
            let train: SwarmModel = read_json(&a.train)?;
            let test: SwarmModel = read_json(&a.test)?;
            let mut samples = Vec::new();
            for (e, label) in read_pairs(&a.train_labels)? {
                let id = e.trim_start_matches('e').parse::<u32>().map_err(|_| Error::Format {
                    path: a.train_labels.clone(),
                    msg: format!("bad element id {e}"),
                })?;
                let seq: Vec<_> = train.chain_transforms(id).into_iter().cloned().collect();
                if seq.is_empty() {
                    return Err(Error::Invalid(format!("training model has no transforms for element {id}")));
                }
                samples.push((seq, label));
            }
            let mut csv = String::from("element,label\n");
            for e in test.elements() {
                let seq: Vec<_> = test.chain_transforms(e).into_iter().cloned().collect();
                let label = nn_dtw_classify(&samples, &seq)?;
                let _ = writeln!(csv, "{e},{label}");
            }
            write_atomic(&a.out, csv.as_bytes())?;
            write_record(config, &a.out, false, None, serde_json::Value::Null)
        }
        RunConfig::Pipeline(a) => {
            check_bins(a.bins)?;
            let cfg = PipelineConfig {
                bins: a.bins,
                icm: a.icm.to_config()?,
                holdout_first: a.holdout_first,
                holdout_last: a.holdout_last,
                ..PipelineConfig::default()
            };
            cfg.validate()?;
            let report = pipeline_synthetic(&cfg)?;
            report.write(&a.out)?;
            print!("{}", report.summary_text());
            write_record(config, &a.out, true, Some(SynthConfig::standard(false).seed), &cfg)
        }
        RunConfig::Replay(a) => {
            let record: RunRecord = read_json(&a.record)?;
            execute(&record.config)
        }
    }
}
