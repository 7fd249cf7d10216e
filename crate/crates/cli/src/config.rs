//! Command-line arguments. Every subcommand's argument struct doubles as the
//! serialized run configuration recorded next to its outputs.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use swarmdyn::dynamics::{IcmConfig, InitScheme, LearnConfig};
use swarmdyn::layout::LayoutConfig;
use swarmdyn::{ConstraintTag, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "swarmdyn", version, about = "Layout and dynamics of dynamic swarms")]
pub struct Cli {
    /// Worker threads; falls back to SWARMDYN_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: RunConfig,
}

/// One invocation: the subcommand, its inputs, knobs and outputs.
#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum RunConfig {
    /// Generate a synthetic sequence bundle.
    Gen(GenArgs),
    /// Extract polar-bin features for every matte of a bundle.
    Features(FeaturesArgs),
    /// Spatial neighbour weights and temporal windows of a bundle.
    Neighborhoods(NeighborhoodsArgs),
    /// Learn transformations (and optionally the layout) from a bundle.
    Learn(LearnArgs),
    /// Per-frame normalized residuals of a model.
    Residuals(ResidualsArgs),
    /// Pairwise DTW distances between element transform sequences.
    Distmat(DistmatArgs),
    /// Spectral clustering of a distance matrix.
    Cluster(ClusterArgs),
    /// Classical MDS embedding of a distance matrix.
    Mds(MdsArgs),
    /// Learn on the frames before a span and reconstruct the span.
    Holdout(HoldoutArgs),
    /// Nearest-neighbour DTW classification of model elements.
    Classify(ClassifyArgs),
    /// Full synthetic reproduction run with a pass/fail summary.
    Pipeline(PipelineArgs),
    /// Re-run the configuration stored in a run.json record.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    None,
    Symmetric,
    Orthogonal,
}

impl From<Constraint> for ConstraintTag {
    fn from(c: Constraint) -> Self {
        match c {
            Constraint::None => ConstraintTag::Unconstrained,
            Constraint::Symmetric => ConstraintTag::Symmetric,
            Constraint::Orthogonal => ConstraintTag::Orthogonal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Prev,
    /// Numerically unstable when the prior weight is small.
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Same,
    Opposite,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenArgs {
    /// Synthetic sequence description (JSON).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in eight-element sequence.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Angular bins per element.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodsArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Temporal window.
    #[arg(long, default_value_t = 3)]
    pub wt: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcmArgs {
    /// Temporal window.
    #[arg(long, default_value_t = 3)]
    pub wt: usize,
    /// Relative change that stops ICM.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 50)]
    pub kmax: usize,
    #[arg(long, value_enum, default_value_t = Constraint::None)]
    pub constraint: Constraint,
    #[arg(long, value_enum, default_value_t = Init::Prev)]
    pub init: Init,
}

impl IcmArgs {
    pub fn to_config(&self) -> Result<IcmConfig> {
        if self.kmax == 0 {
            return Err(Error::Invalid("--kmax must be at least 1".into()));
        }
        let cfg = IcmConfig {
            window: self.wt,
            eps: self.eps,
            k_max: self.kmax,
            constraint: self.constraint.into(),
            init: match self.init {
                Init::Prev => InitScheme::Prev,
                Init::Projected => InitScheme::Projected,
            },
            ..IcmConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutArgs {
    /// Validity threshold on node self-similarity.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Pairwise smoothness weight.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Minimum segment speed in pixels per frame.
    #[arg(long, default_value_t = 0.5)]
    pub motion_threshold: f64,
}

impl LayoutArgs {
    pub fn to_config(&self) -> Result<LayoutConfig> {
        if !self.tau.is_finite() || !(self.lambda >= 0.0) || !(self.motion_threshold >= 0.0) {
            return Err(Error::Invalid(
                "--tau must be finite, --lambda and --motion-threshold non-negative".into(),
            ));
        }
        Ok(LayoutConfig {
            tau: self.tau,
            lambda: self.lambda,
            motion_threshold: self.motion_threshold,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Precomputed features; extracted from the bundle when absent.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Learn the layout from the bundle's low-level segments.
    #[arg(long)]
    pub segments: bool,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[command(flatten)]
    pub icm: IcmArgs,
    /// Outer layout iterations with --segments.
    #[arg(long, default_value_t = 5)]
    pub jmax: usize,
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Iteration log (CSV); defaults to `<out>.diagnostics.csv`.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

impl LearnArgs {
    pub fn to_config(&self) -> Result<LearnConfig> {
        if self.segments && self.features.is_some() {
            return Err(Error::Invalid("--features cannot be combined with --segments".into()));
        }
        Ok(LearnConfig {
            icm: self.icm.to_config()?,
            j_max: self.jmax,
            layout: self.layout.to_config()?,
            bins: self.bins,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional line plot of the curves.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistmatArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterArgs {
    #[arg(long)]
    pub distances: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdsArgs {
    #[arg(long)]
    pub distances: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional scatter plot of the first two coordinates.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Cluster labels (as written by `cluster`) used to colour the plot.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldoutArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// First held-out frame.
    #[arg(long)]
    pub first: usize,
    /// Last held-out frame.
    #[arg(long)]
    pub last: usize,
    #[command(flatten)]
    pub icm: IcmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyArgs {
    /// Model holding the training elements.
    #[arg(long)]
    pub train: PathBuf,
    /// CSV `element,label` naming the class of each training element.
    #[arg(long)]
    pub train_labels: PathBuf,
    /// Model whose elements are classified.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[command(flatten)]
    pub icm: IcmArgs,
    #[arg(long, default_value_t = 21)]
    pub holdout_first: usize,
    #[arg(long, default_value_t = 25)]
    pub holdout_last: usize,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayArgs {
    /// A run.json record.
    pub record: PathBuf,
}

pub fn check_bins(bins: usize) -> Result<()> {
    if bins == 0 {
        return Err(Error::Invalid("--bins must be at least 1".into()));
    }
    Ok(())
}
