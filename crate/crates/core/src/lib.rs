//! Spatial layout and frame-to-frame dynamics of dynamic swarms.
//!
//! A swarm sequence is a stack of frames in which every element carries a
//! binary matte and a feature vector. Consecutive features of one element are
//! related by a linear transformation; transformations of spatial neighbours
//! are tied by a Gaussian MRF and each element's transformations follow a
//! shared autoregressive process. [`dynamics::learn`] estimates the layout and
//! the transformations by alternating a graph-cut layout update with an ICM
//! loop over the transformations.
//!
//! Module map:
//!
//! * [`types`]: domain values (frames, mattes, layouts, transforms, models)
//! * [`bundle`]: on-disk sequence bundles, model and feature files
//! * [`synth`]: synthetic rotating-element sequences with ground truth
//! * [`features`]: polar-bin appearance descriptors
//! * [`neighborhood`]: generalized Voronoi neighbours and temporal windows
//! * [`layout`]: correspondence graph, min-cut labeling, components
//! * [`dynamics`]: objective, variance/AR updates, projected GD, ICM
//! * [`analysis`]: residual metrics, DTW, spectral clustering, MDS, holdout
//! * [`pipeline`]: the end-to-end synthetic reproduction run

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bundle;
pub mod dynamics;
pub mod error;
pub mod features;
pub mod layout;
pub mod neighborhood;
pub mod pipeline;
pub mod plot;
pub mod synth;
pub mod types;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use types::{
    ConstraintTag, ElementMatte, FeatureSet, GridFrame, Mask, ModelParams, Run, SwarmLayout,
    SwarmModel, Transform,
};

/// Runs `f` over `items`, in parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
