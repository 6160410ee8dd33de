//! Level-crossing probability (LCP) fields from sparse Gaussian process
//! regression models.
//!
//! The crate covers the full pipeline: fitting a sparse GP to a structured
//! volume, posterior inference at arbitrary positions, per-cell crossing
//! probabilities by Monte Carlo over the joint corner Gaussian, a dense
//! reconstruction baseline, and an octree query that prunes regions whose
//! crossing-probability upper bound falls below a threshold.

pub mod baseline;
pub mod bound;
pub mod cell_lcp;
pub mod corners;
pub mod error;
pub mod fitting;
pub mod inference;
pub mod io;
pub mod kernel;
mod linalg;
pub mod model;
pub mod optim;
pub mod query;
pub mod tangle;

pub use error::{Error, Result};
pub use model::{
    Aabb, GridSpec, KernelKind, KernelParams, OptimizerConfig, QueryConfig, SparseGpModel,
    ValidationReport, VolumeField, VolumeKind,
};
