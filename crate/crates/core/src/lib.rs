//! Hierarchical clustering of multivariate time series driven by transfer
//! entropy towards a designated target variable.
//!
//! Sources and target are symbolized ([`sdf`]), embedded into depth-`k`
//! history states ([`embedding`]), and clustered bottom-up ([`clustering`]):
//! at every level the pair whose fusion loses the least transfer entropy to
//! the target is merged ([`fusion`]). The resulting tree can be evaluated
//! level by level as a state estimator for the target ([`estimate`]).

pub mod cli;
pub mod clustering;
pub mod embedding;
pub mod error;
pub mod estimate;
pub mod fusion;
pub mod infotheory;
pub mod ingest;
pub mod noise;
pub mod pipeline;
pub mod sdf;

pub use error::{Error, Result};
