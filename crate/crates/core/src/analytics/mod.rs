//! Listener consistency, tag co-occurrence and mood clustering.

mod clustering;
mod consistency;
mod cooccurrence;

pub use clustering::{
    affinity_propagation, cluster_tags, median_off_diagonal, ApParams, ClusterAssignment, TagClusters,
    DEFAULT_CONVERGENCE_WINDOW, DEFAULT_DAMPING, DEFAULT_MAX_ITER,
};
pub use consistency::{consistency_ratios, ConsistencyCurve};
pub use cooccurrence::{cooccurrence, CooccurrenceMatrix};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("nothing to analyze: {0}")]
    Empty(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Io(String),
}
