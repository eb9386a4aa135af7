//! Provenance graph construction from adjacency matrices.
//!
//! Two builders:
//!
//! - [`kruskal_build`]: maximum spanning forest over the vote matrix, with
//!   edge directions taken from the vote asymmetry.
//! - [`cluster_expand_build`]: greedy expansion from the query over visual
//!   match counts, where each new edge is oriented by the vote matrix.

mod expand;
mod graph;
mod kruskal;

use thiserror::Error;

pub use expand::{cluster_expand_build, cluster_visual_build, ExpandConfig, DEFAULT_THETA};
pub use graph::{BinaryAdjacency, ProvenanceGraph};
pub use kruskal::{kruskal_build, symmetrized_tree_weight};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("need at least 2 images, got {0}")]
    TooFewImages(usize),
    #[error("matrix sizes differ: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("query index {0} out of range")]
    InvalidQueryIndex(usize),
    #[error("graph contains a cycle")]
    CycleDetected,
    #[error("self loop on {0:?}")]
    SelfLoop(String),
    #[error("edge endpoint {0} out of range")]
    UnknownEndpoint(usize),
    #[error("edge names unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("BAM schema: {0}")]
    Schema(String),
}
