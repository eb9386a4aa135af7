//! Image provenance graph construction.
//!
//! Given a pool of related images, the toolkit builds two pairwise adjacency
//! matrices (geometrically consistent keypoint matches, and metadata heuristic
//! votes), turns them into a directed acyclic provenance graph, and scores the
//! result against ground truth with vertex/edge overlap metrics.
//!
//! The pipeline stages live in separate modules:
//!
//! - [`metadata`]: EXIF/TIFF parsing, JSON sidecars, and post harvesting into [`TagBundle`]s.
//! - [`heuristics`]: the date/location/camera/editing/thumbnail vote matrix.
//! - [`visual`]: corner detection, binary descriptors, matching, and affine consensus.
//! - [`filtering`]: inverted-file product-quantization index with query expansion.
//! - [`graphbuild`]: maximum spanning tree and cluster expansion builders, BAM and DOT output.
//! - [`scoring`]: VO / EO / VEO overlap metrics and suite aggregation.
//! - [`datagen`]: synthetic provenance cases with causal metadata.
//! - [`pipeline`]: oracle and end-to-end suite runs over a generated corpus.
//!
//! Floating-point code (affine fitting, quantizer training, scoring) is generic
//! over [`Scalar`]; the aliases below fix the precision used by the pipeline.

pub mod datagen;
pub mod filtering;
pub mod graphbuild;
pub mod heuristics;
pub mod matrix_io;
pub mod metadata;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod scoring;
pub mod visual;

mod union_find;

pub use heuristics::{HeuristicSet, VoteMatrix};
pub use metadata::{Rational, TagBundle, TagSource, Timestamp};
pub use raster::Raster;
pub use scalar::Scalar;
pub use visual::{DetectorConfig, Keypoint, VisualMatrix};
pub use graphbuild::ProvenanceGraph;

/// Per-case overlap scores at the precision reports are written with.
pub type CaseScore = scoring::CaseScore<f64>;
/// Suite summary at report precision.
pub type SuiteReport = scoring::SuiteReport<f64>;
/// Retrieval index with single-precision codebooks (the on-disk default).
pub type QuantizedIndex = filtering::QuantizedIndex<f32>;
/// Affine map used by geometric verification.
pub type AffineMap = visual::geometry::Affine<f64>;

/// One node's full state as the pipeline sees it.
#[derive(Debug, Clone)]
pub struct ImageAsset {
    pub id: String,
    pub raster: Option<Raster>,
    pub keypoints: Vec<Keypoint>,
    pub tags: TagBundle,
}

impl ImageAsset {
    pub fn new(id: impl Into<String>, tags: TagBundle) -> Self {
        Self {
            id: id.into(),
            raster: None,
            keypoints: Vec::new(),
            tags,
        }
    }

    pub fn with_raster(mut self, raster: Raster) -> Self {
        self.raster = Some(raster);
        self
    }
}
