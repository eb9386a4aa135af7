//! Content-based adjacency.
//!
//! Each image gets up to `p` oriented corners with 256-bit binary
//! descriptors. Every pair is matched by brute force under Hamming distance
//! (ratio test plus mutual-best check), the matches are filtered by an affine
//! consensus fit, and the surviving count becomes the pair's weight.

mod detect;
pub mod geometry;
mod matching;
mod matrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{detect, segment_score, Descriptor, BORDER_MARGIN, CIRCLE};
pub use geometry::{filter_geometric, GeometricResult, MIN_CONSENSUS};
pub use matching::{hamming, match_pair};
pub use matrix::{build_visual_matrix, ingest_matrix, pair_seed, pair_weight, VisualMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VisualError {
    #[error("image is {width}x{height}; both sides must be at least 32 px")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("keypoint collection is empty")]
    EmptyKeypoints,
    #[error("need at least 2 images, got {0}")]
    TooFewImages(usize),
    #[error("asset {0:?} has neither raster nor keypoints")]
    MissingRaster(String),
    #[error("invalid detector config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Matrix(#[from] crate::matrix_io::MatrixError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keypoint {
    pub x: u32,
    pub y: u32,
    pub response: u32,
    /// Orientation bin in `0..32`, each bin 11.25 degrees.
    pub orientation: u8,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Keypoint cap per image.
    pub max_keypoints: usize,
    /// Intensity delta for the segment test.
    pub corner_threshold: u8,
    /// Lowe-style ratio between nearest and second-nearest distances.
    pub match_ratio: f64,
    pub ransac_iterations: usize,
    /// Inlier distance for the affine consensus, in pixels.
    pub inlier_px: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_keypoints: 500,
            corner_threshold: 20,
            match_ratio: 0.8,
            ransac_iterations: 1000,
            inlier_px: 3.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), VisualError> {
        if self.max_keypoints < 4 {
            return Err(VisualError::Config("max_keypoints must be at least 4"));
        }
        if self.corner_threshold == 0 {
            return Err(VisualError::Config("corner_threshold must be positive"));
        }
        if !(self.match_ratio > 0.0 && self.match_ratio <= 1.0) {
            return Err(VisualError::Config("match_ratio must lie in (0, 1]"));
        }
        if self.ransac_iterations == 0 {
            return Err(VisualError::Config("ransac_iterations must be positive"));
        }
        if !(self.inlier_px > 0.0) {
            return Err(VisualError::Config("inlier_px must be positive"));
        }
        Ok(())
    }
}
