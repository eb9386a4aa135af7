//! Corpus retrieval: an inverted-file index over product-quantized
//! descriptors, queried in stages with query expansion.
//!
//! Each 256-bit descriptor is assigned to its nearest coarse cell and encoded
//! as `m` one-byte sub-codes (plain PQ over `256/m`-bit blocks). A query
//! descriptor probes its nearest cells and credits every posting there with
//! `1 / (1 + d)`, `d` being the asymmetric distance to the posting's code.
//! Later stages re-query with the best unseen results of the previous stage
//! and keep each image's maximum score.

mod codebook;
mod persist;

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codebook::Codebook;

use crate::scalar::Scalar;
use crate::visual::{detect, Descriptor, DetectorConfig, VisualError};
use crate::ImageAsset;

pub const DESCRIPTOR_BYTES: usize = 32;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("need at least {need} training descriptors, have {have}")]
    InsufficientTrainingData { have: usize, need: usize },
    #[error("index holds no images")]
    EmptyIndex,
    #[error("invalid index config: {0}")]
    Config(&'static str),
    #[error("unknown image {0:?}")]
    UnknownImage(String),
    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),
    #[error(transparent)]
    Visual(#[from] VisualError),
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub coarse_cells: usize,
    pub subquantizers: usize,
    pub kmeans_iterations: usize,
    /// Cap on the descriptors sampled for codebook training.
    pub max_training: usize,
    pub seed: u64,
    /// Detector used for assets that arrive without keypoints.
    pub detector: DetectorConfig,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            coarse_cells: 256,
            subquantizers: 8,
            kmeans_iterations: 10,
            max_training: 20_000,
            seed: 0x1f1d_e5c0,
            detector: DetectorConfig {
                max_keypoints: 200,
                ..DetectorConfig::default()
            },
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.coarse_cells == 0 {
            return Err(FilterError::Config("coarse_cells must be positive"));
        }
        if !matches!(self.subquantizers, 1 | 2 | 4 | 8 | 16 | 32) {
            return Err(FilterError::Config("subquantizers must divide 32 bytes"));
        }
        if self.max_training < 10 * self.coarse_cells {
            return Err(FilterError::Config("max_training must be at least 10 x coarse_cells"));
        }
        self.detector.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryOptions {
    pub k: usize,
    pub stages: usize,
    /// Coarse cells probed per query descriptor.
    pub probe: usize,
    /// Results of one stage fed back as queries in the next.
    pub expansion: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            k: 100,
            stages: 2,
            probe: 4,
            expansion: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    /// Descending score; ties by ascending id.
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    images: Vec<u32>,
    /// `m` bytes per posting.
    codes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedIndex<T> {
    coarse: Codebook<T>,
    sub: Vec<Codebook<T>>,
    ids: Vec<String>,
    descriptors: Vec<Vec<Descriptor>>,
    cells: Vec<Cell>,
}

pub fn descriptor_bytes(d: &Descriptor) -> [u8; DESCRIPTOR_BYTES] {
    let mut out = [0u8; DESCRIPTOR_BYTES];
    for (chunk, w) in out.chunks_exact_mut(8).zip(d) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    out
}

fn asset_descriptors(asset: &ImageAsset, detector: &DetectorConfig) -> Result<Vec<Descriptor>, FilterError> {
    if !asset.keypoints.is_empty() {
        return Ok(asset.keypoints.iter().map(|k| k.descriptor).collect());
    }
    let raster = asset
        .raster
        .as_ref()
        .ok_or_else(|| VisualError::MissingRaster(asset.id.clone()))?;
    Ok(detect(raster, detector)?.into_iter().map(|k| k.descriptor).collect())
}

pub fn build_index<T: Scalar>(corpus: &[ImageAsset], cfg: &IndexConfig) -> Result<QuantizedIndex<T>, FilterError> {
    cfg.validate()?;
    let mut seen = HashSet::new();
    for a in corpus {
        if !seen.insert(a.id.as_str()) {
            return Err(FilterError::DuplicateImage(a.id.clone()));
        }
    }
    let descriptors: Vec<Vec<Descriptor>> = corpus
        .par_iter()
        .map(|a| asset_descriptors(a, &cfg.detector))
        .collect::<Result<_, _>>()?;
    QuantizedIndex::from_descriptors(corpus.iter().map(|a| a.id.clone()).collect(), descriptors, cfg)
}

impl<T: Scalar> QuantizedIndex<T> {
    pub fn from_descriptors(
        ids: Vec<String>,
        descriptors: Vec<Vec<Descriptor>>,
        cfg: &IndexConfig,
    ) -> Result<Self, FilterError> {
        cfg.validate()?;
        assert_eq!(ids.len(), descriptors.len());
        let total: usize = descriptors.iter().map(Vec::len).sum();
        let need = 10 * cfg.coarse_cells;
        if total < need {
            return Err(FilterError::InsufficientTrainingData { have: total, need });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let flat: Vec<&Descriptor> = descriptors.iter().flatten().collect();
        let mut picks: Vec<usize> = if total > cfg.max_training {
            sample(&mut rng, total, cfg.max_training).into_vec()
        } else {
            (0..total).collect()
        };
        picks.sort_unstable();
        let training: Vec<u8> = picks.iter().flat_map(|&i| descriptor_bytes(flat[i])).collect();

        let coarse = Codebook::train(&training, DESCRIPTOR_BYTES, cfg.coarse_cells, cfg.kmeans_iterations, &mut rng);
        let m = cfg.subquantizers;
        let block = DESCRIPTOR_BYTES / m;
        let sub: Vec<Codebook<T>> = (0..m)
            .map(|j| {
                let part: Vec<u8> = training
                    .chunks_exact(DESCRIPTOR_BYTES)
                    .flat_map(|d| d[j * block..(j + 1) * block].iter().copied())
                    .collect();
                Codebook::train(&part, block, 256, cfg.kmeans_iterations, &mut rng)
            })
            .collect();

        let mut index = Self {
            coarse,
            sub,
            ids,
            descriptors: Vec::new(),
            cells: Vec::new(),
        };
        let encoded: Vec<Vec<(usize, Vec<u8>)>> = descriptors
            .par_iter()
            .map(|ds| ds.iter().map(|d| index.encode(d)).collect())
            .collect();
        index.cells = vec![
            Cell {
                images: Vec::new(),
                codes: Vec::new()
            };
            cfg.coarse_cells
        ];
        for (img, codes) in encoded.into_iter().enumerate() {
            for (cell, code) in codes {
                index.cells[cell].images.push(img as u32);
                index.cells[cell].codes.extend_from_slice(&code);
            }
        }
        index.descriptors = descriptors;
        Ok(index)
    }

    fn encode(&self, d: &Descriptor) -> (usize, Vec<u8>) {
        let bytes = descriptor_bytes(d);
        let block = DESCRIPTOR_BYTES / self.sub.len();
        let code = self
            .sub
            .iter()
            .enumerate()
            .map(|(j, book)| book.nearest(&bytes[j * block..(j + 1) * block]) as u8)
            .collect();
        (self.coarse.nearest(&bytes), code)
    }

    pub fn image_count(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coarse_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn subquantizers(&self) -> usize {
        self.sub.len()
    }

    /// Image indices posted in `cell`, one entry per descriptor.
    pub fn cell_images(&self, cell: usize) -> &[u32] {
        &self.cells[cell].images
    }

    pub fn descriptors_of(&self, id: &str) -> Option<&[Descriptor]> {
        self.ids.iter().position(|x| x == id).map(|i| self.descriptors[i].as_slice())
    }

    /// Stage-one scores for one set of query descriptors.
    fn score(&self, query: &[Descriptor], probe: usize) -> Vec<T> {
        let m = self.sub.len();
        let block = DESCRIPTOR_BYTES / m;
        let partial: Vec<Vec<T>> = query
            .par_iter()
            .map(|d| {
                let bytes = descriptor_bytes(d);
                let mut table = vec![T::zero(); m * 256];
                for (j, book) in self.sub.iter().enumerate() {
                    let x = &bytes[j * block..(j + 1) * block];
                    for c in 0..book.len() {
                        table[j * 256 + c] = book.distance(c, x);
                    }
                }
                let mut scores = vec![T::zero(); self.ids.len()];
                for cell in self.coarse.nearest_n(&bytes, probe) {
                    let cell = &self.cells[cell];
                    for (img, code) in cell.images.iter().zip(cell.codes.chunks_exact(m)) {
                        let dist = code
                            .iter()
                            .enumerate()
                            .fold(T::zero(), |s, (j, &c)| s + table[j * 256 + c as usize]);
                        scores[*img as usize] += T::one() / (T::one() + dist);
                    }
                }
                scores
            })
            .collect();
        // fold in descriptor order so the sum does not depend on scheduling
        let mut total = vec![T::zero(); self.ids.len()];
        for s in partial {
            for (t, v) in total.iter_mut().zip(s) {
                *t += v;
            }
        }
        total
    }

    /// Ranks the corpus against an image already in the index.
    pub fn query_indexed(&self, id: &str, opts: &QueryOptions) -> Result<RankedList, FilterError> {
        let descriptors = self
            .descriptors_of(id)
            .ok_or_else(|| FilterError::UnknownImage(id.to_string()))?;
        self.query_descriptors(id, descriptors, opts)
    }

    /// Ranks the corpus against an arbitrary asset.
    pub fn query(&self, asset: &ImageAsset, detector: &DetectorConfig, opts: &QueryOptions) -> Result<RankedList, FilterError> {
        let d = asset_descriptors(asset, detector)?;
        self.query_descriptors(&asset.id, &d, opts)
    }

    pub fn query_descriptors(
        &self,
        query_id: &str,
        descriptors: &[Descriptor],
        opts: &QueryOptions,
    ) -> Result<RankedList, FilterError> {
        if opts.k == 0 || opts.stages == 0 || opts.probe == 0 {
            return Err(FilterError::Config("k, stages and probe must be positive"));
        }
        if self.ids.is_empty() {
            return Err(FilterError::EmptyIndex);
        }
        let excluded = self.ids.iter().position(|x| x == query_id);
        let rank = |scores: &[T]| -> Vec<usize> {
            let mut order: Vec<usize> = (0..scores.len())
                .filter(|&i| Some(i) != excluded)
                .collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .partial_cmp(&scores[a])
                    .unwrap()
                    .then_with(|| self.ids[a].cmp(&self.ids[b]))
            });
            order
        };

        let mut merged = standardize(self.score(descriptors, opts.probe), excluded);
        let mut used: HashSet<usize> = excluded.into_iter().collect();
        for _ in 1..opts.stages {
            let expand: Vec<usize> = rank(&merged)
                .into_iter()
                .filter(|i| !used.contains(i))
                .take(opts.expansion)
                .collect();
            if expand.is_empty() {
                break;
            }
            for i in expand {
                used.insert(i);
                let scores = standardize(self.score(&self.descriptors[i], opts.probe), Some(i));
                // like the original query, an expansion query does not score itself
                for (j, (m, s)) in merged.iter_mut().zip(scores).enumerate() {
                    if j != i {
                        *m = m.max(s);
                    }
                }
            }
        }
        let entries = rank(&merged)
            .into_iter()
            .take(opts.k)
            .map(|i| (self.ids[i].clone(), merged[i].to_f64().unwrap_or(0.0)))
            .collect();
        Ok(RankedList {
            query_id: query_id.to_string(),
            entries,
        })
    }
}

/// Rescales one query's scores to deviations above its own background
/// (median, MAD), so scores from different queries can be merged by max.
/// Monotone, so a single query's ranking is unchanged.
fn standardize<T: Scalar>(mut scores: Vec<T>, skip: Option<usize>) -> Vec<T> {
    let mut sorted: Vec<T> = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != skip)
        .map(|(_, &s)| s)
        .collect();
    if sorted.is_empty() {
        return scores;
    }
    let median = |v: &mut Vec<T>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let med = median(&mut sorted);
    let mut dev: Vec<T> = sorted.iter().map(|&s| (s - med).abs()).collect();
    let mad = median(&mut dev);
    let scale = if mad > T::zero() { mad } else { T::one() };
    for s in &mut scores {
        *s = (*s - med) / scale;
    }
    scores
}

/// Fraction of `relevant` ids present in `list` (1 when nothing is relevant).
pub fn recall(list: &RankedList, relevant: &[String]) -> f64 {
    let relevant: Vec<&String> = relevant.iter().filter(|r| **r != list.query_id).collect();
    if relevant.is_empty() {
        return 1.0;
    }
    let got: HashSet<&str> = list.ids().collect();
    relevant.iter().filter(|r| got.contains(r.as_str())).count() as f64 / relevant.len() as f64
}

#[cfg(test)]
mod tests;
