use std::borrow::Cow;

use rayon::prelude::*;

use super::{detect, filter_geometric, match_pair, DetectorConfig, Keypoint, VisualError};
use crate::matrix_io::{self, MatrixError, MatrixFile, MatrixKind};
use crate::ImageAsset;

/// Symmetric N x N matrix of consistent-match counts, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VisualMatrix {
    n: usize,
    weights: Vec<u32>,
}

impl VisualMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            weights: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self, MatrixError> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MatrixError::Schema(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0 {
                return Err(MatrixError::Schema(format!("nonzero diagonal at {i}")));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if rows[i][j] != rows[j][i] {
                    return Err(MatrixError::Asymmetry(i, j));
                }
            }
        }
        Ok(Self {
            n,
            weights: rows.concat(),
        })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.weights[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, w: u32) {
        assert_ne!(i, j, "visual matrix diagonal is fixed at zero");
        self.weights[i * self.n + j] = w;
        self.weights[j * self.n + i] = w;
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.weights.chunks(self.n.max(1)).map(<[u32]>::to_vec).collect()
    }

    pub fn to_json(&self, ids: &[String]) -> String {
        MatrixFile {
            kind: MatrixKind::Visual,
            ids: ids.to_vec(),
            data: matrix_io::rows_i64(self.n, &self.weights),
        }
        .to_json()
    }
}

/// Reads an externally computed visual matrix; rejects asymmetric input.
pub fn ingest_matrix(json_text: &str) -> Result<(VisualMatrix, Vec<String>), VisualError> {
    let f = MatrixFile::parse(json_text, MatrixKind::Visual)?;
    let rows: Vec<Vec<u32>> = f
        .data
        .iter()
        .map(|r| r.iter().map(|&v| v as u32).collect())
        .collect();
    Ok((VisualMatrix::from_rows(&rows)?, f.ids_or_indices()))
}

/// RANSAC seed for a pair: FNV-1a over the two ids in sorted order.
pub fn pair_seed(a: &str, b: &str) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in lo.bytes().chain([0u8]).chain(hi.bytes()) {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Consistent-match count between two images. Matching always runs from the
/// lexicographically smaller id so the weight is order independent.
pub fn pair_weight(
    id_a: &str,
    a: &[Keypoint],
    id_b: &str,
    b: &[Keypoint],
    cfg: &DetectorConfig,
) -> u32 {
    let ((_, first), (_, second)) = if id_a <= id_b {
        ((id_a, a), (id_b, b))
    } else {
        ((id_b, b), (id_a, a))
    };
    if first.is_empty() || second.is_empty() {
        return 0;
    }
    let matches = match_pair(first, second, cfg).expect("non-empty keypoints");
    let geo = filter_geometric(first, second, &matches, cfg, pair_seed(id_a, id_b));
    if geo.consistent {
        geo.inliers.len() as u32
    } else {
        0
    }
}

/// Detects keypoints where needed, then weighs every unordered pair in parallel.
pub fn build_visual_matrix(
    assets: &[ImageAsset],
    cfg: &DetectorConfig,
) -> Result<VisualMatrix, VisualError> {
    cfg.validate()?;
    let n = assets.len();
    if n < 2 {
        return Err(VisualError::TooFewImages(n));
    }
    let keypoints: Vec<Cow<'_, [Keypoint]>> = assets
        .par_iter()
        .map(|a| {
            if !a.keypoints.is_empty() {
                return Ok(Cow::Borrowed(a.keypoints.as_slice()));
            }
            match &a.raster {
                Some(r) => detect(r, cfg).map(Cow::Owned),
                None => Err(VisualError::MissingRaster(a.id.clone())),
            }
        })
        .collect::<Result<_, _>>()?;

    let pairs: Vec<(usize, usize, u32)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let w = pair_weight(&assets[i].id, &keypoints[i], &assets[j].id, &keypoints[j], cfg);
            (i, j, w)
        })
        .collect();
    let mut m = VisualMatrix::zeros(n);
    for (i, j, w) in pairs {
        m.set(i, j, w);
    }
    Ok(m)
}
