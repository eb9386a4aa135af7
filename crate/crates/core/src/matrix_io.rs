//! Shared JSON envelope for adjacency matrices:
//! `{"kind":"visual"|"votes","ids":[...],"data":[[...]]}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Visual,
    Votes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub kind: MatrixKind,
    pub ids: Vec<String>,
    pub data: Vec<Vec<i64>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix schema: {0}")]
    Schema(String),
    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetry(usize, usize),
    #[error("negative weight at ({0}, {1})")]
    NegativeWeight(usize, usize),
}

impl MatrixFile {
    /// Parses and checks shape, kind, and diagonal. Symmetry is the caller's concern.
    pub fn parse(json_text: &str, expected: MatrixKind) -> Result<Self, MatrixError> {
        let m: MatrixFile =
            serde_json::from_str(json_text).map_err(|e| MatrixError::Schema(e.to_string()))?;
        if m.kind != expected {
            return Err(MatrixError::Schema(format!(
                "expected kind {expected:?}, found {:?}",
                m.kind
            )));
        }
        let n = m.data.len();
        if !m.ids.is_empty() && m.ids.len() != n {
            return Err(MatrixError::Schema(format!("{} ids for {n} rows", m.ids.len())));
        }
        for (i, row) in m.data.iter().enumerate() {
            if row.len() != n {
                return Err(MatrixError::Schema(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0 {
                return Err(MatrixError::Schema(format!("nonzero diagonal at {i}")));
            }
            if let Some(j) = row.iter().position(|&v| v < 0) {
                return Err(MatrixError::NegativeWeight(i, j));
            }
            if row.iter().any(|&v| v > u32::MAX as i64) {
                return Err(MatrixError::Schema(format!("row {i} has a weight above u32 range")));
            }
        }
        Ok(m)
    }

    /// Ids, defaulting to row indices when the file omits them.
    pub fn ids_or_indices(&self) -> Vec<String> {
        if self.ids.is_empty() {
            (0..self.data.len()).map(|i| i.to_string()).collect()
        } else {
            self.ids.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix always serializes")
    }
}

/// Row-major flattening of a square JSON matrix already validated by [`MatrixFile::parse`].
pub(crate) fn flatten_u32(data: &[Vec<i64>]) -> Vec<u32> {
    data.iter().flatten().map(|&v| v as u32).collect()
}

pub(crate) fn rows_i64(n: usize, flat: &[u32]) -> Vec<Vec<i64>> {
    (0..n)
        .map(|i| flat[i * n..(i + 1) * n].iter().map(|&v| v as i64).collect())
        .collect()
}
