//! Metadata vote heuristics.
//!
//! Each heuristic looks at a pair of bundles and casts directional votes:
//! `(votes_ab, votes_ba)`, where `votes_ab` supports content flowing from `a`
//! to `b`. Summing the enabled heuristics over every pair gives the asymmetric
//! vote matrix `M`, with `M[i][j]` the support for `i -> j`.
//!
//! Votes are raw integer counts. Consumers only compare counts, so any
//! monotone normalization would leave their decisions unchanged.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix_io::{self, MatrixError, MatrixFile, MatrixKind};
use crate::metadata::{TagBundle, Timestamp};

/// Upper bound on the votes a single ordered pair can collect with every
/// heuristic on. The rules as written top out at 7; 11 is the documented bound.
pub const MAX_VOTES: u32 = 11;

pub type Votes = (u32, u32);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeuristicsError {
    #[error("need at least 2 images, got {0}")]
    TooFewImages(usize),
    #[error("no heuristic enabled")]
    NoHeuristics,
    #[error("unknown heuristic {0:?}")]
    UnknownHeuristic(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub fn vote_date(a: &TagBundle, b: &TagBundle) -> Votes {
    let fields: [fn(&TagBundle) -> Option<Timestamp>; 3] = [
        |t| t.date_time_original,
        |t| t.modify_date,
        |t| t.create_date,
    ];
    fields.iter().fold((0, 0), |(ab, ba), f| match (f(a), f(b)) {
        (Some(x), Some(y)) => (ab + u32::from(x <= y), ba + u32::from(y <= x)),
        _ => (ab, ba),
    })
}

/// Shared shape of the location and camera rules: full equality votes both
/// ways; otherwise a side holding the complete group votes toward a side
/// missing part of it.
fn group_rule<T: PartialEq>(a: Option<T>, b: Option<T>) -> Votes {
    match (a, b) {
        (Some(x), Some(y)) if x == y => (1, 1),
        (Some(_), None) => (1, 0),
        (None, Some(_)) => (0, 1),
        _ => (0, 0),
    }
}

pub fn vote_location(a: &TagBundle, b: &TagBundle) -> Votes {
    let group = |t: &TagBundle| {
        t.has_location().then(|| {
            (
                t.gps_latitude,
                t.gps_latitude_ref.clone(),
                t.gps_longitude,
                t.gps_longitude_ref.clone(),
            )
        })
    };
    group_rule(group(a), group(b))
}

pub fn vote_camera(a: &TagBundle, b: &TagBundle) -> Votes {
    let group = |t: &TagBundle| {
        t.has_camera()
            .then(|| (t.make.clone(), t.model.clone(), t.software.clone()))
    };
    group_rule(group(a), group(b))
}

/// Content tends to flow toward the manipulated image, so `a -> b` gains a
/// vote when `b` carries editing traces (and symmetrically).
pub fn vote_editing(a: &TagBundle, b: &TagBundle) -> Votes {
    (
        u32::from(b.has_editing_trace()),
        u32::from(a.has_editing_trace()),
    )
}

pub fn vote_thumbnail(a: &TagBundle, b: &TagBundle) -> Votes {
    group_rule(a.thumbnail.as_deref(), b.thumbnail.as_deref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeuristicSet {
    pub date: bool,
    pub location: bool,
    pub camera: bool,
    pub editing: bool,
    pub thumbnail: bool,
}

impl Default for HeuristicSet {
    fn default() -> Self {
        Self::all()
    }
}

impl HeuristicSet {
    pub const NAMES: [&'static str; 5] = ["date", "location", "camera", "editing", "thumbnail"];

    pub const fn all() -> Self {
        Self {
            date: true,
            location: true,
            camera: true,
            editing: true,
            thumbnail: true,
        }
    }

    pub const fn none() -> Self {
        Self {
            date: false,
            location: false,
            camera: false,
            editing: false,
            thumbnail: false,
        }
    }

    pub fn only(name: &str) -> Result<Self, HeuristicsError> {
        let mut s = Self::none();
        *s.flag_mut(name)? = true;
        Ok(s)
    }

    fn flag_mut(&mut self, name: &str) -> Result<&mut bool, HeuristicsError> {
        Ok(match name {
            "date" => &mut self.date,
            "location" => &mut self.location,
            "camera" => &mut self.camera,
            "editing" => &mut self.editing,
            "thumbnail" => &mut self.thumbnail,
            other => return Err(HeuristicsError::UnknownHeuristic(other.to_string())),
        })
    }

    pub fn flags(&self) -> [bool; 5] {
        [self.date, self.location, self.camera, self.editing, self.thumbnail]
    }

    pub fn any(&self) -> bool {
        self.flags().iter().any(|&f| f)
    }

    /// Sum of the enabled heuristics' votes for one pair.
    pub fn vote(&self, a: &TagBundle, b: &TagBundle) -> Votes {
        let rules: [(bool, fn(&TagBundle, &TagBundle) -> Votes); 5] = [
            (self.date, vote_date),
            (self.location, vote_location),
            (self.camera, vote_camera),
            (self.editing, vote_editing),
            (self.thumbnail, vote_thumbnail),
        ];
        rules
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, rule)| rule(a, b))
            .fold((0, 0), |(x, y), (p, q)| (x + p, y + q))
    }
}

/// Comma-separated heuristic names, or `all`.
impl FromStr for HeuristicSet {
    type Err = HeuristicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "all" {
            return Ok(Self::all());
        }
        let mut set = Self::none();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            *set.flag_mut(name)? = true;
        }
        Ok(set)
    }
}

impl fmt::Display for HeuristicSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Self::NAMES
            .iter()
            .zip(self.flags())
            .filter_map(|(n, on)| on.then_some(*n))
            .collect();
        if names.len() == 5 {
            f.write_str("all")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

/// Asymmetric N x N matrix of metadata votes, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VoteMatrix {
    n: usize,
    votes: Vec<u32>,
}

impl VoteMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            votes: vec![0; n * n],
        }
    }

    /// Row-major construction; the diagonal must be zero.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self, HeuristicsError> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n || row[i] != 0 {
                return Err(MatrixError::Schema(format!("row {i} malformed")).into());
            }
            m.votes[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.votes[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        assert_ne!(i, j, "vote matrix diagonal is fixed at zero");
        self.votes[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.votes.chunks(self.n.max(1)).map(<[u32]>::to_vec).collect()
    }

    pub fn max_entry(&self) -> u32 {
        self.votes.iter().copied().max().unwrap_or(0)
    }

    /// Same entries multiplied by `k` (used to check argmax invariance).
    pub fn scaled(&self, k: u32) -> Self {
        Self {
            n: self.n,
            votes: self.votes.iter().map(|v| v * k).collect(),
        }
    }

    /// Rows and columns reordered so that new index `i` is old index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.votes[i * self.n + j] = self.get(perm[i], perm[j]);
            }
        }
        out
    }

    pub fn to_json(&self, ids: &[String]) -> String {
        MatrixFile {
            kind: MatrixKind::Votes,
            ids: ids.to_vec(),
            data: matrix_io::rows_i64(self.n, &self.votes),
        }
        .to_json()
    }

    pub fn from_json(json_text: &str) -> Result<(Self, Vec<String>), HeuristicsError> {
        let f = MatrixFile::parse(json_text, MatrixKind::Votes)?;
        Ok((
            Self {
                n: f.data.len(),
                votes: matrix_io::flatten_u32(&f.data),
            },
            f.ids_or_indices(),
        ))
    }
}

impl std::ops::Add for &VoteMatrix {
    type Output = VoteMatrix;

    fn add(self, rhs: &VoteMatrix) -> VoteMatrix {
        assert_eq!(self.n, rhs.n);
        VoteMatrix {
            n: self.n,
            votes: self.votes.iter().zip(&rhs.votes).map(|(a, b)| a + b).collect(),
        }
    }
}

pub fn build_vote_matrix(
    bundles: &[TagBundle],
    enabled: HeuristicSet,
) -> Result<VoteMatrix, HeuristicsError> {
    let n = bundles.len();
    if n < 2 {
        return Err(HeuristicsError::TooFewImages(n));
    }
    if !enabled.any() {
        return Err(HeuristicsError::NoHeuristics);
    }
    let pairs: Vec<(usize, usize, Votes)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            ((i + 1)..n).map(move |j| (i, j, enabled.vote(&bundles[i], &bundles[j])))
        })
        .collect();
    let mut m = VoteMatrix::zeros(n);
    for (i, j, (ij, ji)) in pairs {
        m.votes[i * n + j] = ij;
        m.votes[j * n + i] = ji;
    }
    Ok(m)
}
