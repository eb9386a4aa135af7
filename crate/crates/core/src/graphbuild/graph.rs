use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Directed acyclic provenance graph over asset identifiers.
///
/// Edges are stored as index pairs into `node_ids`; `(i, j)` means content
/// flowed from `node_ids[i]` to `node_ids[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceGraph {
    node_ids: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
}

impl ProvenanceGraph {
    pub fn new(
        node_ids: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        if let Some(dup) = node_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(GraphError::DuplicateNode(dup.clone()));
        }
        let n = node_ids.len();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::UnknownEndpoint(a.max(b)));
            }
            if a == b {
                return Err(GraphError::SelfLoop(node_ids[a].clone()));
            }
            set.insert((a, b));
        }
        let g = Self { node_ids, edges: set };
        if g.topological_order().is_none() {
            return Err(GraphError::CycleDetected);
        }
        Ok(g)
    }

    /// Builds from id pairs; every endpoint must be listed in `node_ids`.
    pub fn from_id_edges<S: AsRef<str>>(
        node_ids: Vec<String>,
        edges: impl IntoIterator<Item = (S, S)>,
    ) -> Result<Self, GraphError> {
        let index: HashMap<&str, usize> = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let resolve = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| GraphError::UnknownNode(s.to_string()))
        };
        let pairs = edges
            .into_iter()
            .map(|(a, b)| Ok((resolve(a.as_ref())?, resolve(b.as_ref())?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        Self::new(node_ids, pairs)
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    pub fn node_set(&self) -> BTreeSet<&str> {
        self.node_ids.iter().map(String::as_str).collect()
    }

    pub fn edge_id_set(&self) -> BTreeSet<(&str, &str)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.node_ids[a].as_str(), self.node_ids[b].as_str()))
            .collect()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(_, b)| b == node).count()
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, b)| b == node).map(|&(a, _)| a).collect()
    }

    /// Kahn's algorithm; `None` when a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.node_ids.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            indeg[b] += 1;
            out[a].push(b);
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &w in &out[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn to_bam(&self) -> BinaryAdjacency {
        let n = self.node_ids.len();
        let mut bits = vec![false; n * n];
        for &(a, b) in &self.edges {
            bits[a * n + b] = true;
        }
        BinaryAdjacency { n, bits }
    }

    pub fn from_bam(bam: &BinaryAdjacency, ids: Vec<String>) -> Result<Self, GraphError> {
        if ids.len() != bam.n {
            return Err(GraphError::SizeMismatch {
                expected: bam.n,
                got: ids.len(),
            });
        }
        let n = bam.n;
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| bam.bits[i * n + j]);
        Self::new(ids, edges).map_err(|e| match e {
            GraphError::SelfLoop(_) => GraphError::CycleDetected,
            other => other,
        })
    }

    pub fn to_bam_json(&self) -> String {
        let bam = self.to_bam();
        serde_json::to_string(&BamFile {
            ids: self.node_ids.clone(),
            bam: bam.rows(),
        })
        .expect("BAM always serializes")
    }

    pub fn from_bam_json(json_text: &str) -> Result<Self, GraphError> {
        let f: BamFile =
            serde_json::from_str(json_text).map_err(|e| GraphError::Schema(e.to_string()))?;
        let bam = BinaryAdjacency::from_rows(&f.bam)?;
        Self::from_bam(&bam, f.ids)
    }

    /// DOT digraph with nodes in stored order and edges sorted by index pair.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph provenance {\n");
        for id in &self.node_ids {
            let _ = writeln!(s, "  {};", dot_id(id));
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(s, "  {} -> {};", dot_id(&self.node_ids[a]), dot_id(&self.node_ids[b]));
        }
        s.push_str("}\n");
        s
    }
}

fn dot_id(id: &str) -> String {
    let plain = id
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        id.to_string()
    } else {
        format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BamFile {
    ids: Vec<String>,
    bam: Vec<Vec<u8>>,
}

/// Row-major N x N boolean matrix; `bits[i][j]` means `i -> j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryAdjacency {
    n: usize,
    bits: Vec<bool>,
}

impl BinaryAdjacency {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| u8::from(self.get(i, j))).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, GraphError> {
        let n = rows.len();
        let mut bits = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::Schema(format!("BAM row {i} has {} entries, expected {n}", row.len())));
            }
            for &v in row {
                match v {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    other => return Err(GraphError::Schema(format!("BAM entry {other} is not 0/1"))),
                }
            }
        }
        Ok(Self { n, bits })
    }
}
