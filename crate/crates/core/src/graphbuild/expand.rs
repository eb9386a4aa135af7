use serde::{Deserialize, Serialize};

use crate::heuristics::VoteMatrix;
use crate::visual::VisualMatrix;

use super::{GraphError, ProvenanceGraph};

/// Minimum consistent-match count for a visual link to join the graph.
pub const DEFAULT_THETA: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandConfig {
    pub theta: u32,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA }
    }
}

/// Greedy expansion from the query over visual weights.
///
/// Starting from `{query}`, repeatedly take the heaviest visual link `u - v`
/// with `u` in the graph, `v` outside, and `d[u][v] >= theta` (ties: smallest
/// `(u, v)`). The link points along the larger vote count; on a vote tie it
/// points from the in-graph node outward. Nodes never reached are left out.
pub fn cluster_expand_build(
    d: &VisualMatrix,
    m: &VoteMatrix,
    query_index: usize,
    ids: &[String],
    cfg: ExpandConfig,
) -> Result<ProvenanceGraph, GraphError> {
    if m.size() != d.size() {
        return Err(GraphError::SizeMismatch {
            expected: d.size(),
            got: m.size(),
        });
    }
    expand(d, query_index, ids, cfg, |u, v| {
        if m.get(v, u) > m.get(u, v) {
            (v, u)
        } else {
            (u, v)
        }
    })
}

/// Visual-only baseline: the same expansion, with every edge pointing from
/// the smaller id to the larger one (no direction evidence at all).
pub fn cluster_visual_build(
    d: &VisualMatrix,
    query_index: usize,
    ids: &[String],
    cfg: ExpandConfig,
) -> Result<ProvenanceGraph, GraphError> {
    expand(d, query_index, ids, cfg, |u, v| if ids[v] < ids[u] { (v, u) } else { (u, v) })
}

/// `orient(u, v)` directs a new link from in-graph `u` to newcomer `v`.
fn expand(
    d: &VisualMatrix,
    query_index: usize,
    ids: &[String],
    cfg: ExpandConfig,
    orient: impl Fn(usize, usize) -> (usize, usize),
) -> Result<ProvenanceGraph, GraphError> {
    let n = d.size();
    if ids.len() != n {
        return Err(GraphError::SizeMismatch {
            expected: n,
            got: ids.len(),
        });
    }
    if query_index >= n {
        return Err(GraphError::InvalidQueryIndex(query_index));
    }

    let mut in_graph = vec![false; n];
    in_graph[query_index] = true;
    let mut edges = Vec::new();
    loop {
        let mut best: Option<(u32, usize, usize)> = None;
        for u in (0..n).filter(|&u| in_graph[u]) {
            for v in (0..n).filter(|&v| !in_graph[v]) {
                let w = d.get(u, v);
                if w < cfg.theta.max(1) {
                    continue;
                }
                // strict comparison keeps the first (smallest u, then v) among equals
                if best.is_none_or(|(bw, _, _)| w > bw) {
                    best = Some((w, u, v));
                }
            }
        }
        let Some((_, u, v)) = best else { break };
        in_graph[v] = true;
        edges.push(orient(u, v));
    }

    // Reindex onto the reached nodes, preserving the input order.
    let kept: Vec<usize> = (0..n).filter(|&i| in_graph[i]).collect();
    let mut remap = vec![usize::MAX; n];
    for (new, &old) in kept.iter().enumerate() {
        remap[old] = new;
    }
    ProvenanceGraph::new(
        kept.iter().map(|&i| ids[i].clone()).collect(),
        edges.into_iter().map(|(a, b)| (remap[a], remap[b])),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i}")).collect()
    }

    fn id_edges(g: &ProvenanceGraph) -> Vec<(String, String)> {
        g.edge_id_set()
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    fn visual(rows: &[Vec<u32>]) -> VisualMatrix {
        VisualMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn two_nodes_votes_decide() {
        let d = visual(&[vec![0, 50], vec![50, 0]]);
        let mut m = VoteMatrix::zeros(2);
        m.set(0, 1, 4);
        m.set(1, 0, 1);
        let g = cluster_expand_build(&d, &m, 0, &ids(2), ExpandConfig::default()).unwrap();
        assert_eq!(id_edges(&g), [("n0".to_string(), "n1".to_string())]);
    }

    /// Query 0 strongly tied to 1, 2, 3; node 4 only weakly linked.
    fn star() -> (VisualMatrix, VoteMatrix) {
        let mut rows = vec![vec![0u32; 5]; 5];
        for (a, b, w) in [(0, 1, 40), (0, 2, 35), (0, 3, 30), (1, 2, 20), (3, 4, 5), (0, 4, 3)] {
            rows[a][b] = w;
            rows[b][a] = w;
        }
        let mut m = VoteMatrix::zeros(5);
        for v in 1..5 {
            m.set(v, 0, 3);
            m.set(0, v, 1);
        }
        (visual(&rows), m)
    }

    #[test]
    fn star_excludes_weak_distractor() {
        let (d, m) = star();
        let g = cluster_expand_build(&d, &m, 0, &ids(5), ExpandConfig::default()).unwrap();
        assert_eq!(g.node_ids(), ["n0", "n1", "n2", "n3"]);
        assert_eq!(g.edge_count(), 3);
        assert!(g.edge_id_set().iter().all(|&(_, to)| to == "n0"));
    }

    #[test]
    fn reversed_votes_reverse_edges() {
        let (d, m) = star();
        let flipped = VoteMatrix::from_rows(
            &(0..5)
                .map(|i| (0..5).map(|j| m.get(j, i)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let a = cluster_expand_build(&d, &m, 0, &ids(5), ExpandConfig::default()).unwrap();
        let b = cluster_expand_build(&d, &flipped, 0, &ids(5), ExpandConfig::default()).unwrap();
        let reversed: Vec<(String, String)> = id_edges(&a).into_iter().map(|(x, y)| (y, x)).collect();
        let mut got = id_edges(&b);
        got.sort();
        let mut want = reversed;
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn vote_tie_points_outward() {
        let d = visual(&[vec![0, 9, 0], vec![9, 0, 9], vec![0, 9, 0]]);
        let g = cluster_expand_build(&d, &VoteMatrix::zeros(3), 1, &ids(3), ExpandConfig::default()).unwrap();
        assert_eq!(
            id_edges(&g),
            [("n1".to_string(), "n0".to_string()), ("n1".to_string(), "n2".to_string())]
        );
    }

    #[test]
    fn visual_baseline_orients_by_id() {
        let (d, _) = star();
        let ids: Vec<String> = ["q", "c", "a", "z", "x"].map(String::from).to_vec();
        let g = cluster_visual_build(&d, 0, &ids, ExpandConfig::default()).unwrap();
        let mut got: Vec<_> = g.edge_id_set().into_iter().collect();
        got.sort();
        assert_eq!(got, [("a", "q"), ("c", "q"), ("q", "z")]);
    }

    #[test]
    fn errors() {
        let d = visual(&[vec![0, 9], vec![9, 0]]);
        assert!(matches!(
            cluster_expand_build(&d, &VoteMatrix::zeros(3), 0, &ids(2), ExpandConfig::default()),
            Err(GraphError::SizeMismatch { .. })
        ));
        assert_eq!(
            cluster_expand_build(&d, &VoteMatrix::zeros(2), 2, &ids(2), ExpandConfig::default()),
            Err(GraphError::InvalidQueryIndex(2))
        );
    }
}
