use crate::heuristics::VoteMatrix;
use crate::union_find::UnionFind;

use super::{GraphError, ProvenanceGraph};

/// Maximum spanning forest over `max(M[i][j], M[j][i])`.
///
/// Candidate edges are taken by descending weight, ties by the
/// lexicographically smaller `(min id, max id)` pair. Each accepted edge
/// points along the larger directional vote count, or from the smaller id on
/// a tie. Zero-weight pairs are not edges, so
/// the output has `N - c` edges where `c` counts the components of the
/// positive-weight graph.
pub fn kruskal_build(m: &VoteMatrix, ids: &[String]) -> Result<ProvenanceGraph, GraphError> {
    let n = m.size();
    if n < 2 {
        return Err(GraphError::TooFewImages(n));
    }
    if ids.len() != n {
        return Err(GraphError::SizeMismatch {
            expected: n,
            got: ids.len(),
        });
    }

    // Each pair is stored with its smaller id first.
    let mut candidates: Vec<(u32, usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| if ids[j] < ids[i] { (j, i) } else { (i, j) })
        .map(|(i, j)| (m.get(i, j).max(m.get(j, i)), i, j))
        .filter(|&(w, _, _)| w > 0)
        .collect();
    candidates.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then_with(|| (&ids[a.1], &ids[a.2]).cmp(&(&ids[b.1], &ids[b.2])))
    });

    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (_, i, j) in candidates {
        if uf.union(i, j) {
            edges.push(if m.get(j, i) > m.get(i, j) { (j, i) } else { (i, j) });
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    ProvenanceGraph::new(ids.to_vec(), edges)
}

/// Sum of symmetrized weights over the edges of `g` (indices shared with `m`).
pub fn symmetrized_tree_weight(m: &VoteMatrix, g: &ProvenanceGraph) -> u64 {
    g.edges()
        .iter()
        .map(|&(a, b)| u64::from(m.get(a, b).max(m.get(b, a))))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    fn edges(g: &ProvenanceGraph) -> Vec<(usize, usize)> {
        g.edges().iter().copied().collect()
    }

    #[test]
    fn two_nodes_single_direction() {
        let m = VoteMatrix::from_rows(&[vec![0, 3], vec![0, 0]]).unwrap();
        assert_eq!(edges(&kruskal_build(&m, &ids(2)).unwrap()), [(0, 1)]);
        let m = VoteMatrix::from_rows(&[vec![0, 0], vec![3, 0]]).unwrap();
        assert_eq!(edges(&kruskal_build(&m, &ids(2)).unwrap()), [(1, 0)]);
    }

    #[test]
    fn three_node_chain() {
        // Only three spanning trees exist: {01,12}=6, {01,02}=4, {02,12}=4.
        let mut m = VoteMatrix::zeros(3);
        m.set(0, 1, 3);
        m.set(1, 2, 3);
        m.set(0, 2, 1);
        let g = kruskal_build(&m, &ids(3)).unwrap();
        assert_eq!(edges(&g), [(0, 1), (1, 2)]);
        assert_eq!(symmetrized_tree_weight(&m, &g), 6);
    }

    #[test]
    fn all_ties_follow_id_order() {
        // Trace: candidates (0,1),(0,2),(1,2) all weight 1; (0,1) and (0,2) accepted,
        // directions from the smaller id on the vote tie.
        let m = VoteMatrix::from_rows(&[vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]).unwrap();
        let g = kruskal_build(&m, &ids(3)).unwrap();
        assert_eq!(edges(&g), [(0, 1), (0, 2)]);
        assert_eq!(symmetrized_tree_weight(&m, &g), 2);
    }

    #[test]
    fn ties_use_ids_not_positions() {
        let m = VoteMatrix::from_rows(&[vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]).unwrap();
        let ids: Vec<String> = ["c", "b", "a"].map(String::from).to_vec();
        let g = kruskal_build(&m, &ids).unwrap();
        let mut got: Vec<_> = g.edge_id_set().into_iter().collect();
        got.sort();
        assert_eq!(got, [("a", "b"), ("a", "c")]);
    }

    #[test]
    fn zero_votes_give_empty_forest() {
        let g = kruskal_build(&VoteMatrix::zeros(4), &ids(4)).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_count(), 4);
    }

    #[test]
    fn errors() {
        assert_eq!(kruskal_build(&VoteMatrix::zeros(1), &ids(1)), Err(GraphError::TooFewImages(1)));
        assert!(matches!(
            kruskal_build(&VoteMatrix::zeros(3), &ids(2)),
            Err(GraphError::SizeMismatch { .. })
        ));
    }

    fn vote_matrix(n: usize, cells: &[u32]) -> VoteMatrix {
        let mut m = VoteMatrix::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.set(i, j, cells[k]);
                    k += 1;
                }
            }
        }
        m
    }

    /// Best total weight over every acyclic subset of positive edges.
    fn brute_force_forest_weight(m: &VoteMatrix) -> (u64, usize) {
        let n = m.size();
        let pairs: Vec<(usize, usize, u64)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, u64::from(m.get(i, j).max(m.get(j, i)))))
            .filter(|p| p.2 > 0)
            .collect();
        let mut best = (0, 0);
        for mask in 0u32..(1 << pairs.len()) {
            let mut uf = UnionFind::new(n);
            let mut ok = true;
            let (mut w, mut count) = (0, 0);
            for (k, &(i, j, pw)) in pairs.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    if !uf.union(i, j) {
                        ok = false;
                        break;
                    }
                    w += pw;
                    count += 1;
                }
            }
            if ok && (w, count) > best {
                best = (w, count);
            }
        }
        best
    }

    fn arb_votes() -> impl Strategy<Value = VoteMatrix> {
        (2usize..=7).prop_flat_map(|n| {
            proptest::collection::vec(prop_oneof![3 => Just(0u32), 2 => 0u32..5], n * (n - 1))
                .prop_map(move |cells| vote_matrix(n, &cells))
        })
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn matches_brute_force_forest(m in arb_votes()) {
            let g = kruskal_build(&m, &ids(m.size())).unwrap();
            let (best_w, best_edges) = brute_force_forest_weight(&m);
            prop_assert_eq!(symmetrized_tree_weight(&m, &g), best_w);
            // a maximum forest spans every positive-weight component
            prop_assert_eq!(g.edge_count(), best_edges);
        }

        #[test]
        fn scaling_keeps_edges(m in arb_votes(), k in 1u32..7) {
            let ids = ids(m.size());
            prop_assert_eq!(kruskal_build(&m, &ids).unwrap(), kruskal_build(&m.scaled(k), &ids).unwrap());
        }

        #[test]
        fn permutation_equivariant(m in arb_votes(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let n = m.size();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let base_ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
            let permuted_ids: Vec<String> = perm.iter().map(|&p| base_ids[p].clone()).collect();
            let a = kruskal_build(&m, &base_ids).unwrap();
            let b = kruskal_build(&m.permuted(&perm), &permuted_ids).unwrap();
            prop_assert_eq!(a.edge_id_set(), b.edge_id_set());
        }
    }
}
