//! Vertex / edge overlap metrics.
//!
//! VO, EO, and VEO are F1 scores over node sets, directed edge sets, and
//! their union. Edges are compared as directed id pairs unless the scorer is
//! asked for undirected comparison.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphbuild::ProvenanceGraph;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("no scores to aggregate")]
    EmptyCollection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseScore<T> {
    pub vo: T,
    pub eo: T,
    pub veo: T,
}

/// Raw set sizes behind a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapCounts {
    pub candidate_nodes: usize,
    pub truth_nodes: usize,
    pub shared_nodes: usize,
    pub candidate_edges: usize,
    pub truth_edges: usize,
    pub shared_edges: usize,
}

impl OverlapCounts {
    pub fn between(candidate: &ProvenanceGraph, truth: &ProvenanceGraph, directed: bool) -> Self {
        let cn = candidate.node_set();
        let tn = truth.node_set();
        let norm = |g: &ProvenanceGraph| -> BTreeSet<(String, String)> {
            g.edge_id_set()
                .into_iter()
                .map(|(a, b)| {
                    if directed || a <= b {
                        (a.to_string(), b.to_string())
                    } else {
                        (b.to_string(), a.to_string())
                    }
                })
                .collect()
        };
        let ce = norm(candidate);
        let te = norm(truth);
        Self {
            candidate_nodes: cn.len(),
            truth_nodes: tn.len(),
            shared_nodes: cn.intersection(&tn).count(),
            candidate_edges: ce.len(),
            truth_edges: te.len(),
            shared_edges: ce.intersection(&te).count(),
        }
    }

    pub fn score<T: Scalar>(&self) -> CaseScore<T> {
        let f1 = |shared: usize, total: usize| {
            T::of_usize(2 * shared) / T::of_usize(total)
        };
        let vo = f1(self.shared_nodes, self.candidate_nodes + self.truth_nodes);
        let edge_total = self.candidate_edges + self.truth_edges;
        let eo = match (self.candidate_edges, self.truth_edges) {
            (0, 0) => T::one(),
            _ => f1(self.shared_edges, edge_total),
        };
        let veo = f1(
            self.shared_nodes + self.shared_edges,
            self.candidate_nodes + self.truth_nodes + edge_total,
        );
        CaseScore { vo, eo, veo }
    }
}

pub fn score_case<T: Scalar>(
    candidate: &ProvenanceGraph,
    truth: &ProvenanceGraph,
) -> Result<CaseScore<T>, ScoringError> {
    score_case_with(candidate, truth, true)
}

pub fn score_case_with<T: Scalar>(
    candidate: &ProvenanceGraph,
    truth: &ProvenanceGraph,
    directed: bool,
) -> Result<CaseScore<T>, ScoringError> {
    if candidate.node_count() == 0 || truth.node_count() == 0 {
        return Err(ScoringError::EmptyGraph);
    }
    Ok(OverlapCounts::between(candidate, truth, directed).score())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd<T> {
    pub mean: T,
    pub std: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport<T> {
    pub cases: Vec<CaseScore<T>>,
    pub vo: MeanStd<T>,
    pub eo: MeanStd<T>,
    pub veo: MeanStd<T>,
}

/// Arithmetic mean and population standard deviation, folded in case order.
pub fn aggregate<T: Scalar>(scores: &[CaseScore<T>]) -> Result<SuiteReport<T>, ScoringError> {
    if scores.is_empty() {
        return Err(ScoringError::EmptyCollection);
    }
    let n = T::of_usize(scores.len());
    let stat = |get: fn(&CaseScore<T>) -> T| {
        let mean = scores.iter().map(get).fold(T::zero(), |a, b| a + b) / n;
        let var = scores
            .iter()
            .map(|s| {
                let d = get(s) - mean;
                d * d
            })
            .fold(T::zero(), |a, b| a + b)
            / n;
        MeanStd { mean, std: var.sqrt() }
    };
    Ok(SuiteReport {
        cases: scores.to_vec(),
        vo: stat(|s| s.vo),
        eo: stat(|s| s.eo),
        veo: stat(|s| s.veo),
    })
}

impl<T: Scalar> SuiteReport<T> {
    /// Aligned text table with one `mean±std` column per metric.
    pub fn table(&self, label: &str) -> String {
        let cell = |m: &MeanStd<T>| format!("{:.3}±{:.3}", m.mean, m.std);
        let width = label.len().max(6);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:<13}  {:<13}  {:<13}", "method", "VO", "EO", "VEO");
        let _ = writeln!(
            s,
            "{:<width$}  {:<13}  {:<13}  {:<13}",
            label,
            cell(&self.vo),
            cell(&self.eo),
            cell(&self.veo)
        );
        s
    }
}
