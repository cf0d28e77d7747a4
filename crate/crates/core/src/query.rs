//! Query edges and the message-passing graph.
//!
//! At each forward pass the denoiser only predicts a uniform random fraction
//! `λ` of all node pairs (the query edges). Messages flow along the union of
//! the noisy edges and the query edges.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{num_pairs, pair_from_index_unchecked, GraphBatch, SparseGraph};

/// `⌈λ · n(n-1)/2⌉`, tolerant to rounding noise in `λ · pairs`.
pub fn query_count(n: usize, lambda: f64) -> usize {
    let pairs = num_pairs(n);
    let raw = lambda * pairs as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(pairs)
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::arg(format!(
            "sparsity parameter {lambda} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Per-graph sorted condensed indices of the queried pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEdgeSet {
    pub lambda: f64,
    pub per_graph: Vec<Vec<usize>>,
}

/// Uniform without-replacement query sample for one graph with `n` nodes.
pub fn sample_queries<R: Rng + ?Sized>(n: usize, lambda: f64, rng: &mut R) -> Result<Vec<usize>> {
    check_lambda(lambda)?;
    let mut q = rand::seq::index::sample(rng, num_pairs(n), query_count(n, lambda)).into_vec();
    q.sort_unstable();
    Ok(q)
}

pub fn sample_query_edges<R: Rng + ?Sized>(
    batch: &GraphBatch,
    lambda: f64,
    rng: &mut R,
) -> Result<QueryEdgeSet> {
    check_lambda(lambda)?;
    let per_graph = batch
        .graphs()
        .iter()
        .map(|g| sample_queries(g.n(), lambda, rng))
        .collect::<Result<_>>()?;
    Ok(QueryEdgeSet { lambda, per_graph })
}

/// Noisy edges plus query edges, deduplicated and sorted by pair index.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageGraph {
    pub n: usize,
    pub node_labels: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub pair_indices: Vec<usize>,
    /// Noisy label, or 0 for query-only pairs.
    pub labels: Vec<usize>,
    pub is_noisy: Vec<bool>,
    pub is_query: Vec<bool>,
    /// Row of each query (in the caller's query order) inside `edges`.
    pub query_rows: Vec<usize>,
    /// Condensed indices of the queries, in the caller's order.
    pub queries: Vec<usize>,
}

impl MessageGraph {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
}

/// Builds `E_m = E^t ∪ E_q`. `queries` must be unique but need not be sorted.
pub fn build_message_graph(noisy: &SparseGraph, queries: &[usize]) -> Result<MessageGraph> {
    let n = noisy.n();
    let pairs = num_pairs(n);
    let mut sorted_q: Vec<(usize, usize)> = queries
        .iter()
        .copied()
        .enumerate()
        .map(|(k, q)| (q, k))
        .collect();
    sorted_q.sort_unstable();
    if sorted_q.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::arg("query pairs must be unique"));
    }
    if sorted_q.last().is_some_and(|q| q.0 >= pairs) {
        return Err(Error::arg("query pair index out of range"));
    }

    let noisy_idx = noisy.edge_indices();
    let cap = noisy_idx.len() + sorted_q.len();
    let mut mg = MessageGraph {
        n,
        node_labels: noisy.node_labels().to_vec(),
        edges: Vec::with_capacity(cap),
        pair_indices: Vec::with_capacity(cap),
        labels: Vec::with_capacity(cap),
        is_noisy: Vec::with_capacity(cap),
        is_query: Vec::with_capacity(cap),
        query_rows: vec![0; queries.len()],
        queries: queries.to_vec(),
    };
    let (mut a, mut b) = (0, 0);
    while a < noisy_idx.len() || b < sorted_q.len() {
        let next_noisy = noisy_idx.get(a).copied().unwrap_or(usize::MAX);
        let next_query = sorted_q.get(b).map(|q| q.0).unwrap_or(usize::MAX);
        let idx = next_noisy.min(next_query);
        let from_noisy = next_noisy == idx;
        let from_query = next_query == idx;
        let row = mg.edges.len();
        mg.edges.push(pair_from_index_unchecked(idx, n));
        mg.pair_indices.push(idx);
        mg.labels.push(if from_noisy {
            noisy.edge_labels()[a]
        } else {
            0
        });
        mg.is_noisy.push(from_noisy);
        mg.is_query.push(from_query);
        if from_noisy {
            a += 1;
        }
        if from_query {
            mg.query_rows[sorted_q[b].1] = row;
            b += 1;
        }
    }
    Ok(mg)
}
