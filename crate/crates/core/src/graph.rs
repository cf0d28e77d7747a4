//! Sparse graph representation and condensed pair-index arithmetic.
//!
//! Undirected graphs are stored as an edge list over the strict upper
//! triangle (`i < j`), sorted by condensed pair index. Edge class `0` means
//! "no edge" and is never stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of unordered node pairs, `n(n-1)/2`.
#[inline]
pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[inline]
fn row_offset(i: usize, n: usize) -> usize {
    i * n - i * (i + 1) / 2
}

/// Row-major condensed index of the pair `(i, j)`, `i < j < n`.
pub fn pair_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= j || j >= n {
        return Err(Error::arg(format!(
            "pair ({i}, {j}) is not a strict upper-triangle pair for n={n}"
        )));
    }
    Ok(pair_index_unchecked(i, j, n))
}

#[inline]
pub(crate) fn pair_index_unchecked(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    row_offset(i, n) + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(idx: usize, n: usize) -> Result<(usize, usize)> {
    if idx >= num_pairs(n) {
        return Err(Error::arg(format!(
            "condensed index {idx} out of range for n={n} ({} pairs)",
            num_pairs(n)
        )));
    }
    Ok(pair_from_index_unchecked(idx, n))
}

#[inline]
pub(crate) fn pair_from_index_unchecked(idx: usize, n: usize) -> (usize, usize) {
    // largest i in [0, n-2] with row_offset(i) <= idx
    let (mut lo, mut hi) = (0usize, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if row_offset(mid, n) <= idx {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let j = idx - row_offset(lo, n) + lo + 1;
    (lo, j)
}

/// Class counts and marginal label distributions shared by a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    /// Node class count.
    pub a: usize,
    /// Edge class count, including class 0 ("no edge").
    pub b: usize,
    pub node_marginals: Vec<f64>,
    pub edge_marginals: Vec<f64>,
}

fn check_distribution(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::arg(format!(
            "{what} has length {} (expected {len})",
            p.len()
        )));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::arg(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::arg(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl GraphSpec {
    pub fn new(node_marginals: Vec<f64>, edge_marginals: Vec<f64>) -> Result<Self> {
        let spec = GraphSpec {
            a: node_marginals.len(),
            b: edge_marginals.len(),
            node_marginals,
            edge_marginals,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single node class, binary edges with the given edge density.
    pub fn unattributed(density: f64) -> Result<Self> {
        GraphSpec::new(vec![1.0], vec![1.0 - density, density])
    }

    /// Uniform marginals, mostly useful in tests.
    pub fn uniform(a: usize, b: usize) -> Self {
        GraphSpec {
            a,
            b,
            node_marginals: vec![1.0 / a as f64; a],
            edge_marginals: vec![1.0 / b as f64; b],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a == 0 {
            return Err(Error::arg("node class count must be at least 1"));
        }
        if self.b < 2 {
            return Err(Error::arg("edge class count must be at least 2"));
        }
        check_distribution(&self.node_marginals, self.a, "node marginals")?;
        check_distribution(&self.edge_marginals, self.b, "edge marginals")?;
        Ok(())
    }
}

/// Edge-list graph with discrete node and edge labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseGraph {
    n: usize,
    node_labels: Vec<usize>,
    edges: Vec<(usize, usize)>,
    edge_labels: Vec<usize>,
}

impl SparseGraph {
    /// Builds a graph from already-canonical parts, checking every invariant.
    pub fn from_parts(
        n: usize,
        node_labels: Vec<usize>,
        edges: Vec<(usize, usize)>,
        edge_labels: Vec<usize>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::graph("graph must have at least one node"));
        }
        if node_labels.len() != n {
            return Err(Error::graph(format!(
                "{} node labels for {n} nodes",
                node_labels.len()
            )));
        }
        if edges.len() != edge_labels.len() {
            return Err(Error::graph(format!(
                "{} edges but {} edge labels",
                edges.len(),
                edge_labels.len()
            )));
        }
        let mut prev: Option<usize> = None;
        for (&(i, j), &y) in edges.iter().zip(&edge_labels) {
            if i == j {
                return Err(Error::graph(format!("self-loop at node {i}")));
            }
            if i > j || j >= n {
                return Err(Error::graph(format!(
                    "edge ({i}, {j}) is not canonical for n={n}"
                )));
            }
            if y == 0 {
                return Err(Error::graph(format!("edge ({i}, {j}) stores class 0")));
            }
            let idx = pair_index_unchecked(i, j, n);
            if prev.is_some_and(|p| p >= idx) {
                return Err(Error::graph("edges are not strictly sorted by pair index"));
            }
            prev = Some(idx);
        }
        Ok(SparseGraph {
            n,
            node_labels,
            edges,
            edge_labels,
        })
    }

    /// Builds a graph from sorted unique condensed indices.
    pub fn from_condensed(
        n: usize,
        node_labels: Vec<usize>,
        indices: &[usize],
        edge_labels: Vec<usize>,
    ) -> Result<Self> {
        let mut edges = Vec::with_capacity(indices.len());
        for &idx in indices {
            edges.push(pair_from_index(idx, n)?);
        }
        SparseGraph::from_parts(n, node_labels, edges, edge_labels)
    }

    /// `n` isolated nodes, all of class 0.
    pub fn empty(n: usize) -> Result<Self> {
        SparseGraph::from_parts(n, vec![0; n], Vec::new(), Vec::new())
    }

    /// Checks label ranges against a spec.
    pub fn validate_labels(&self, spec: &GraphSpec) -> Result<()> {
        if let Some(&x) = self.node_labels.iter().find(|&&x| x >= spec.a) {
            return Err(Error::graph(format!(
                "node label {x} outside [0, {})",
                spec.a
            )));
        }
        if let Some(&y) = self.edge_labels.iter().find(|&&y| y >= spec.b) {
            return Err(Error::graph(format!(
                "edge label {y} outside [1, {})",
                spec.b
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_labels(&self) -> &[usize] {
        &self.node_labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_labels(&self) -> &[usize] {
        &self.edge_labels
    }

    /// Condensed indices of the stored edges (sorted).
    pub fn edge_indices(&self) -> Vec<usize> {
        self.edges
            .iter()
            .map(|&(i, j)| pair_index_unchecked(i, j, self.n))
            .collect()
    }

    /// Label of the pair `(i, j)` in either orientation; 0 when absent.
    pub fn edge_label(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .binary_search_by(|&(a, b)| (a, b).cmp(&(i, j)))
            .map(|pos| self.edge_labels[pos])
            .unwrap_or(0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        adj
    }

    /// Fraction of node pairs that carry an edge.
    pub fn edge_ratio(&self) -> f64 {
        let p = num_pairs(self.n);
        if p == 0 {
            0.0
        } else {
            self.edges.len() as f64 / p as f64
        }
    }

    /// Same node labels, no edges.
    pub fn without_edges(&self) -> SparseGraph {
        SparseGraph {
            n: self.n,
            node_labels: self.node_labels.clone(),
            edges: Vec::new(),
            edge_labels: Vec::new(),
        }
    }

    pub(crate) fn from_parts_unchecked(
        n: usize,
        node_labels: Vec<usize>,
        edges: Vec<(usize, usize)>,
        edge_labels: Vec<usize>,
    ) -> Self {
        debug_assert!(SparseGraph::from_parts(
            n,
            node_labels.clone(),
            edges.clone(),
            edge_labels.clone()
        )
        .is_ok());
        SparseGraph {
            n,
            node_labels,
            edges,
            edge_labels,
        }
    }
}

/// Normalizes an arbitrary labelled edge list into a [`SparseGraph`].
///
/// Pairs may arrive in either orientation and any order. Exact duplicates
/// and conflicting duplicates are both rejected.
pub fn canonicalize(
    raw_edges: &[(usize, usize, usize)],
    node_labels: Vec<usize>,
    n: usize,
    spec: &GraphSpec,
) -> Result<SparseGraph> {
    let mut keyed = Vec::with_capacity(raw_edges.len());
    for &(u, v, y) in raw_edges {
        if u == v {
            return Err(Error::graph(format!("self-loop at node {u}")));
        }
        let (i, j) = if u < v { (u, v) } else { (v, u) };
        if j >= n {
            return Err(Error::graph(format!(
                "edge ({u}, {v}) references a node >= {n}"
            )));
        }
        if y == 0 || y >= spec.b {
            return Err(Error::graph(format!(
                "edge ({u}, {v}) has label {y} outside [1, {})",
                spec.b
            )));
        }
        keyed.push((pair_index_unchecked(i, j, n), (i, j), y));
    }
    keyed.sort_unstable_by_key(|k| k.0);
    for w in keyed.windows(2) {
        if w[0].0 == w[1].0 {
            let (i, j) = w[0].1;
            return Err(if w[0].2 == w[1].2 {
                Error::graph(format!("duplicate edge ({i}, {j})"))
            } else {
                Error::graph(format!(
                    "duplicate edge ({i}, {j}) with conflicting labels {} and {}",
                    w[0].2, w[1].2
                ))
            });
        }
    }
    let g = SparseGraph::from_parts(
        n,
        node_labels,
        keyed.iter().map(|k| k.1).collect(),
        keyed.iter().map(|k| k.2).collect(),
    )?;
    g.validate_labels(spec)?;
    Ok(g)
}

/// Dense node labels plus a symmetric `n x n` edge-class matrix (row-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseGraph {
    pub n: usize,
    pub node_labels: Vec<usize>,
    pub edge_classes: Vec<usize>,
}

impl DenseGraph {
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.edge_classes[i * self.n + j]
    }
}

/// Materializes the full adjacency. Only meant for oracles and small graphs.
pub fn to_dense(g: &SparseGraph) -> DenseGraph {
    let n = g.n;
    let mut m = vec![0usize; n * n];
    for (&(i, j), &y) in g.edges.iter().zip(&g.edge_labels) {
        m[i * n + j] = y;
        m[j * n + i] = y;
    }
    DenseGraph {
        n,
        node_labels: g.node_labels.clone(),
        edge_classes: m,
    }
}

pub fn from_dense(d: &DenseGraph) -> Result<SparseGraph> {
    let n = d.n;
    if d.edge_classes.len() != n * n {
        return Err(Error::graph("dense matrix has the wrong size"));
    }
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        if d.get(i, i) != 0 {
            return Err(Error::graph(format!("non-zero diagonal at {i}")));
        }
        for j in i + 1..n {
            if d.get(i, j) != d.get(j, i) {
                return Err(Error::graph(format!("asymmetric entry at ({i}, {j})")));
            }
            if d.get(i, j) != 0 {
                edges.push((i, j));
                labels.push(d.get(i, j));
            }
        }
    }
    SparseGraph::from_parts(n, d.node_labels.clone(), edges, labels)
}

/// Relabels node `v` as `perm[v]`.
pub fn permute_nodes(g: &SparseGraph, perm: &[usize]) -> Result<SparseGraph> {
    let n = g.n;
    if perm.len() != n {
        return Err(Error::arg(format!(
            "permutation of length {} for n={n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::arg("permutation is not a bijection"));
        }
    }
    let mut node_labels = vec![0; n];
    for (v, &p) in perm.iter().enumerate() {
        node_labels[p] = g.node_labels[v];
    }
    let mut keyed: Vec<(usize, (usize, usize), usize)> = g
        .edges
        .iter()
        .zip(&g.edge_labels)
        .map(|(&(i, j), &y)| {
            let (a, b) = (perm[i], perm[j]);
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            (pair_index_unchecked(a, b, n), (a, b), y)
        })
        .collect();
    keyed.sort_unstable_by_key(|k| k.0);
    Ok(SparseGraph {
        n,
        node_labels,
        edges: keyed.iter().map(|k| k.1).collect(),
        edge_labels: keyed.iter().map(|k| k.2).collect(),
    })
}

/// A set of graphs with prefix-sum node offsets into a flat index space.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    graphs: Vec<SparseGraph>,
    node_offsets: Vec<usize>,
}

impl GraphBatch {
    pub fn graphs(&self) -> &[SparseGraph] {
        &self.graphs
    }

    pub fn node_offsets(&self) -> &[usize] {
        &self.node_offsets
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn total_nodes(&self) -> usize {
        *self.node_offsets.last().unwrap_or(&0)
    }

    /// Maps a flat node index back to `(graph, local node)`.
    pub fn locate(&self, global: usize) -> Option<(usize, usize)> {
        if global >= self.total_nodes() {
            return None;
        }
        let g = self.node_offsets.partition_point(|&o| o <= global) - 1;
        Some((g, global - self.node_offsets[g]))
    }

    pub fn unbatch(self) -> Vec<SparseGraph> {
        self.graphs
    }
}

pub fn batch(graphs: Vec<SparseGraph>) -> Result<GraphBatch> {
    if graphs.is_empty() {
        return Err(Error::arg("cannot batch an empty graph sequence"));
    }
    let mut node_offsets = Vec::with_capacity(graphs.len() + 1);
    node_offsets.push(0);
    for g in &graphs {
        node_offsets.push(node_offsets.last().unwrap() + g.n);
    }
    Ok(GraphBatch {
        graphs,
        node_offsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_graph(max_n: usize) -> impl Strategy<Value = SparseGraph> {
        (2..=max_n)
            .prop_flat_map(|n| {
                let p = num_pairs(n);
                (
                    Just(n),
                    proptest::collection::vec(0usize..3, p),
                    proptest::collection::vec(0usize..2, n),
                )
            })
            .prop_map(|(n, slots, xs)| {
                let mut edges = Vec::new();
                let mut labels = Vec::new();
                for (idx, &y) in slots.iter().enumerate() {
                    if y != 0 {
                        edges.push(pair_from_index(idx, n).unwrap());
                        labels.push(y);
                    }
                }
                SparseGraph::from_parts(n, xs, edges, labels).unwrap()
            })
    }

    #[test]
    fn pair_index_examples() {
        assert_eq!(pair_index(0, 1, 4).unwrap(), 0);
        assert_eq!(pair_index(1, 3, 4).unwrap(), 4);
        assert_eq!(pair_index(2, 3, 4).unwrap(), 5);
        assert_eq!(pair_from_index(0, 4).unwrap(), (0, 1));
        assert_eq!(pair_from_index(5, 4).unwrap(), (2, 3));
        assert!(pair_index(2, 2, 4).is_err());
        assert!(pair_index(3, 1, 4).is_err());
        assert!(pair_index(1, 4, 4).is_err());
        assert!(pair_from_index(6, 4).is_err());
    }

    #[test]
    fn pair_index_matches_row_major_enumeration() {
        for n in 2..=64 {
            let mut idx = 0;
            for i in 0..n {
                for j in i + 1..n {
                    assert_eq!(pair_index(i, j, n).unwrap(), idx);
                    assert_eq!(pair_from_index(idx, n).unwrap(), (i, j));
                    idx += 1;
                }
            }
            assert_eq!(idx, num_pairs(n));
        }
    }

    #[test]
    fn canonicalize_orients_and_rejects_duplicates() {
        let spec = GraphSpec::uniform(1, 3);
        let g = canonicalize(&[(1, 0, 2)], vec![0, 0], 2, &spec).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.edge_labels(), &[2]);
        assert!(canonicalize(&[(0, 1, 1), (0, 1, 1)], vec![0, 0], 2, &spec).is_err());
        let err = canonicalize(&[(0, 1, 1), (1, 0, 2)], vec![0, 0], 2, &spec).unwrap_err();
        assert!(err.to_string().contains("conflicting"));
        assert!(canonicalize(&[(1, 1, 1)], vec![0, 0], 2, &spec).is_err());
    }

    #[test]
    fn dense_examples() {
        let g = SparseGraph::empty(3).unwrap();
        assert!(to_dense(&g).edge_classes.iter().all(|&v| v == 0));
        let tri = SparseGraph::from_parts(3, vec![0; 3], vec![(0, 1), (0, 2), (1, 2)], vec![1; 3])
            .unwrap();
        let d = to_dense(&tri);
        assert_eq!(d.edge_classes.iter().filter(|&&v| v == 1).count(), 6);
        assert!((0..3).all(|i| d.get(i, i) == 0));
    }

    #[test]
    fn permute_examples() {
        let g = SparseGraph::from_parts(3, vec![0, 1, 0], vec![(0, 2)], vec![1]).unwrap();
        assert_eq!(permute_nodes(&g, &[0, 1, 2]).unwrap(), g);
        let s = permute_nodes(&g, &[1, 0, 2]).unwrap();
        assert_eq!(s.edges(), &[(1, 2)]);
        assert_eq!(s.node_labels(), &[1, 0, 0]);
        assert!(permute_nodes(&g, &[0, 0, 2]).is_err());
    }

    #[test]
    fn batch_offsets() {
        let b = batch(vec![SparseGraph::empty(3).unwrap()]).unwrap();
        assert_eq!(b.node_offsets(), &[0, 3]);
        let b = batch(vec![
            SparseGraph::empty(3).unwrap(),
            SparseGraph::empty(5).unwrap(),
        ])
        .unwrap();
        assert_eq!(b.node_offsets(), &[0, 3, 8]);
        assert_eq!(b.locate(3), Some((1, 0)));
        assert_eq!(b.locate(2), Some((0, 2)));
        assert_eq!(b.locate(8), None);
        assert!(batch(Vec::new()).is_err());
    }

    #[test]
    fn from_parts_rejects_class_zero_and_unsorted() {
        assert!(SparseGraph::from_parts(3, vec![0; 3], vec![(0, 1)], vec![0]).is_err());
        assert!(SparseGraph::from_parts(3, vec![0; 3], vec![(1, 2), (0, 1)], vec![1, 1]).is_err());
        assert!(SparseGraph::from_parts(3, vec![0; 3], vec![(1, 0)], vec![1]).is_err());
    }

    proptest! {
        #[test]
        fn canonicalize_is_order_insensitive(g in arb_graph(9), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let spec = GraphSpec::uniform(2, 3);
            let mut rng = crate::random::seeded(seed);
            let mut raw: Vec<_> = g.edges().iter().zip(g.edge_labels())
                .map(|(&(i, j), &y)| if rand::Rng::random_bool(&mut rng, 0.5) { (i, j, y) } else { (j, i, y) })
                .collect();
            raw.shuffle(&mut rng);
            let c = canonicalize(&raw, g.node_labels().to_vec(), g.n(), &spec).unwrap();
            prop_assert_eq!(&c, &g);
            let raw2: Vec<_> = c.edges().iter().zip(c.edge_labels()).map(|(&(i, j), &y)| (i, j, y)).collect();
            prop_assert_eq!(canonicalize(&raw2, c.node_labels().to_vec(), c.n(), &spec).unwrap(), c);
        }

        #[test]
        fn dense_round_trip(g in arb_graph(10)) {
            prop_assert_eq!(from_dense(&to_dense(&g)).unwrap(), g);
        }

        #[test]
        fn permutations_compose_and_preserve_degrees(g in arb_graph(9), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = g.n();
            let mut p1: Vec<usize> = (0..n).collect();
            let mut p2: Vec<usize> = (0..n).collect();
            p1.shuffle(&mut rng);
            p2.shuffle(&mut rng);
            let composed: Vec<usize> = (0..n).map(|v| p2[p1[v]]).collect();
            let lhs = permute_nodes(&permute_nodes(&g, &p1).unwrap(), &p2).unwrap();
            prop_assert_eq!(&lhs, &permute_nodes(&g, &composed).unwrap());
            let mut d0 = g.degrees();
            let mut d1 = lhs.degrees();
            d0.sort_unstable();
            d1.sort_unstable();
            prop_assert_eq!(d0, d1);
        }

        #[test]
        fn batch_round_trip(gs in proptest::collection::vec(arb_graph(8), 1..20)) {
            let b = batch(gs.clone()).unwrap();
            prop_assert_eq!(b.total_nodes(), gs.iter().map(|g| g.n()).sum::<usize>());
            prop_assert_eq!(b.unbatch(), gs);
        }
    }
}
