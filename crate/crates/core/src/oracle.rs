//! Dense, deliberately naive reference implementations.
//!
//! Everything here materializes full `n x n` label matrices or explicit
//! matrix products and shares no code path with the sparse implementations
//! it is compared against.

use rand::Rng;

use crate::autodiff::Matrix;
use crate::graph::{to_dense, DenseGraph, SparseGraph};
use crate::noise::TransitionMatrix;
use crate::random::sample_categorical;

fn dense_adjacency(g: &SparseGraph) -> Vec<Vec<bool>> {
    let d = to_dense(g);
    (0..d.n)
        .map(|i| (0..d.n).map(|j| d.get(i, j) != 0).collect())
        .collect()
}

/// Simple cycles of length 3, 4 and 5 by exhaustive path extension.
pub fn count_simple_cycles(g: &SparseGraph) -> [usize; 3] {
    let adj = dense_adjacency(g);
    let n = adj.len();
    let mut counts = [0usize; 3];
    // each cycle is rooted at its smallest vertex and walked in both
    // directions, so every cycle is found exactly twice
    fn extend(adj: &[Vec<bool>], root: usize, path: &mut Vec<usize>, counts: &mut [usize; 3]) {
        let last = *path.last().unwrap();
        if path.len() >= 3 && adj[last][root] {
            counts[path.len() - 3] += 1;
        }
        if path.len() == 5 {
            return;
        }
        for v in root + 1..adj.len() {
            if adj[last][v] && !path.contains(&v) {
                path.push(v);
                extend(adj, root, path, counts);
                path.pop();
            }
        }
    }
    for root in 0..n {
        let mut path = vec![root];
        extend(&adj, root, &mut path, &mut counts);
    }
    counts.map(|c| c / 2)
}

/// Triangles through each node by a triple loop.
pub fn triangles_per_node(g: &SparseGraph) -> Vec<usize> {
    let adj = dense_adjacency(g);
    let n = adj.len();
    let mut t = vec![0; n];
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if adj[a][b] && adj[b][c] && adj[a][c] {
                    t[a] += 1;
                    t[b] += 1;
                    t[c] += 1;
                }
            }
        }
    }
    t
}

/// Connectivity by BFS over the dense adjacency matrix.
pub fn is_connected(g: &SparseGraph) -> bool {
    let adj = dense_adjacency(g);
    let n = adj.len();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if adj[u][v] && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Per-slot noisy distributions: one row of the node kernel per node, one row
/// of the edge kernel per pair `(i, j)`, `i < j`, in row-major order.
pub fn slot_distributions(
    g: &SparseGraph,
    node_kernel: &TransitionMatrix,
    edge_kernel: &TransitionMatrix,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = to_dense(g);
    let nodes = d
        .node_labels
        .iter()
        .map(|&x| node_kernel.row(x).to_vec())
        .collect();
    let mut pairs = Vec::new();
    for i in 0..d.n {
        for j in i + 1..d.n {
            pairs.push(edge_kernel.row(d.get(i, j)).to_vec());
        }
    }
    (nodes, pairs)
}

/// Corrupts every slot of the dense label matrix independently.
pub fn dense_corrupt<R: Rng + ?Sized>(
    g: &SparseGraph,
    node_kernel: &TransitionMatrix,
    edge_kernel: &TransitionMatrix,
    rng: &mut R,
) -> DenseGraph {
    let d = to_dense(g);
    let n = d.n;
    let node_labels = d
        .node_labels
        .iter()
        .map(|&x| sample_categorical(node_kernel.row(x), rng))
        .collect();
    let mut edge_classes = vec![0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let y = sample_categorical(edge_kernel.row(d.get(i, j)), rng);
            edge_classes[i * n + j] = y;
            edge_classes[j * n + i] = y;
        }
    }
    DenseGraph {
        n,
        node_labels,
        edge_classes,
    }
}

/// `P[Binomial(trials, p) >= k]` by direct summation in log space.
pub fn binomial_upper_tail(trials: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > trials {
        return 0.0;
    }
    let ln_choose = |m: u64| -> f64 {
        let lg = |x: u64| statrs::function::gamma::ln_gamma(x as f64 + 1.0);
        lg(trials) - lg(m) - lg(trials - m)
    };
    (k..=trials)
        .map(|m| (ln_choose(m) + m as f64 * p.ln() + (trials - m) as f64 * (1.0 - p).ln()).exp())
        .sum::<f64>()
        .min(1.0)
}

/// `Σ_i CE(x_i) + c Σ_{all pairs} CE(y_ij)` from dense per-slot predictions.
///
/// `edge_probs` has one row per pair in row-major upper-triangle order.
pub fn dense_loss(
    node_probs: &Matrix,
    edge_probs: &Matrix,
    clean: &SparseGraph,
    c: f64,
) -> (f64, f64) {
    let d = to_dense(clean);
    let mut node = 0.0;
    for v in 0..d.n {
        node -= node_probs.get(v, d.node_labels[v]).max(1e-12).ln();
    }
    let mut edge = 0.0;
    let mut r = 0;
    for i in 0..d.n {
        for j in i + 1..d.n {
            edge -= edge_probs.get(r, d.get(i, j)).max(1e-12).ln();
            r += 1;
        }
    }
    (node, c * edge)
}

/// Ordered product `Q_from · Q_{from+1} ⋯ Q_to` of single-step matrices
/// (`steps[s - 1]` is `Q_s`); identity when `from > to`.
pub fn chain_product(steps: &[TransitionMatrix], from: usize, to: usize) -> TransitionMatrix {
    let size = steps[0].size();
    let mut acc = TransitionMatrix::identity(size);
    for s in from..=to {
        acc = acc.matmul(&steps[s - 1]);
    }
    acc
}

/// `q(z_{t-k} | z_t, x0)` from explicit products of single-step matrices.
pub fn dense_posterior(
    steps: &[TransitionMatrix],
    t: usize,
    k: usize,
    z_t: usize,
    x0: usize,
) -> Vec<f64> {
    let span = chain_product(steps, t - k + 1, t);
    let before = chain_product(steps, 1, t - k);
    let now = chain_product(steps, 1, t);
    let size = span.size();
    let denom = now.get(x0, z_t);
    (0..size)
        .map(|j| span.get(j, z_t) * before.get(x0, j) / denom)
        .collect()
}

/// `q(z_{t-k} | z_t, x0)` by chaining `k` single-step posteriors and summing
/// out the intermediate states.
pub fn composed_posterior(
    steps: &[TransitionMatrix],
    t: usize,
    k: usize,
    z_t: usize,
    x0: usize,
) -> Vec<f64> {
    let size = steps[0].size();
    let mut dist = vec![0.0; size];
    dist[z_t] = 1.0;
    for s in (t - k + 1..=t).rev() {
        let mut next = vec![0.0; size];
        for (i, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (j, q) in dense_posterior(steps, s, 1, i, x0).into_iter().enumerate() {
                next[j] += w * q;
            }
        }
        dist = next;
    }
    dist
}

/// Reverse-step distribution of one slot: `Σ_x0 p(x0) q(· | z_t, x0)`,
/// restricted to clean classes that can reach `z_t` and renormalized.
pub fn dense_reverse_slot(
    steps: &[TransitionMatrix],
    t: usize,
    k: usize,
    z_t: usize,
    p_x0: &[f64],
) -> Vec<f64> {
    let now = chain_product(steps, 1, t);
    let size = p_x0.len();
    let mut out = vec![0.0; size];
    for (x0, &w) in p_x0.iter().enumerate() {
        if w == 0.0 || now.get(x0, z_t) <= 0.0 {
            continue;
        }
        for (j, q) in dense_posterior(steps, t, k, z_t, x0)
            .into_iter()
            .enumerate()
        {
            out[j] += w * q;
        }
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// Marginal law of one slot after running the reverse chain from the prior
/// `prior` down the ladder `t_S > … > t_0 = 0` with a fixed clean prediction
/// `p_x0` at every step.
pub fn dense_chain_marginal(
    steps: &[TransitionMatrix],
    ladder: &[usize],
    prior: &[f64],
    p_x0: &[f64],
) -> Vec<f64> {
    let size = prior.len();
    let mut dist = prior.to_vec();
    for w in ladder.windows(2) {
        let (t, s) = (w[0], w[1]);
        let mut next = vec![0.0; size];
        for (i, &m) in dist.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (j, q) in dense_reverse_slot(steps, t, t - s, i, p_x0)
                .into_iter()
                .enumerate()
            {
                next[j] += m * q;
            }
        }
        dist = next;
    }
    dist
}

/// Biased MMD² by a plain double loop over a TV-distance Gaussian kernel.
pub fn naive_mmd2(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> f64 {
    let tv = |p: &Vec<f64>, q: &Vec<f64>| {
        let len = p.len().max(q.len());
        let mut s = 0.0;
        for i in 0..len {
            s += (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs();
        }
        0.5 * s
    };
    let k = |p: &Vec<f64>, q: &Vec<f64>| (-tv(p, q).powi(2) / (2.0 * sigma * sigma)).exp();
    let mut xx = 0.0;
    for p in a {
        for q in a {
            xx += k(p, q);
        }
    }
    let mut yy = 0.0;
    for p in b {
        for q in b {
            yy += k(p, q);
        }
    }
    let mut xy = 0.0;
    for p in a {
        for q in b {
            xy += k(p, q);
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    xx / (na * na) + yy / (nb * nb) - 2.0 * xy / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;

    fn from_edges(n: usize, edges: &[(usize, usize)]) -> SparseGraph {
        let raw: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1)).collect();
        crate::graph::canonicalize(&raw, vec![0; n], n, &GraphSpec::uniform(1, 2)).unwrap()
    }

    #[test]
    fn cycles_of_complete_graphs() {
        // K5: C(5,3)=10 triangles, 15 four-cycles, 12 five-cycles
        let mut e = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                e.push((i, j));
            }
        }
        assert_eq!(count_simple_cycles(&from_edges(5, &e)), [10, 15, 12]);
    }

    #[test]
    fn binomial_tail_small() {
        // P[Bin(3, 0.5) >= 2] = 4/8
        assert!((binomial_upper_tail(3, 0.5, 2) - 0.5).abs() < 1e-14);
        assert_eq!(binomial_upper_tail(3, 0.5, 0), 1.0);
        assert_eq!(binomial_upper_tail(3, 0.5, 4), 0.0);
    }

    #[test]
    fn connectivity_and_triangles() {
        let g = from_edges(4, &[(0, 1), (1, 2), (0, 2)]);
        assert!(!is_connected(&g));
        assert_eq!(triangles_per_node(&g), vec![1, 1, 1, 0]);
        assert!(is_connected(&from_edges(4, &[(0, 1), (1, 2), (2, 3)])));
    }

    #[test]
    fn composed_single_step_equals_direct() {
        let steps: Vec<TransitionMatrix> = [0.9, 0.7, 0.8]
            .iter()
            .map(|&a| TransitionMatrix::marginal(a, &[0.6, 0.3, 0.1]))
            .collect();
        for z in 0..3 {
            for x0 in 0..3 {
                let a = dense_posterior(&steps, 3, 3, z, x0);
                let b = composed_posterior(&steps, 3, 3, z, x0);
                for (p, q) in a.iter().zip(&b) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }
}
