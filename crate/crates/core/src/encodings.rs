//! Structural and positional features fed to the denoiser.
//!
//! These are constants with respect to the network weights: nothing here is
//! differentiated.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{num_pairs, pair_from_index_unchecked, SparseGraph};

const EIGEN_MAX_ITER: usize = 10_000;
const ZERO_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingConfig {
    /// Laplacian eigenpairs retained (zero padded on small graphs).
    pub k_eig: usize,
    /// Shortest distances above this are bucketed together.
    pub hop_cap: usize,
    pub eigen: bool,
    pub cycles: bool,
    pub degree: bool,
    pub distance: bool,
    pub adamic_adar: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            k_eig: 8,
            hop_cap: 10,
            eigen: true,
            cycles: true,
            degree: true,
            distance: true,
            adamic_adar: true,
        }
    }
}

impl EncodingConfig {
    pub fn none() -> Self {
        EncodingConfig {
            k_eig: 0,
            hop_cap: 1,
            eigen: false,
            cycles: false,
            degree: false,
            distance: false,
            adamic_adar: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_cap == 0 {
            return Err(Error::arg("hop_cap must be at least 1"));
        }
        Ok(())
    }

    fn eig_count(&self) -> usize {
        if self.eigen {
            self.k_eig
        } else {
            0
        }
    }

    pub fn node_dim(&self) -> usize {
        self.eig_count() + usize::from(self.degree)
    }

    pub fn pair_dim(&self) -> usize {
        (if self.distance { self.hop_cap + 1 } else { 0 }) + usize::from(self.adamic_adar)
    }

    /// Graph row: time slot, eigenvalues, cycle counts, degree moments and
    /// the node/edge class frequencies.
    pub fn graph_dim(&self, a: usize, b: usize) -> usize {
        1 + self.eig_count()
            + if self.cycles { 3 } else { 0 }
            + if self.degree { 2 } else { 0 }
            + a
            + b
    }
}

/// Features of one graph plus a requested list of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFeatures {
    pub node_dim: usize,
    pub pair_dim: usize,
    /// `n x node_dim`, row-major
    pub node: Vec<f64>,
    /// `pairs.len() x pair_dim`, row-major, aligned with the requested pairs
    pub pair: Vec<f64>,
    /// Index 0 is the timestep slot, left at 0 here.
    pub graph: Vec<f64>,
}

/// Node and graph rows, which only depend on the graph itself.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoding {
    pub node_dim: usize,
    pub node: Vec<f64>,
    pub graph: Vec<f64>,
}

/// Eigen-decomposition of the symmetric normalized Laplacian.
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    /// ascending, clamped to [0, 2]
    pub values: Vec<f64>,
    /// column `k` (stored as `vectors[k]`) pairs with `values[k]`
    pub vectors: Vec<Vec<f64>>,
}

/// `L = I - D^{-1/2} A D^{-1/2}`; isolated nodes use `D^{-1/2} = 0`.
pub fn normalized_laplacian(g: &SparseGraph) -> DMatrix<f64> {
    let n = g.n();
    let deg = g.degrees();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
        .collect();
    let mut l = DMatrix::<f64>::identity(n, n);
    for &(i, j) in g.edges() {
        let v = -inv_sqrt[i] * inv_sqrt[j];
        l[(i, j)] = v;
        l[(j, i)] = v;
    }
    l
}

pub fn laplacian_spectrum(g: &SparseGraph) -> Result<LaplacianSpectrum> {
    let n = g.n();
    let l = normalized_laplacian(g);
    let eig =
        SymmetricEigen::try_new(l, 1e-14, EIGEN_MAX_ITER).ok_or(Error::EigenNonConvergence {
            n,
            iterations: EIGEN_MAX_ITER,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order
        .iter()
        .map(|&k| eig.eigenvalues[k].clamp(0.0, 2.0))
        .collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let pivot = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, &x)| {
                    if x.abs() > best.1 + 1e-12 {
                        (i, x.abs())
                    } else {
                        best
                    }
                })
                .0;
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(LaplacianSpectrum { values, vectors })
}

/// Simple cycles of length 3, 4 and 5 via closed-walk traces.
pub fn cycle_counts(g: &SparseGraph) -> [f64; 3] {
    let n = g.n();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in g.edges() {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    let a2 = &a * &a;
    let a3 = &a2 * &a;
    let deg: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
    let m = g.num_edges() as f64;

    let tr3 = a3.trace();
    let tr4 = a2.component_mul(&a2).sum();
    let tr5 = a2.component_mul(&a3).sum();

    let c3 = tr3 / 6.0;
    let sum_d2: f64 = deg.iter().map(|d| d * d).sum();
    let c4 = (tr4 - 2.0 * sum_d2 + 2.0 * m) / 8.0;
    // closed 5-walks: 10 per 5-cycle, 30 per triangle, and 10 per
    // (triangle at v, extra edge at v)
    let tails: f64 = (0..n).map(|v| a3[(v, v)] / 2.0 * (deg[v] - 2.0)).sum();
    let c5 = (tr5 - 30.0 * c3 - 10.0 * tails) / 10.0;
    [c3.round(), c4.round(), c5.round()]
}

/// Breadth-first distances from `src`, stopping past `cap` hops.
fn bfs_capped(adj: &[Vec<usize>], src: usize, cap: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[src] = 0;
    let mut frontier = vec![src];
    let mut depth = 0;
    while !frontier.is_empty() && depth < cap {
        depth += 1;
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = depth;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    dist
}

fn adamic_adar(adj: &[Vec<usize>], i: usize, j: usize) -> f64 {
    let (mut a, mut b) = (0, 0);
    let (ni, nj) = (&adj[i], &adj[j]);
    let mut s = 0.0;
    while a < ni.len() && b < nj.len() {
        match ni[a].cmp(&nj[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                let d = adj[ni[a]].len();
                if d >= 2 {
                    s += 1.0 / (d as f64).ln();
                }
                a += 1;
                b += 1;
            }
        }
    }
    s
}

pub fn encode_graph(
    g: &SparseGraph,
    a: usize,
    b: usize,
    cfg: &EncodingConfig,
) -> Result<GraphEncoding> {
    cfg.validate()?;
    let n = g.n();
    let node_dim = cfg.node_dim();
    let mut node = vec![0.0; n * node_dim];
    let mut graph = Vec::with_capacity(cfg.graph_dim(a, b));
    graph.push(0.0);

    if cfg.eigen && cfg.k_eig > 0 {
        let spec = laplacian_spectrum(g)?;
        let nonzero: Vec<usize> = (0..n)
            .filter(|&k| spec.values[k] > ZERO_EIGENVALUE)
            .take(cfg.k_eig)
            .collect();
        for slot in 0..cfg.k_eig {
            graph.push(nonzero.get(slot).map_or(0.0, |&k| spec.values[k]));
        }
        for (slot, &k) in nonzero.iter().enumerate() {
            for v in 0..n {
                node[v * node_dim + slot] = spec.vectors[k][v];
            }
        }
    }
    if cfg.cycles {
        let c = cycle_counts(g);
        graph.extend(c.iter().map(|x| x / n as f64));
    }
    if cfg.degree {
        let scale = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
        let deg: Vec<f64> = g.degrees().iter().map(|&d| d as f64 * scale).collect();
        for v in 0..n {
            node[v * node_dim + node_dim - 1] = deg[v];
        }
        let (mean, std) = crate::stats::mean_std(&deg);
        graph.push(mean);
        graph.push(std);
    }
    let mut node_freq = vec![0.0; a];
    for &x in g.node_labels() {
        node_freq[x] += 1.0 / n as f64;
    }
    graph.extend(node_freq);
    let pairs = num_pairs(n);
    let mut edge_freq = vec![0.0; b];
    if pairs == 0 {
        edge_freq[0] = 1.0;
    } else {
        edge_freq[0] = (pairs - g.num_edges()) as f64 / pairs as f64;
        for &y in g.edge_labels() {
            edge_freq[y] += 1.0 / pairs as f64;
        }
    }
    graph.extend(edge_freq);
    debug_assert_eq!(graph.len(), cfg.graph_dim(a, b));
    Ok(GraphEncoding {
        node_dim,
        node,
        graph,
    })
}

/// Distance one-hot and Adamic-Adar rows for the given condensed pairs.
pub fn encode_pairs(
    g: &SparseGraph,
    adj: &[Vec<usize>],
    pairs: &[usize],
    cfg: &EncodingConfig,
) -> Vec<f64> {
    let n = g.n();
    let dim = cfg.pair_dim();
    let mut out = vec![0.0; pairs.len() * dim];
    if dim == 0 {
        return out;
    }
    let mut bfs_cache: Vec<Option<Vec<usize>>> = vec![None; n];
    for (r, &idx) in pairs.iter().enumerate() {
        let (i, j) = pair_from_index_unchecked(idx, n);
        let row = &mut out[r * dim..(r + 1) * dim];
        let mut col = 0;
        if cfg.distance {
            let dist = bfs_cache[i].get_or_insert_with(|| bfs_capped(adj, i, cfg.hop_cap))[j];
            let bucket = if dist >= 1 && dist <= cfg.hop_cap {
                dist - 1
            } else {
                cfg.hop_cap
            };
            row[bucket] = 1.0;
            col = cfg.hop_cap + 1;
        }
        if cfg.adamic_adar {
            row[col] = adamic_adar(adj, i, j);
        }
    }
    out
}

pub fn compute_encodings(
    g: &SparseGraph,
    pairs: &[usize],
    a: usize,
    b: usize,
    cfg: &EncodingConfig,
) -> Result<EncodedFeatures> {
    let p = num_pairs(g.n());
    if let Some(&bad) = pairs.iter().find(|&&q| q >= p) {
        return Err(Error::arg(format!("pair index {bad} out of range")));
    }
    let enc = encode_graph(g, a, b, cfg)?;
    let adj = g.adjacency();
    let pair = encode_pairs(g, &adj, pairs, cfg);
    Ok(EncodedFeatures {
        node_dim: enc.node_dim,
        pair_dim: cfg.pair_dim(),
        node: enc.node,
        pair,
        graph: enc.graph,
    })
}
