//! Marginal-transition discrete diffusion.
//!
//! Each step mixes a label with a draw from the data marginal:
//! `Q^t = α^t I + (1 - α^t) 1 p'`. Products of such matrices keep the same
//! form, so the cumulative kernel from the clean graph to step `t` is
//! `ᾱ^t I + (1 - ᾱ^t) 1 p'`.
//!
//! Forward corruption never materializes the `n x n` adjacency. Existing
//! edges are resampled individually, the number of vacant pairs that turn
//! into edges is binomial, and their positions come from
//! [`sample_vacant_pairs`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{num_pairs, pair_from_index_unchecked, GraphSpec, SparseGraph};
use crate::random::{sample_binomial, sample_categorical};

const COSINE_OFFSET: f64 = 0.008;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Cosine,
    Linear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(Error::arg(format!("unknown schedule kind {other:?}"))),
        }
    }
}

/// Per-step keep probabilities `α^t` and their running products `ᾱ^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    steps: usize,
    /// `alpha[t - 1] = α^t`
    alpha: Vec<f64>,
    /// `alpha_bar[t] = ᾱ^t`, with `alpha_bar[0] = 1`
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_alphas(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::arg("schedule needs at least one step"));
        }
        if let Some(a) = alpha.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::arg(format!("alpha {a} outside (0, 1]")));
        }
        let mut alpha_bar = Vec::with_capacity(alpha.len() + 1);
        alpha_bar.push(1.0);
        for &a in &alpha {
            alpha_bar.push(alpha_bar.last().unwrap() * a);
        }
        Ok(NoiseSchedule {
            steps: alpha.len(),
            alpha,
            alpha_bar,
        })
    }

    /// A schedule that never corrupts anything.
    pub fn frozen(steps: usize) -> Result<Self> {
        NoiseSchedule::from_alphas(vec![1.0; steps])
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn beta(&self, t: usize) -> f64 {
        1.0 - self.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// `α^{t-k+1} ⋯ α^t`, the keep probability of a `k`-step jump ending at `t`.
    pub fn alpha_span(&self, t: usize, k: usize) -> f64 {
        self.alpha[t - k..t].iter().product()
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps {
            return Err(Error::arg(format!(
                "timestep {t} outside [1, {}]",
                self.steps
            )));
        }
        Ok(())
    }
}

pub fn build_schedule(steps: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::arg("schedule needs at least one step"));
    }
    let t_max = steps as f64;
    let alpha_bar: Vec<f64> = match kind {
        ScheduleKind::Cosine => {
            let f = |t: f64| {
                let x = (t / t_max + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)
                    * std::f64::consts::FRAC_PI_2;
                x.cos().powi(2)
            };
            let f0 = f(0.0);
            (0..=steps).map(|t| f(t as f64) / f0).collect()
        }
        ScheduleKind::Linear => {
            // β from 1e-4 to 2e-2 rescaled so the chain still ends near pure noise.
            let scale = 1000.0 / t_max;
            let (lo, hi) = (1e-4 * scale, 2e-2 * scale);
            let mut ab = vec![1.0];
            for t in 0..steps {
                let frac = if steps == 1 {
                    1.0
                } else {
                    t as f64 / (t_max - 1.0)
                };
                let beta = (lo + frac * (hi - lo)).min(0.999);
                ab.push(ab.last().unwrap() * (1.0 - beta));
            }
            ab
        }
    };
    let alpha = (1..=steps)
        .map(|t| (alpha_bar[t] / alpha_bar[t - 1]).clamp(f64::MIN_POSITIVE, 1.0))
        .collect();
    NoiseSchedule::from_alphas(alpha)
}

/// Square row-stochastic matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        TransitionMatrix { size, data }
    }

    /// `keep · I + (1 - keep) · 1 p'`
    pub fn marginal(keep: f64, p: &[f64]) -> Self {
        let size = p.len();
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                data[i * size + j] = (1.0 - keep) * p[j] + if i == j { keep } else { 0.0 };
            }
        }
        TransitionMatrix { size, data }
    }

    pub fn from_rows(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::arg("matrix data does not match its size"));
        }
        Ok(TransitionMatrix { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn matmul(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let s = self.size;
        let mut data = vec![0.0; s * s];
        for i in 0..s {
            for k in 0..s {
                let a = self.get(i, k);
                for j in 0..s {
                    data[i * s + j] += a * other.get(k, j);
                }
            }
        }
        TransitionMatrix { size: s, data }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.size)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Single-step `Q^t` or cumulative `Q̄^t` for marginal `p`.
pub fn transition_matrix(
    schedule: &NoiseSchedule,
    t: usize,
    p: &[f64],
    cumulative: bool,
) -> Result<TransitionMatrix> {
    schedule.check_step(t)?;
    let keep = if cumulative {
        schedule.alpha_bar(t)
    } else {
        schedule.alpha(t)
    };
    Ok(TransitionMatrix::marginal(keep, p))
}

/// Draws `count` distinct pairs uniformly among the slots missing from
/// `occupied` (sorted, unique condensed indices) without building the
/// complement.
///
/// Ranks are drawn without replacement from `[0, vacant)`; the rank `r`
/// maps to slot `r + #{k : occupied[k] - k <= r}`.
pub fn sample_vacant_pairs<R: Rng + ?Sized>(
    n: usize,
    occupied: &[usize],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let total = num_pairs(n);
    if occupied.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("occupied indices must be sorted and unique"));
    }
    if occupied.last().is_some_and(|&o| o >= total) {
        return Err(Error::arg("occupied index out of range"));
    }
    let vacant = total - occupied.len();
    if count > vacant {
        return Err(Error::arg(format!(
            "requested {count} vacant pairs but only {vacant} exist"
        )));
    }
    let mut ranks = rand::seq::index::sample(rng, vacant, count).into_vec();
    ranks.sort_unstable();
    Ok(shift_ranks(occupied, &ranks))
}

/// Maps sorted vacancy ranks to condensed slot indices.
pub fn shift_ranks(occupied: &[usize], ranks: &[usize]) -> Vec<usize> {
    // occupied[k] - k counts vacant slots below occupied[k]; it is nondecreasing
    ranks
        .iter()
        .map(|&r| {
            let (mut lo, mut hi) = (0usize, occupied.len());
            while lo < hi {
                let mid = (lo + hi) / 2;
                if occupied[mid] - mid <= r {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            r + lo
        })
        .collect()
}

fn renormalized_tail(row: &[f64]) -> Vec<f64> {
    let tail = &row[1..];
    let s: f64 = tail.iter().sum();
    tail.iter().map(|v| v / s).collect()
}

/// Corrupts `g` with arbitrary node/edge kernels using the sparse three-step
/// procedure.
pub fn corrupt<R: Rng + ?Sized>(
    g: &SparseGraph,
    node_kernel: &TransitionMatrix,
    edge_kernel: &TransitionMatrix,
    rng: &mut R,
) -> Result<SparseGraph> {
    let n = g.n();
    let node_labels: Vec<usize> = g
        .node_labels()
        .iter()
        .map(|&x| sample_categorical(node_kernel.row(x), rng))
        .collect();

    let occupied = g.edge_indices();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(occupied.len());
    for (&idx, &y) in occupied.iter().zip(g.edge_labels()) {
        let y_new = sample_categorical(edge_kernel.row(y), rng);
        if y_new != 0 {
            out.push((idx, y_new));
        }
    }

    let spawn = 1.0 - edge_kernel.get(0, 0);
    let vacant = (num_pairs(n) - occupied.len()) as u64;
    let new_count = sample_binomial(vacant, spawn, rng)? as usize;
    if new_count > 0 {
        let label_probs = renormalized_tail(edge_kernel.row(0));
        let positions = sample_vacant_pairs(n, &occupied, new_count, rng)?;
        for idx in positions {
            out.push((idx, 1 + sample_categorical(&label_probs, rng)));
        }
    }
    out.sort_unstable_by_key(|e| e.0);

    let edges = out
        .iter()
        .map(|&(idx, _)| pair_from_index_unchecked(idx, n))
        .collect();
    let labels = out.iter().map(|&(_, y)| y).collect();
    Ok(SparseGraph::from_parts_unchecked(
        n,
        node_labels,
        edges,
        labels,
    ))
}

/// Samples `G^t ~ q(G^t | G)` directly from the clean graph.
pub fn apply_noise<R: Rng + ?Sized>(
    g: &SparseGraph,
    t: usize,
    schedule: &NoiseSchedule,
    spec: &GraphSpec,
    rng: &mut R,
) -> Result<SparseGraph> {
    let qx = transition_matrix(schedule, t, &spec.node_marginals, true)?;
    let qy = transition_matrix(schedule, t, &spec.edge_marginals, true)?;
    corrupt(g, &qx, &qy, rng)
}

/// One forward step `G^{t-1} -> G^t` using the single-step kernels.
pub fn apply_noise_step<R: Rng + ?Sized>(
    g_prev: &SparseGraph,
    t: usize,
    schedule: &NoiseSchedule,
    spec: &GraphSpec,
    rng: &mut R,
) -> Result<SparseGraph> {
    let qx = transition_matrix(schedule, t, &spec.node_marginals, false)?;
    let qy = transition_matrix(schedule, t, &spec.edge_marginals, false)?;
    corrupt(g_prev, &qx, &qy, rng)
}

/// Precomputed reverse kernel `q(z^{t-k} = j | z^t = i, z^0 = x0)` for one
/// `(t, k)` and one marginal.
#[derive(Debug, Clone)]
pub struct PosteriorKernel {
    classes: usize,
    /// `[i][x0][j]`, `None` when `Q̄^t[x0, i] = 0`.
    table: Vec<Option<Vec<f64>>>,
}

impl PosteriorKernel {
    pub fn new(schedule: &NoiseSchedule, t: usize, k: usize, marginals: &[f64]) -> Result<Self> {
        schedule.check_step(t)?;
        if k == 0 || k > t {
            return Err(Error::arg(format!("stride {k} outside [1, {t}]")));
        }
        let c = marginals.len();
        let step = TransitionMatrix::marginal(schedule.alpha_span(t, k), marginals);
        let before = TransitionMatrix::marginal(schedule.alpha_bar(t - k), marginals);
        let now = TransitionMatrix::marginal(schedule.alpha_bar(t), marginals);
        let mut table = Vec::with_capacity(c * c);
        for i in 0..c {
            for x0 in 0..c {
                let denom = now.get(x0, i);
                if denom <= 0.0 {
                    table.push(None);
                    continue;
                }
                let mut row: Vec<f64> = (0..c)
                    .map(|j| step.get(j, i) * before.get(x0, j) / denom)
                    .collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                table.push(Some(row));
            }
        }
        Ok(PosteriorKernel { classes: c, table })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Whether a clean class `x0` can produce the noisy class `z_t` at all.
    pub fn compatible(&self, z_t: usize, x0: usize) -> bool {
        self.table[z_t * self.classes + x0].is_some()
    }

    /// `Σ_x0 p(x0) q(· | z_t, x0)`.
    pub fn posterior(&self, z_t: usize, p_x0: &[f64]) -> Result<Vec<f64>> {
        let c = self.classes;
        if z_t >= c || p_x0.len() != c {
            return Err(Error::arg("posterior input has the wrong class count"));
        }
        let mut out = vec![0.0; c];
        for (x0, &w) in p_x0.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = self.table[z_t * c + x0].as_ref().ok_or_else(|| {
                Error::numerical(format!(
                    "clean class {x0} has probability {w} but cannot reach noisy class {z_t}"
                ))
            })?;
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
        let s: f64 = out.iter().sum();
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::numerical(format!(
                "posterior mass {s} for noisy class {z_t}"
            )));
        }
        out.iter_mut().for_each(|v| *v /= s);
        Ok(out)
    }

    /// Posterior after dropping clean classes that cannot produce `z_t`.
    pub fn posterior_masked(&self, z_t: usize, p_x0: &[f64]) -> Result<Vec<f64>> {
        let masked: Vec<f64> = p_x0
            .iter()
            .enumerate()
            .map(|(x0, &w)| if self.compatible(z_t, x0) { w } else { 0.0 })
            .collect();
        if masked.iter().sum::<f64>() <= 0.0 {
            return Err(Error::numerical(format!(
                "predicted clean distribution has no mass compatible with noisy class {z_t}"
            )));
        }
        self.posterior(z_t, &masked)
    }
}

/// `q(z^{t-k} | z^t, x0)` marginalized over a predicted clean distribution.
pub fn posterior_distribution(
    z_t: usize,
    p_x0: &[f64],
    t: usize,
    k: usize,
    schedule: &NoiseSchedule,
    marginals: &[f64],
) -> Result<Vec<f64>> {
    PosteriorKernel::new(schedule, t, k, marginals)?.posterior(z_t, p_x0)
}

/// Draws `G^T` from the limit distribution: every node and every pair i.i.d.
/// from the marginals, realized sparsely.
pub fn prior_sample<R: Rng + ?Sized>(
    n: usize,
    spec: &GraphSpec,
    rng: &mut R,
) -> Result<SparseGraph> {
    if n == 0 {
        return Err(Error::arg("prior graph needs at least one node"));
    }
    let node_labels = (0..n)
        .map(|_| sample_categorical(&spec.node_marginals, rng))
        .collect();
    let density = 1.0 - spec.edge_marginals[0];
    let count = sample_binomial(num_pairs(n) as u64, density, rng)? as usize;
    let positions = sample_vacant_pairs(n, &[], count, rng)?;
    let label_probs = if count > 0 {
        renormalized_tail(&spec.edge_marginals)
    } else {
        Vec::new()
    };
    let labels = positions
        .iter()
        .map(|_| 1 + sample_categorical(&label_probs, rng))
        .collect();
    let edges = positions
        .iter()
        .map(|&idx| pair_from_index_unchecked(idx, n))
        .collect();
    Ok(SparseGraph::from_parts_unchecked(
        n,
        node_labels,
        edges,
        labels,
    ))
}

/// Inputs of the sparsity tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaBoundQuery {
    pub n: usize,
    /// clean edge ratio
    pub r: f64,
    /// threshold ratio
    pub k: f64,
}

/// Upper bound on `log P[r_t >= k]` for the noisy edge ratio:
/// `-(n(n-1)/2) (k log(k/r) + (1-r) log((1-k)/(1-r)))`.
pub fn lemma_bound(q: LemmaBoundQuery) -> Result<f64> {
    let LemmaBoundQuery { n, r, k } = q;
    if !(r > 0.0 && r < 0.25) {
        return Err(Error::arg(format!("edge ratio r={r} outside (0, 1/4)")));
    }
    if !(k > r && k < 1.0) {
        return Err(Error::arg(format!(
            "threshold k={k} outside (r, 1) with r={r}"
        )));
    }
    let pairs = num_pairs(n) as f64;
    Ok(-pairs * (k * (k / r).ln() + (1.0 - r) * ((1.0 - k) / (1.0 - r)).ln()))
}

/// Fraction of `trials` in which `Binomial(n(n-1)/2, r) / (n(n-1)/2) >= k`.
pub fn lemma_monte_carlo<R: Rng + ?Sized>(
    n: usize,
    r: f64,
    k: f64,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    let seeds = crate::random::split_seeds(rng, CHUNKS.min(trials));
    let per = trials / seeds.len();
    let extra = trials % seeds.len();
    let hits: Vec<Result<usize>> = crate::par::map_indexed(seeds.len(), |c| {
        let mut local = crate::random::seeded(seeds[c]);
        let reps = per + usize::from(c < extra);
        let mut h = 0;
        for _ in 0..reps {
            if lemma_trial(n, r, k, &mut local)? {
                h += 1;
            }
        }
        Ok(h)
    });
    let mut total = 0;
    for h in hits {
        total += h?;
    }
    Ok(total as f64 / trials as f64)
}

const CHUNKS: usize = 64;

fn lemma_trial<R: Rng + ?Sized>(n: usize, r: f64, k: f64, rng: &mut R) -> Result<bool> {
    let pairs = num_pairs(n) as u64;
    let m = sample_binomial(pairs, r, rng)?;
    Ok(m as f64 >= k * pairs as f64)
}
