//! Reverse diffusion over random chunks of node pairs.
//!
//! Each step draws a fresh random partition of all pairs into `⌈1/λ⌉`
//! equal-sized chunks. Every chunk is scored against the same frozen `G^t`;
//! the sampled labels accumulate into `G^{t-k}`. Only the noisy edges and one
//! chunk of query pairs are ever live at once.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::encode_graph;
use crate::error::{Error, Result};
use crate::graph::{num_pairs, pair_from_index_unchecked, SparseGraph};
use crate::nn::{
    forward, forward_link_pred, prepare_input_cached, DiffusionSetup, Mode, NetworkConfig,
    NetworkWeights,
};
use crate::noise::{prior_sample, PosteriorKernel};
use crate::random::{sample_categorical, seeded, split_seeds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// reverse steps `S`; `0` means one per diffusion step
    pub inference_steps: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            inference_steps: 0,
            lambda: 0.5,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, diffusion_steps: usize) -> Result<()> {
        crate::query::check_lambda(self.lambda)?;
        if self.inference_steps > diffusion_steps {
            return Err(Error::arg(format!(
                "inference steps {} exceed diffusion steps {diffusion_steps}",
                self.inference_steps
            )));
        }
        Ok(())
    }

    /// `S`, resolving `0` to `T`.
    pub fn resolved_steps(&self, diffusion_steps: usize) -> usize {
        if self.inference_steps == 0 {
            diffusion_steps
        } else {
            self.inference_steps
        }
    }
}

/// A random cover of all pairs by equal-sized chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPlan {
    pub pairs: usize,
    pub chunk_size: usize,
    pub chunks: Vec<Vec<usize>>,
    /// Leading entries of the last chunk already covered by the one before.
    pub overlap: usize,
}

/// `⌈1/λ⌉` with a guard against `1/λ` landing a hair above an integer.
pub fn chunk_count(lambda: f64) -> usize {
    ((1.0 / lambda) - 1e-9).ceil().max(1.0) as usize
}

/// Shuffles all pairs and cuts them into chunks of `⌈P/K⌉`; the last chunk
/// is the final `⌈P/K⌉` shuffled pairs, overlapping its predecessor when `K`
/// does not divide `P`.
///
/// When fewer than `K` chunks of that size already cover every pair, only
/// those are kept.
pub fn plan_chunks<R: Rng + ?Sized>(n: usize, lambda: f64, rng: &mut R) -> Result<ChunkPlan> {
    crate::query::check_lambda(lambda)?;
    let pairs = num_pairs(n);
    if pairs == 0 {
        return Ok(ChunkPlan {
            pairs,
            chunk_size: 0,
            chunks: Vec::new(),
            overlap: 0,
        });
    }
    let k = chunk_count(lambda);
    let size = pairs.div_ceil(k);
    let count = pairs.div_ceil(size);
    let mut order: Vec<usize> = (0..pairs).collect();
    order.shuffle(rng);
    let mut chunks = Vec::with_capacity(count);
    for c in 0..count {
        let start = (c * size).min(pairs - size);
        chunks.push(order[start..start + size].to_vec());
    }
    let overlap = count * size - pairs;
    Ok(ChunkPlan {
        pairs,
        chunk_size: size,
        chunks,
        overlap,
    })
}

/// Counters for one reverse step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub t: usize,
    pub k: usize,
    pub noisy_edges: usize,
    pub chunk_size: usize,
    pub forward_calls: usize,
    /// query rows scored by the network
    pub predictions: usize,
    /// pairs whose label was sampled
    pub decisions: usize,
    /// largest message-graph edge count over the step's chunks
    pub peak_live_edge_rows: usize,
}

/// The trained network plus the forward process it was trained on.
#[derive(Debug, Clone, Copy)]
pub struct Denoiser<'a> {
    pub weights: &'a NetworkWeights,
    pub config: &'a NetworkConfig,
    pub setup: &'a DiffusionSetup,
}

impl Denoiser<'_> {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.weights.check_against(self.config)?;
        let spec = &self.setup.spec;
        if spec.a != self.config.a || spec.b != self.config.b {
            return Err(Error::arg(format!(
                "network predicts {}/{} classes, graph spec has {}/{}",
                self.config.a, self.config.b, spec.a, spec.b
            )));
        }
        Ok(())
    }
}

/// Samples `G^{t-k}` given `G^t`.
pub fn denoise_step<R: Rng + ?Sized>(
    model: Denoiser<'_>,
    g_t: &SparseGraph,
    t: usize,
    k: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<(SparseGraph, StepStats)> {
    let (cfg, setup) = (model.config, model.setup);
    let node_kernel = PosteriorKernel::new(&setup.schedule, t, k, &setup.spec.node_marginals)?;
    let edge_kernel = PosteriorKernel::new(&setup.schedule, t, k, &setup.spec.edge_marginals)?;
    let n = g_t.n();
    let plan = plan_chunks(n, lambda, rng)?;
    let genc = encode_graph(g_t, cfg.a, cfg.b, &cfg.encoding)?;
    let adjacency = g_t.adjacency();
    let t_norm = t as f64 / setup.schedule.steps() as f64;

    let mut stats = StepStats {
        t,
        k,
        noisy_edges: g_t.num_edges(),
        chunk_size: plan.chunk_size,
        ..StepStats::default()
    };
    let mut node_labels = Vec::new();
    let mut new_edges: Vec<(usize, usize)> = Vec::new();
    let empty = [Vec::new()];
    let chunks: &[Vec<usize>] = if plan.chunks.is_empty() {
        &empty
    } else {
        &plan.chunks
    };
    let last = chunks.len() - 1;
    for (c, chunk) in chunks.iter().enumerate() {
        let input = prepare_input_cached(g_t, &adjacency, &genc, chunk, t_norm, cfg)?;
        stats.peak_live_edge_rows = stats.peak_live_edge_rows.max(input.mg.num_edges());
        let pred = match cfg.mode {
            Mode::Transformer => forward(model.weights, cfg, &input),
            Mode::LinkPred => forward_link_pred(model.weights, cfg, &input),
        }
        .map_err(|e| Error::numerical(format!("step t={t}, chunk {c}: {e}")))?;
        if !pred.node.all_finite() || !pred.edge.all_finite() {
            return Err(Error::numerical(format!(
                "non-finite prediction at step t={t}, chunk {c}"
            )));
        }
        stats.forward_calls += 1;
        stats.predictions += chunk.len();
        if c == 0 {
            node_labels = g_t
                .node_labels()
                .iter()
                .enumerate()
                .map(|(v, &z)| {
                    Ok(sample_categorical(
                        &node_kernel.posterior_masked(z, pred.node.row(v))?,
                        rng,
                    ))
                })
                .collect::<Result<_>>()?;
        }
        let skip = if c == last && c > 0 { plan.overlap } else { 0 };
        for (r, &idx) in chunk.iter().enumerate().skip(skip) {
            let (i, j) = pair_from_index_unchecked(idx, n);
            let z = g_t.edge_label(i, j);
            let dist = edge_kernel
                .posterior_masked(z, pred.edge.row(r))
                .map_err(|e| {
                    Error::numerical(format!("step t={t}, chunk {c}, pair ({i},{j}): {e}"))
                })?;
            let y = sample_categorical(&dist, rng);
            stats.decisions += 1;
            if y != 0 {
                new_edges.push((idx, y));
            }
        }
    }
    new_edges.sort_unstable_by_key(|e| e.0);
    let (idx, labels): (Vec<usize>, Vec<usize>) = new_edges.into_iter().unzip();
    let g = SparseGraph::from_condensed(n, node_labels, &idx, labels)?;
    Ok((g, stats))
}

/// Timesteps `round(T·i/S)` for `i = S, S-1, …, 0`.
pub fn stride_ladder(diffusion_steps: usize, inference_steps: usize) -> Result<Vec<usize>> {
    if inference_steps == 0 || inference_steps > diffusion_steps {
        return Err(Error::arg(format!(
            "need 1 <= S={inference_steps} <= T={diffusion_steps}"
        )));
    }
    let (t, s) = (diffusion_steps as f64, inference_steps as f64);
    Ok((0..=inference_steps)
        .rev()
        .map(|i| (t * i as f64 / s).round() as usize)
        .collect())
}

/// Where the node count of each generated graph comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeCountSource {
    Fixed(usize),
    /// `counts[n]` training graphs had `n` nodes
    Empirical(Vec<usize>),
}

impl NodeCountSource {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        match self {
            NodeCountSource::Fixed(n) if *n >= 1 => Ok(*n),
            NodeCountSource::Fixed(_) => Err(Error::arg("node count must be at least 1")),
            NodeCountSource::Empirical(counts) => {
                if counts.iter().skip(1).all(|&c| c == 0) {
                    return Err(Error::arg("empirical node-count distribution is empty"));
                }
                let mut w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
                w[0] = 0.0;
                Ok(sample_categorical(&w, rng))
            }
        }
    }
}

/// Runs the full reverse chain for one graph, reporting every step.
pub fn sample_one<R: Rng + ?Sized>(
    model: Denoiser<'_>,
    n: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
    mut on_step: impl FnMut(&StepStats),
) -> Result<SparseGraph> {
    let steps = model.setup.schedule.steps();
    let ladder = stride_ladder(steps, cfg.resolved_steps(steps))?;
    let mut g = prior_sample(n, &model.setup.spec, rng)?;
    for w in ladder.windows(2) {
        let (next, stats) = denoise_step(model, &g, w[0], w[0] - w[1], cfg.lambda, rng)?;
        on_step(&stats);
        g = next;
    }
    Ok(g)
}

/// Generates `count` graphs; graph `i` uses its own seed split from
/// `cfg.seed`, so output does not depend on the worker count.
pub fn generate(
    model: Denoiser<'_>,
    nodes: &NodeCountSource,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<SparseGraph>> {
    model.validate()?;
    cfg.validate(model.setup.schedule.steps())?;
    let seeds = split_seeds(&mut seeded(cfg.seed), count);
    crate::par::map_indexed(count, |i| {
        let mut rng = seeded(seeds[i]);
        let n = nodes.draw(&mut rng)?;
        sample_one(model, n, cfg, &mut rng, |_| {})
    })
    .into_iter()
    .collect()
}
