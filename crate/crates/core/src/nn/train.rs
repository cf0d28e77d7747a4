use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{permute_nodes, GraphSpec, SparseGraph};
use crate::noise::{apply_noise, NoiseSchedule};
use crate::query::sample_queries;
use crate::random::{seeded, split_seeds};

use super::{
    gradients, init_network, prepare_input, AdamW, DenoiserInput, NetworkConfig, NetworkWeights,
    OptimizerConfig,
};

/// Forward process shared by training and sampling.
#[derive(Debug, Clone)]
pub struct DiffusionSetup {
    pub schedule: NoiseSchedule,
    pub spec: GraphSpec,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: NetworkConfig,
    pub weights: NetworkWeights,
    pub optimizer: AdamW,
}

impl TrainState {
    pub fn new<R: Rng + ?Sized>(
        config: NetworkConfig,
        opt: OptimizerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = init_network(&config, rng)?;
        let optimizer = AdamW::new(opt, &weights)?;
        Ok(TrainState {
            config,
            weights,
            optimizer,
        })
    }

    pub fn from_weights(
        config: NetworkConfig,
        weights: NetworkWeights,
        opt: OptimizerConfig,
    ) -> Result<Self> {
        config.validate()?;
        weights.check_against(&config)?;
        let optimizer = AdamW::new(opt, &weights)?;
        Ok(TrainState {
            config,
            weights,
            optimizer,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub loss: f64,
    pub node_loss: f64,
    pub edge_loss: f64,
    pub grad_norm: f64,
}

/// Noisy input and clean target for one training graph.
pub(crate) fn training_example(
    g: &SparseGraph,
    setup: &DiffusionSetup,
    cfg: &NetworkConfig,
    lambda: f64,
    augment: bool,
    seed: u64,
) -> Result<(DenoiserInput, SparseGraph)> {
    let mut rng = seeded(seed);
    let clean = if augment {
        let mut perm: Vec<usize> = (0..g.n()).collect();
        perm.shuffle(&mut rng);
        permute_nodes(g, &perm)?
    } else {
        g.clone()
    };
    let steps = setup.schedule.steps();
    let t = rng.random_range(1..=steps);
    let noisy = apply_noise(&clean, t, &setup.schedule, &setup.spec, &mut rng)?;
    let queries = sample_queries(clean.n(), lambda, &mut rng)?;
    let input = prepare_input(&noisy, &queries, t as f64 / steps as f64, cfg)?;
    Ok((input, clean))
}

/// One optimizer step on the mean loss of `batch`.
///
/// Each graph draws its own seed from `rng`, so results do not depend on the
/// worker count.
pub fn train_step<R: RngCore + ?Sized>(
    state: &mut TrainState,
    setup: &DiffusionSetup,
    batch: &[SparseGraph],
    lambda: f64,
    augment: bool,
    rng: &mut R,
) -> Result<StepReport> {
    if batch.is_empty() {
        return Err(Error::arg("empty training batch"));
    }
    for g in batch {
        g.validate_labels(&setup.spec)?;
    }
    let seeds = split_seeds(rng, batch.len());
    let cfg = &state.config;
    let examples: Vec<Result<(DenoiserInput, SparseGraph)>> =
        crate::par::map_indexed(batch.len(), |k| {
            training_example(&batch[k], setup, cfg, lambda, augment, seeds[k])
        });
    let (inputs, targets): (Vec<_>, Vec<_>) = examples
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let (l, grads) = gradients(&state.weights, cfg, &inputs, &targets)?;
    let grad_norm = grads
        .iter()
        .flat_map(|m| m.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    state.optimizer.update(&mut state.weights, &grads)?;
    Ok(StepReport {
        step: state.optimizer.step,
        loss: l.total,
        node_loss: l.node,
        edge_loss: l.edge,
        grad_norm,
    })
}

/// Epoch loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    /// random node relabelling of every training graph
    pub augment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub steps: u64,
    pub mean_loss: f64,
    pub node_loss: f64,
    pub edge_loss: f64,
    pub wall_seconds: f64,
}

/// Shuffled minibatch epochs over `graphs`. `on_epoch` runs after every
/// epoch and may abort training by returning an error.
pub fn train_epochs<R: RngCore + ?Sized>(
    state: &mut TrainState,
    setup: &DiffusionSetup,
    graphs: &[SparseGraph],
    cfg: &EpochConfig,
    rng: &mut R,
    mut on_epoch: impl FnMut(&EpochReport, &TrainState) -> Result<()>,
) -> Result<Vec<EpochReport>> {
    if graphs.is_empty() {
        return Err(Error::arg("no training graphs"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::arg("batch size must be positive"));
    }
    crate::query::check_lambda(cfg.lambda)?;
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut reports = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(rng);
        let (mut total, mut node, mut edge, mut steps) = (0.0, 0.0, 0.0, 0u64);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<SparseGraph> = chunk.iter().map(|&i| graphs[i].clone()).collect();
            let r = train_step(state, setup, &batch, cfg.lambda, cfg.augment, rng)?;
            total += r.loss;
            node += r.node_loss;
            edge += r.edge_loss;
            steps += 1;
        }
        let k = steps as f64;
        let report = EpochReport {
            epoch,
            steps: state.optimizer.step,
            mean_loss: total / k,
            node_loss: node / k,
            edge_loss: edge / k,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&report, state)?;
        reports.push(report);
    }
    Ok(reports)
}
