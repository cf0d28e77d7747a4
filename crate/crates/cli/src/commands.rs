//! Subcommand bodies. Each one echoes the effective configuration into the
//! output directory and stamps every file it writes with the config hash and
//! seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use graphdiff_core::datasets::{
    self, dataset_stats, gen_er, gen_sbm, Dataset, DatasetHeader, DatasetProfile, DatasetStats,
};
use graphdiff_core::metrics::{evaluate_repeated, EvalReport};
use graphdiff_core::nn::{
    load_checkpoint, read_checkpoint, save_checkpoint, train_epochs, Checkpoint, DiffusionSetup,
    EpochConfig, TrainState,
};
use graphdiff_core::noise::build_schedule;
use graphdiff_core::par::with_workers;
use graphdiff_core::random::seeded;
use graphdiff_core::sampler::{generate, Denoiser, NodeCountSource, SamplerConfig};
use graphdiff_core::verify::{self, VerifyKind, VerifyReport};
use graphdiff_core::GraphSpec;
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, echo, DiffusionConfig, RunConfig};
use crate::ValidationError;

/// Run metadata stored in checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    config_hash: String,
    seed: u64,
    epoch: usize,
    steps: u64,
    diffusion: DiffusionConfig,
    node_marginals: Vec<f64>,
    edge_marginals: Vec<f64>,
    /// `node_counts[n]` training graphs had `n` nodes
    node_counts: Vec<usize>,
}

/// Wrapper for JSON outputs.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: T,
}

fn prepare_out(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    echo(cfg, &cfg.out)?;
    Ok(cfg.out.clone())
}

fn write_json<T: Serialize>(path: &Path, cfg: &RunConfig, body: T) -> anyhow::Result<()> {
    let hash = config_hash(cfg);
    let stamped = Stamped {
        config_hash: &hash,
        seed: cfg.seed,
        body,
    };
    let text = serde_json::to_string_pretty(&stamped)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn stamped_header(cfg: &RunConfig, a: usize, b: usize) -> DatasetHeader {
    DatasetHeader {
        seed: Some(cfg.seed),
        config_hash: Some(config_hash(cfg)),
        ..DatasetHeader::new(a, b)
    }
}

fn load_dataset(path: &Path, what: &str) -> anyhow::Result<Dataset> {
    datasets::load(path).with_context(|| format!("loading {what} {}", path.display()))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| ValidationError(anyhow!("missing {what}")).into())
}

fn print_stats(s: &DatasetStats) {
    println!("graphs            {}", s.graphs);
    println!("nodes             {}..={}", s.node_range.0, s.node_range.1);
    println!("edges             {}..={}", s.edge_range.0, s.edge_range.1);
    println!(
        "edge ratio        {:.4}..={:.4}",
        s.edge_ratio_range.0, s.edge_ratio_range.1
    );
    println!("edge marginals    {:?}", s.edge_marginals);
}

pub fn generate_data(cfg: &RunConfig) -> anyhow::Result<()> {
    let d = &cfg.data;
    if !d.profile.synthetic() {
        return Err(ValidationError(anyhow!(
            "profile {:?} has no generator; convert the graphs to the dataset format and pass the file to train",
            d.profile
        ))
        .into());
    }
    let out = prepare_out(cfg)?;
    let graphs = with_workers(cfg.workers, || {
        let mut rng = seeded(cfg.seed);
        match d.profile {
            DatasetProfile::Er => gen_er(d.count, d.n_min, d.n_max, d.er_p, &mut rng),
            _ => gen_sbm(d.count, &d.sbm, &mut rng),
        }
    })?;
    let stats = dataset_stats(&graphs, 1, 2)?;
    let path = out.join("dataset.jsonl");
    datasets::save(&path, &Dataset::new(stamped_header(cfg, 1, 2), graphs))
        .with_context(|| format!("writing {}", path.display()))?;
    write_json(&out.join("dataset_stats.json"), cfg, &stats)?;
    println!("wrote {}", path.display());
    print_stats(&stats);
    Ok(())
}

fn checkpoint_for(
    cfg: &RunConfig,
    state: &TrainState,
    stats: &DatasetStats,
    epoch: usize,
) -> Checkpoint {
    let meta = CheckpointMeta {
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        epoch,
        steps: state.optimizer.step,
        diffusion: cfg.diffusion.clone(),
        node_marginals: stats.node_marginals.clone(),
        edge_marginals: stats.edge_marginals.clone(),
        node_counts: stats.node_counts.clone(),
    };
    Checkpoint {
        config: state.config.clone(),
        meta: serde_json::to_value(meta).expect("metadata serializes"),
        weights: state.weights.clone(),
    }
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<()> {
    let data_path = required(&cfg.data.path, "dataset path (data.path or --data)")?;
    let ds = load_dataset(data_path, "dataset")?;
    if (ds.header.a, ds.header.b) != (cfg.model.a, cfg.model.b) {
        return Err(ValidationError(anyhow!(
            "dataset has {}/{} node/edge classes but model.a/model.b are {}/{}",
            ds.header.a,
            ds.header.b,
            cfg.model.a,
            cfg.model.b
        ))
        .into());
    }
    let out = prepare_out(cfg)?;
    let stats = dataset_stats(&ds.graphs, ds.header.a, ds.header.b)?;
    let setup = DiffusionSetup {
        schedule: build_schedule(cfg.diffusion.steps, cfg.diffusion.schedule)?,
        spec: stats.spec()?,
    };
    let ckpt_dir = out.join("checkpoints");
    if cfg.train.checkpoint_every > 0 {
        fs::create_dir_all(&ckpt_dir)?;
    }
    let log_path = out.join("loss_log.jsonl");
    let mut log = BufWriter::new(
        File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
    );
    writeln!(
        log,
        "{}",
        serde_json::json!({ "format": "graphdiff-loss-log", "config_hash": config_hash(cfg), "seed": cfg.seed })
    )?;

    let epoch_cfg = EpochConfig {
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        lambda: cfg.model.lambda,
        augment: cfg.train.augment,
    };
    let state = with_workers(cfg.workers, || -> anyhow::Result<TrainState> {
        let mut rng = seeded(cfg.seed);
        let mut state = TrainState::new(cfg.model.clone(), cfg.optimizer.clone(), &mut rng)?;
        train_epochs(
            &mut state,
            &setup,
            &ds.graphs,
            &epoch_cfg,
            &mut rng,
            |r, st| {
                let line = serde_json::to_string(r)?;
                writeln!(log, "{line}")?;
                println!(
                    "epoch {:>5}  loss {:.5}  node {:.5}  edge {:.5}  {:.2}s",
                    r.epoch, r.mean_loss, r.node_loss, r.edge_loss, r.wall_seconds
                );
                if cfg.train.checkpoint_every > 0 && r.epoch % cfg.train.checkpoint_every == 0 {
                    save_checkpoint(
                        &ckpt_dir.join(format!("epoch_{:05}.ckpt", r.epoch)),
                        &checkpoint_for(cfg, st, &stats, r.epoch),
                    )?;
                }
                Ok(())
            },
        )?;
        Ok(state)
    })?;
    log.flush()?;

    let final_path = out.join("model.ckpt");
    let ckpt = checkpoint_for(cfg, &state, &stats, cfg.train.epochs);
    save_checkpoint(&final_path, &ckpt)
        .with_context(|| format!("writing {}", final_path.display()))?;
    let bytes = fs::read(&final_path)?;
    if read_checkpoint(bytes.as_slice())? != ckpt {
        bail!(
            "checkpoint {} does not reload identically",
            final_path.display()
        );
    }
    println!("wrote {}", final_path.display());
    Ok(())
}

pub fn sample(cfg: &RunConfig) -> anyhow::Result<()> {
    let path = required(
        &cfg.sample.checkpoint,
        "checkpoint (sample.checkpoint or --checkpoint)",
    )?;
    let ckpt =
        load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let meta: CheckpointMeta = serde_json::from_value(ckpt.meta.clone()).map_err(|e| {
        ValidationError(anyhow!(
            "checkpoint {} has no run metadata: {e}",
            path.display()
        ))
    })?;
    let setup = DiffusionSetup {
        schedule: build_schedule(meta.diffusion.steps, meta.diffusion.schedule)?,
        spec: GraphSpec::new(meta.node_marginals.clone(), meta.edge_marginals.clone())?,
    };
    let sampler = SamplerConfig {
        inference_steps: cfg.sample.inference_steps,
        lambda: cfg.model.lambda,
        seed: cfg.seed,
    };
    sampler.validate(meta.diffusion.steps)?;
    let nodes = match cfg.sample.n_nodes {
        Some(n) => NodeCountSource::Fixed(n),
        None => NodeCountSource::Empirical(meta.node_counts.clone()),
    };
    let model = Denoiser {
        weights: &ckpt.weights,
        config: &ckpt.config,
        setup: &setup,
    };
    model.validate()?;
    let out = prepare_out(cfg)?;
    let graphs = with_workers(cfg.workers, || {
        generate(model, &nodes, &sampler, cfg.sample.count)
    })?;
    let out_path = out.join("samples.jsonl");
    datasets::save(
        &out_path,
        &Dataset::new(stamped_header(cfg, ckpt.config.a, ckpt.config.b), graphs),
    )
    .with_context(|| format!("writing {}", out_path.display()))?;
    println!(
        "wrote {} graphs to {} ({} of {} reverse steps, lambda {})",
        cfg.sample.count,
        out_path.display(),
        sampler.resolved_steps(meta.diffusion.steps),
        meta.diffusion.steps,
        sampler.lambda
    );
    Ok(())
}

fn print_eval(r: &EvalReport) {
    for m in &r.metrics {
        let ratio = m
            .ratio
            .map(|x| format!("  ratio {x:.3}"))
            .unwrap_or_default();
        println!(
            "{:<11} MMD² {:.6e}  mean {:.6e}  std {:.3e}{ratio}",
            m.metric, m.mmd2, m.mean, m.std
        );
    }
    println!(
        "connected   {:.3} (reference {:.3})",
        r.connectivity, r.reference_connectivity
    );
}

pub fn eval(cfg: &RunConfig) -> anyhow::Result<()> {
    let generated = load_dataset(
        required(
            &cfg.eval.generated,
            "generated file (eval.generated or --generated)",
        )?,
        "generated set",
    )?;
    let reference = load_dataset(
        required(
            &cfg.eval.reference,
            "reference file (eval.reference or --reference)",
        )?,
        "reference set",
    )?;
    let train_ref = match &cfg.eval.train_reference {
        Some(p) => Some(load_dataset(p, "training set")?),
        None => None,
    };
    let repeats = cfg.eval.repeats;
    let per = generated.graphs.len() / repeats;
    if per == 0 {
        return Err(ValidationError(anyhow!(
            "{} generated graphs cannot be split into {repeats} sets",
            generated.graphs.len()
        ))
        .into());
    }
    let sets: Vec<Vec<_>> = generated
        .graphs
        .chunks(per)
        .take(repeats)
        .map(<[_]>::to_vec)
        .collect();
    let out = prepare_out(cfg)?;
    let report = with_workers(cfg.workers, || {
        evaluate_repeated(
            &sets,
            &reference.graphs,
            train_ref.as_ref().map(|d| d.graphs.as_slice()),
            &cfg.eval.widths,
        )
    })?;
    write_json(&out.join("eval.json"), cfg, &report)?;
    print_eval(&report);
    Ok(())
}

pub fn verify(cfg: &RunConfig, kind: VerifyKind) -> anyhow::Result<()> {
    let out = prepare_out(cfg)?;
    let report: VerifyReport = with_workers(cfg.workers, || verify::run(kind, cfg.seed))?;
    write_json(
        &out.join(format!("verify_{}.json", kind.name())),
        cfg,
        &report,
    )?;
    for c in &report.checks {
        println!(
            "{} {}: {:.6e} {} {:.6e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.threshold
        );
    }
    if !report.passed {
        bail!("verification {} failed", kind.name());
    }
    println!("verification {} passed", kind.name());
    Ok(())
}
