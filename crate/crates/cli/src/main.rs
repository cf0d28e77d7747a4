//! `graphdiff`: generate datasets, train, sample, evaluate and self-check.
//!
//! Exit status: 0 on success, 2 when input or configuration is invalid,
//! 3 when a run fails (I/O, numerics, or a failed verification).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphdiff_core::datasets::DatasetProfile;
use graphdiff_core::verify::VerifyKind;

use crate::config::Overrides;

#[derive(Parser, Debug)]
#[command(
    name = "graphdiff",
    version,
    about = "Sparse discrete diffusion for graph generation"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// query fraction for training and sampling
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// reverse steps S used when sampling
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// output directory (created if missing)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads, 0 = one per core
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// fixed node count for generated or sampled graphs
    #[arg(long, global = true)]
    n_nodes: Option<usize>,
    /// er, sbm, ego or protein
    #[arg(long, global = true)]
    dataset_profile: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset and print its statistics.
    GenerateData,
    /// Train a denoiser on a dataset file.
    Train {
        /// dataset file (overrides `data.path`)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Sample graphs from a checkpoint.
    Sample {
        /// checkpoint file (overrides `sample.checkpoint`)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// number of graphs (overrides `sample.count`)
        #[arg(long)]
        count: Option<usize>,
    },
    /// Compare generated graphs with a reference set.
    Eval {
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// training graphs, for MMD ratios
        #[arg(long)]
        train_reference: Option<PathBuf>,
    },
    /// Run a statistical or numerical self-check.
    Verify {
        /// noise, lemma, gradcheck, loss-unbiased or posterior
        kind: String,
    },
}

/// Marks errors caused by invalid input or configuration.
#[derive(Debug)]
pub struct ValidationError(pub anyhow::Error);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ValidationError {}

impl From<anyhow::Error> for ValidationError {
    fn from(e: anyhow::Error) -> Self {
        ValidationError(e)
    }
}

/// Exit status for an error chain.
fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ValidationError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<graphdiff_core::Error>() {
            return if e.is_validation() { 2 } else { 3 };
        }
    }
    3
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let dataset_profile = g
        .dataset_profile
        .as_deref()
        .map(str::parse::<DatasetProfile>)
        .transpose()
        .map_err(|e| ValidationError(e.into()))?;
    let flags = Overrides {
        seed: g.seed,
        lambda: g.lambda,
        steps: g.steps,
        out: g.out.clone(),
        workers: g.workers,
        n_nodes: g.n_nodes,
        dataset_profile,
    };
    let mut cfg = config::load(g.config.as_deref(), &flags)?;
    match cli.command {
        Command::GenerateData => commands::generate_data(&cfg),
        Command::Train { data } => {
            if data.is_some() {
                cfg.data.path = data;
            }
            commands::train(&cfg)
        }
        Command::Sample { checkpoint, count } => {
            if checkpoint.is_some() {
                cfg.sample.checkpoint = checkpoint;
            }
            if let Some(c) = count {
                cfg.sample.count = c;
                config::validate(&cfg).map_err(ValidationError)?;
            }
            commands::sample(&cfg)
        }
        Command::Eval {
            generated,
            reference,
            train_reference,
        } => {
            cfg.eval.generated = generated.or(cfg.eval.generated);
            cfg.eval.reference = reference.or(cfg.eval.reference);
            cfg.eval.train_reference = train_reference.or(cfg.eval.train_reference);
            commands::eval(&cfg)
        }
        Command::Verify { kind } => {
            let kind: VerifyKind = kind
                .parse()
                .map_err(|e: graphdiff_core::Error| ValidationError(e.into()))?;
            commands::verify(&cfg, kind)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
