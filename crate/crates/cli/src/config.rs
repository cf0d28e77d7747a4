//! Run configuration: TOML file, flag overrides, validation and hashing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use graphdiff_core::datasets::{DatasetProfile, SbmParams};
use graphdiff_core::metrics::KernelWidths;
use graphdiff_core::nn::{NetworkConfig, OptimizerConfig};
use graphdiff_core::noise::ScheduleKind;
use graphdiff_core::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub profile: DatasetProfile,
    /// dataset file used by `train`
    pub path: Option<PathBuf>,
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// edge probability of the ER profile
    pub er_p: f64,
    pub sbm: SbmParams,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            profile: DatasetProfile::Er,
            path: None,
            count: 200,
            n_min: 16,
            n_max: 16,
            er_p: 0.15,
            sbm: SbmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    /// diffusion steps `T`
    pub steps: usize,
    pub schedule: ScheduleKind,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            steps: 200,
            schedule: ScheduleKind::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub augment: bool,
    /// write an intermediate checkpoint every this many epochs (0 = never)
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            augment: true,
            checkpoint_every: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub checkpoint: Option<PathBuf>,
    pub count: usize,
    /// reverse steps `S`; 0 means `T`
    pub inference_steps: usize,
    /// fixed node count; otherwise drawn from the training node counts
    pub n_nodes: Option<usize>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            checkpoint: None,
            count: 64,
            inference_steps: 0,
            n_nodes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub generated: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    /// training graphs, for MMD ratios
    pub train_reference: Option<PathBuf>,
    pub widths: KernelWidths,
    /// the generated file is split into this many equal sets
    pub repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            generated: None,
            reference: None,
            train_reference: None,
            widths: KernelWidths::default(),
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// worker threads, 0 = one per core
    pub workers: usize,
    pub data: DataConfig,
    pub diffusion: DiffusionConfig,
    pub model: NetworkConfig,
    pub optimizer: OptimizerConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            workers: 0,
            data: DataConfig::default(),
            diffusion: DiffusionConfig::default(),
            model: NetworkConfig::default(),
            optimizer: OptimizerConfig::default(),
            train: TrainConfig::default(),
            sample: SampleConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub n_nodes: Option<usize>,
    pub dataset_profile: Option<DatasetProfile>,
}

/// Reads `path` (if any), applies `flags` and validates the result.
///
/// `λ` resolves as flag, then `model.lambda` from the file, then the
/// dataset profile default.
pub fn load(path: Option<&Path>, flags: &Overrides) -> anyhow::Result<RunConfig> {
    let (mut cfg, file_lambda) = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(ValidationError::from)?;
            parse(&text)
                .with_context(|| format!("in config {}", p.display()))
                .map_err(ValidationError::from)?
        }
        None => (RunConfig::default(), false),
    };
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(o) = &flags.out {
        cfg.out = o.clone();
    }
    if let Some(w) = flags.workers {
        cfg.workers = w;
    }
    if let Some(p) = flags.dataset_profile {
        cfg.data.profile = p;
    }
    if let Some(s) = flags.steps {
        cfg.sample.inference_steps = s;
    }
    if let Some(n) = flags.n_nodes {
        cfg.sample.n_nodes = Some(n);
        cfg.data.n_min = n;
        cfg.data.n_max = n;
    }
    match flags.lambda {
        Some(l) => cfg.model.lambda = l,
        None if !file_lambda => cfg.model.lambda = cfg.data.profile.default_lambda(),
        None => {}
    }
    validate(&cfg).map_err(ValidationError::from)?;
    Ok(cfg)
}

/// Parses TOML text; the flag reports whether `model.lambda` was set.
pub fn parse(text: &str) -> anyhow::Result<(RunConfig, bool)> {
    let raw: toml::Table = toml::from_str(text)?;
    let has_lambda = raw
        .get("model")
        .and_then(|m| m.as_table())
        .is_some_and(|m| m.contains_key("lambda"));
    let cfg: RunConfig = toml::from_str(text)?;
    Ok((cfg, has_lambda))
}

pub fn validate(cfg: &RunConfig) -> anyhow::Result<()> {
    cfg.model.validate()?;
    cfg.optimizer.validate()?;
    cfg.data.sbm.validate()?;
    if cfg.diffusion.steps == 0 {
        bail!("diffusion.steps must be at least 1");
    }
    SamplerConfig {
        inference_steps: cfg.sample.inference_steps,
        lambda: cfg.model.lambda,
        seed: cfg.seed,
    }
    .validate(cfg.diffusion.steps)?;
    if cfg.data.count == 0 || cfg.data.n_min == 0 || cfg.data.n_min > cfg.data.n_max {
        bail!("data needs count >= 1 and 1 <= n_min <= n_max");
    }
    if !(0.0..=1.0).contains(&cfg.data.er_p) {
        bail!("data.er_p must lie in [0, 1]");
    }
    if cfg.train.batch_size == 0 {
        bail!("train.batch_size must be at least 1");
    }
    if cfg.sample.count == 0 || cfg.sample.n_nodes == Some(0) {
        bail!("sample needs count >= 1 and n_nodes >= 1");
    }
    let w = cfg.eval.widths;
    if [w.degree, w.clustering, w.spectral]
        .iter()
        .any(|s| !(s.is_finite() && *s > 0.0))
    {
        bail!("kernel widths must be positive");
    }
    if cfg.eval.repeats == 0 {
        bail!("eval.repeats must be at least 1");
    }
    Ok(())
}

/// First 16 hex digits of SHA-256 over the JSON form of everything that can
/// change results (output directory and worker count excluded).
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.out = PathBuf::new();
    c.workers = 0;
    let json = serde_json::to_string(&c).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Writes the effective configuration as TOML, headed by its hash and seed.
pub fn echo(cfg: &RunConfig, dir: &Path) -> anyhow::Result<PathBuf> {
    let path = dir.join("effective_config.toml");
    let body = toml::to_string_pretty(cfg)?;
    let text = format!(
        "# config_hash = \"{}\"\n# seed = {}\n{body}",
        config_hash(cfg),
        cfg.seed
    );
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
