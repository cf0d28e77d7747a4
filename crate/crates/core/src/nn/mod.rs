//! The sparse graph transformer denoiser.
//!
//! Parameters live in [`NetworkWeights`], an ordered list of named dense
//! tensors. The forward pass is recorded on an [`crate::autodiff::Tape`] so
//! the same code path serves inference and exact gradients.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod train;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::encodings::EncodingConfig;
use crate::error::{Error, Result};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use loss::{edge_scale, loss, LossBreakdown};
pub use model::{
    forward, forward_link_pred, gradients, loss_and_gradients, loss_value, prepare_input,
    prepare_input_cached, DenoiserInput, Prediction,
};
pub use optim::{AdamW, OptimizerConfig};
pub use train::{
    train_epochs, train_step, DiffusionSetup, EpochConfig, EpochReport, StepReport, TrainState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Query edges join the message graph and get their own edge states.
    Transformer,
    /// Messages use noisy edges only; queries are scored by a symmetrized
    /// endpoint MLP.
    LinkPred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub layers: usize,
    pub dx: usize,
    pub de: usize,
    pub dg: usize,
    pub heads: usize,
    /// node classes
    pub a: usize,
    /// edge classes, class 0 = no edge
    pub b: usize,
    pub mode: Mode,
    /// edge-loss weight `c`
    pub edge_weight: f64,
    /// default query fraction for training
    pub lambda: f64,
    pub encoding: EncodingConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layers: 4,
            dx: 64,
            de: 32,
            dg: 32,
            heads: 4,
            a: 1,
            b: 2,
            mode: Mode::Transformer,
            edge_weight: 5.0,
            lambda: 0.5,
            encoding: EncodingConfig::default(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::arg("network needs at least one layer"));
        }
        if self.dx == 0 || self.de == 0 || self.dg == 0 || self.heads == 0 {
            return Err(Error::arg("hidden sizes and head count must be positive"));
        }
        if !self.dx.is_multiple_of(self.heads) {
            return Err(Error::arg(format!(
                "dx={} is not divisible by heads={}",
                self.dx, self.heads
            )));
        }
        if self.a == 0 || self.b < 2 {
            return Err(Error::arg(
                "need a >= 1 node classes and b >= 2 edge classes",
            ));
        }
        if self.edge_weight.is_nan() || self.edge_weight < 0.0 {
            return Err(Error::arg("edge weight must be nonnegative"));
        }
        crate::query::check_lambda(self.lambda)?;
        self.encoding.validate()
    }

    pub fn node_input_dim(&self) -> usize {
        self.a + self.encoding.node_dim()
    }

    pub fn edge_input_dim(&self) -> usize {
        self.b + self.encoding.pair_dim()
    }

    pub fn graph_input_dim(&self) -> usize {
        self.encoding.graph_dim(self.a, self.b)
    }

    /// Every tensor as `(name, rows, cols)`, in checkpoint order.
    pub fn parameter_shapes(&self) -> Vec<(String, usize, usize)> {
        let (dx, de, dg) = (self.dx, self.de, self.dg);
        let mut s: Vec<(String, usize, usize)> = Vec::new();
        let mut push = |name: String, r: usize, c: usize| s.push((name, r, c));
        push("in.node.w".into(), self.node_input_dim(), dx);
        push("in.node.b".into(), 1, dx);
        push("in.edge.w".into(), self.edge_input_dim(), de);
        push("in.edge.b".into(), 1, de);
        push("in.graph.w".into(), self.graph_input_dim(), dg);
        push("in.graph.b".into(), 1, dg);
        for l in 0..self.layers {
            let p = |n: &str| format!("layer{l}.{n}");
            push(p("attn.wq"), dx, dx);
            push(p("attn.wk"), dx, dx);
            push(p("attn.wv"), dx, dx);
            push(p("attn.we"), de, dx);
            push(p("attn.we2"), de, dx);
            push(p("film_x.w1"), dx, dg);
            push(p("film_x.w2"), dx, dg);
            push(p("ff_x.w1"), dg, 2 * dx);
            push(p("ff_x.b1"), 1, 2 * dx);
            push(p("ff_x.w2"), 2 * dx, dx);
            push(p("ff_x.b2"), 1, dx);
            push(p("ln_x.gamma"), 1, dx);
            push(p("ln_x.beta"), 1, dx);
            push(p("edge.u"), dx, de);
            push(p("edge.u2"), dx, de);
            push(p("edge.v"), de, de);
            push(p("film_e.w1"), de, dg);
            push(p("film_e.w2"), de, dg);
            push(p("ff_e.w1"), dg, 2 * de);
            push(p("ff_e.b1"), 1, 2 * de);
            push(p("ff_e.w2"), 2 * de, de);
            push(p("ff_e.b2"), 1, de);
            push(p("ln_e.gamma"), 1, de);
            push(p("ln_e.beta"), 1, de);
            push(p("pna_x.w"), 4 * dx, dg);
            push(p("pna_e.w"), 4 * de, dg);
            push(p("ff_g.w1"), dg, 2 * dg);
            push(p("ff_g.b1"), 1, 2 * dg);
            push(p("ff_g.w2"), 2 * dg, dg);
            push(p("ff_g.b2"), 1, dg);
        }
        push("out.node.w".into(), dx, self.a);
        push("out.node.b".into(), 1, self.a);
        match self.mode {
            Mode::Transformer => {
                push("out.edge.w".into(), de, self.b);
                push("out.edge.b".into(), 1, self.b);
            }
            Mode::LinkPred => {
                push("lp.w1".into(), 2 * dx, dx);
                push("lp.b1".into(), 1, dx);
                push("lp.w2".into(), dx, self.b);
                push("lp.b2".into(), 1, self.b);
            }
        }
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes().iter().map(|(_, r, c)| r * c).sum()
    }
}

/// Ordered, named parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    names: Vec<String>,
    tensors: Vec<Matrix>,
    index: HashMap<String, usize>,
}

impl NetworkWeights {
    pub fn from_named(entries: Vec<(String, Matrix)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut names = Vec::with_capacity(entries.len());
        let mut tensors = Vec::with_capacity(entries.len());
        for (k, (name, m)) in entries.into_iter().enumerate() {
            if index.insert(name.clone(), k).is_some() {
                return Err(Error::arg(format!("duplicate tensor name {name}")));
            }
            names.push(name);
            tensors.push(m);
        }
        Ok(NetworkWeights {
            names,
            tensors,
            index,
        })
    }

    /// All-zero weights with the shapes `cfg` requires.
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let entries = cfg
            .parameter_shapes()
            .into_iter()
            .map(|(name, r, c)| (name, Matrix::zeros(r, c)))
            .collect();
        NetworkWeights::from_named(entries).expect("generated names are unique")
    }

    /// Checks that names and shapes match `cfg` exactly.
    pub fn check_against(&self, cfg: &NetworkConfig) -> Result<()> {
        let shapes = cfg.parameter_shapes();
        if shapes.len() != self.names.len() {
            return Err(Error::arg(format!(
                "weights have {} tensors, config expects {}",
                self.names.len(),
                shapes.len()
            )));
        }
        for ((name, r, c), (have, m)) in shapes.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != have || (m.rows, m.cols) != (*r, *c) {
                return Err(Error::arg(format!(
                    "tensor {have} ({}x{}) does not match expected {name} ({r}x{c})",
                    m.rows, m.cols
                )));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.position(name).map(|k| &self.tensors[k])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.position(name).map(move |k| &mut self.tensors[k])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::all_finite)
    }
}

/// Linear layers uniform in `±1/√fan_in`; layer-norm scales 1, shifts 0.
pub fn init_network<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<NetworkWeights> {
    cfg.validate()?;
    let shapes = cfg.parameter_shapes();
    let mut entries = Vec::with_capacity(shapes.len());
    let mut fan_in = 1;
    for (name, r, c) in shapes {
        let m = if name.ends_with(".gamma") {
            Matrix::from_vec(r, c, vec![1.0; r * c])
        } else if name.ends_with(".beta") {
            Matrix::zeros(r, c)
        } else {
            // biases follow the weight matrix listed just before them
            if r > 1 || !name.contains(".b") {
                fan_in = r;
            }
            let bound = 1.0 / (fan_in as f64).sqrt();
            Matrix::from_vec(
                r,
                c,
                (0..r * c)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            )
        };
        entries.push((name, m));
    }
    NetworkWeights::from_named(entries)
}
