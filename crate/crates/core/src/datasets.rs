//! Synthetic generators, the dataset file format and dataset statistics.
//!
//! A dataset file is JSON lines. The first line is a header, every further
//! line one graph:
//!
//! ```text
//! {"format":"graphdiff-dataset","version":1,"a":1,"b":2,"seed":7,"config_hash":"…"}
//! {"n":3,"nodes":[0,0,0],"edges":[[0,1],[1,2]],"labels":[1,1]}
//! {"n":2,"nodes":[0,0],"edges":[],"labels":[],"name":"pair"}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{num_pairs, GraphSpec, SparseGraph};
use crate::random::{seeded, split_seeds};

pub const DATASET_FORMAT: &str = "graphdiff-dataset";
pub const DATASET_VERSION: u32 = 1;

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!("{what}={p} is not a probability")));
    }
    Ok(())
}

fn check_range(lo: usize, hi: usize, what: &str) -> Result<()> {
    if lo == 0 || lo > hi {
        return Err(Error::arg(format!(
            "{what} range [{lo}, {hi}] is empty or starts at 0"
        )));
    }
    Ok(())
}

/// Bernoulli edges over all pairs, with `p(i, j)` chosen per pair.
fn bernoulli_graph<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    p: impl Fn(usize, usize) -> f64,
) -> SparseGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p(i, j)) {
                edges.push((i, j));
            }
        }
    }
    let m = edges.len();
    SparseGraph::from_parts(n, vec![0; n], edges, vec![1; m]).expect("row-major pairs are sorted")
}

/// Erdős–Rényi graphs with `n` uniform in `[n_min, n_max]`.
pub fn gen_er<R: Rng + ?Sized>(
    count: usize,
    n_min: usize,
    n_max: usize,
    p: f64,
    rng: &mut R,
) -> Result<Vec<SparseGraph>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::arg(format!("edge probability p={p} outside (0, 1)")));
    }
    check_range(n_min, n_max, "node count")?;
    let seeds = split_seeds(rng, count);
    Ok(crate::par::map_indexed(count, |k| {
        let mut rng = seeded(seeds[k]);
        let n = rng.random_range(n_min..=n_max);
        bernoulli_graph(n, &mut rng, |_, _| p)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbmParams {
    pub blocks_min: usize,
    pub blocks_max: usize,
    pub block_size_min: usize,
    pub block_size_max: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for SbmParams {
    fn default() -> Self {
        SbmParams {
            blocks_min: 2,
            blocks_max: 5,
            block_size_min: 20,
            block_size_max: 40,
            p_in: 0.3,
            p_out: 0.005,
        }
    }
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        check_range(self.blocks_min, self.blocks_max, "block count")?;
        if self.block_size_min > self.block_size_max {
            return Err(Error::arg("block size range is empty"));
        }
        check_probability(self.p_in, "p_in")?;
        check_probability(self.p_out, "p_out")?;
        if self.p_out >= self.p_in {
            return Err(Error::arg(format!(
                "need p_out < p_in, got {} >= {}",
                self.p_out, self.p_in
            )));
        }
        if self.blocks_max * self.block_size_max == 0 {
            return Err(Error::arg("graphs would have no nodes"));
        }
        Ok(())
    }
}

/// SBM graphs together with the block of every node (nodes are grouped by
/// block).
pub fn gen_sbm_with_blocks<R: Rng + ?Sized>(
    count: usize,
    params: &SbmParams,
    rng: &mut R,
) -> Result<Vec<(SparseGraph, Vec<usize>)>> {
    params.validate()?;
    let seeds = split_seeds(rng, count);
    crate::par::map_indexed(count, |k| {
        let mut rng = seeded(seeds[k]);
        let blocks = rng.random_range(params.blocks_min..=params.blocks_max);
        let mut member = Vec::new();
        for b in 0..blocks {
            let size = rng.random_range(params.block_size_min..=params.block_size_max);
            member.extend(std::iter::repeat_n(b, size));
        }
        if member.is_empty() {
            return Err(Error::arg("sampled an SBM graph with no nodes"));
        }
        let g = bernoulli_graph(member.len(), &mut rng, |i, j| {
            if member[i] == member[j] {
                params.p_in
            } else {
                params.p_out
            }
        });
        Ok((g, member))
    })
    .into_iter()
    .collect()
}

pub fn gen_sbm<R: Rng + ?Sized>(
    count: usize,
    params: &SbmParams,
    rng: &mut R,
) -> Result<Vec<SparseGraph>> {
    Ok(gen_sbm_with_blocks(count, params, rng)?
        .into_iter()
        .map(|(g, _)| g)
        .collect())
}

/// Named dataset presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetProfile {
    Er,
    Sbm,
    Ego,
    Protein,
}

impl DatasetProfile {
    /// Query fraction used when a run does not set one.
    pub fn default_lambda(self) -> f64 {
        match self {
            DatasetProfile::Er => 0.5,
            DatasetProfile::Sbm => 0.25,
            DatasetProfile::Ego | DatasetProfile::Protein => 0.1,
        }
    }

    /// Whether graphs for this profile can be generated locally.
    pub fn synthetic(self) -> bool {
        matches!(self, DatasetProfile::Er | DatasetProfile::Sbm)
    }
}

impl FromStr for DatasetProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "er" => Ok(DatasetProfile::Er),
            "sbm" => Ok(DatasetProfile::Sbm),
            "ego" => Ok(DatasetProfile::Ego),
            "protein" => Ok(DatasetProfile::Protein),
            other => Err(Error::arg(format!(
                "unknown dataset profile {other:?} (er, sbm, ego, protein)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub a: usize,
    pub b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl DatasetHeader {
    pub fn new(a: usize, b: usize) -> Self {
        DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            a,
            b,
            seed: None,
            config_hash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    n: usize,
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
    labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub graphs: Vec<SparseGraph>,
    /// optional per-graph names, aligned with `graphs`
    pub names: Vec<Option<String>>,
}

impl Dataset {
    pub fn new(header: DatasetHeader, graphs: Vec<SparseGraph>) -> Self {
        let names = vec![None; graphs.len()];
        Dataset {
            header,
            graphs,
            names,
        }
    }
}

fn check_labels(g: &SparseGraph, a: usize, b: usize) -> Result<()> {
    if let Some(x) = g.node_labels().iter().find(|&&x| x >= a) {
        return Err(Error::graph(format!("node class {x} outside 0..{a}")));
    }
    if let Some(y) = g.edge_labels().iter().find(|&&y| y >= b) {
        return Err(Error::graph(format!("edge class {y} outside 1..{b}")));
    }
    Ok(())
}

pub fn write_dataset<W: Write>(mut out: W, ds: &Dataset) -> Result<()> {
    if ds.names.len() != ds.graphs.len() {
        return Err(Error::arg("one name slot per graph required"));
    }
    serde_json::to_writer(&mut out, &ds.header)?;
    out.write_all(b"\n")?;
    for (g, name) in ds.graphs.iter().zip(&ds.names) {
        check_labels(g, ds.header.a, ds.header.b)?;
        let rec = Record {
            n: g.n(),
            nodes: g.node_labels().to_vec(),
            edges: g.edges().to_vec(),
            labels: g.edge_labels().to_vec(),
            name: name.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<DatasetHeader> {
    let at = |message: String| Error::Parse { line: 1, message };
    let raw: serde_json::Value =
        serde_json::from_str(line).map_err(|e| at(format!("header is not JSON: {e}")))?;
    if raw.get("format").and_then(|f| f.as_str()) != Some(DATASET_FORMAT) {
        return Err(at(format!(
            "header does not declare format {DATASET_FORMAT:?}"
        )));
    }
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == DATASET_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Version {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: DATASET_VERSION,
            })
        }
        None => return Err(at("header has no version".into())),
    }
    let h: DatasetHeader = serde_json::from_value(raw).map_err(|e| at(e.to_string()))?;
    if h.a == 0 || h.b < 2 {
        return Err(at(format!(
            "need a >= 1 and b >= 2, got a={} b={}",
            h.a, h.b
        )));
    }
    Ok(h)
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "no header".into(),
                })
            }
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break parse_header(&line)?;
                }
            }
        }
    };
    let mut ds = Dataset::new(header, Vec::new());
    for (k, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |message: String| Error::Parse {
            line: k + 1,
            message,
        };
        let rec: Record = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let g = SparseGraph::from_parts(rec.n, rec.nodes, rec.edges, rec.labels)
            .map_err(|e| at(e.to_string()))?;
        check_labels(&g, ds.header.a, ds.header.b).map_err(|e| at(e.to_string()))?;
        ds.graphs.push(g);
        ds.names.push(rec.name);
    }
    Ok(ds)
}

pub fn save(path: &Path, ds: &Dataset) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), ds)
}

pub fn load(path: &Path) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub node_range: (usize, usize),
    pub edge_range: (usize, usize),
    pub edge_ratio_range: (f64, f64),
    /// `node_counts[n]` graphs have `n` nodes
    pub node_counts: Vec<usize>,
    pub node_marginals: Vec<f64>,
    /// class 0 counts every vacant pair
    pub edge_marginals: Vec<f64>,
}

impl DatasetStats {
    pub fn spec(&self) -> Result<GraphSpec> {
        GraphSpec::new(self.node_marginals.clone(), self.edge_marginals.clone())
    }
}

pub fn dataset_stats(graphs: &[SparseGraph], a: usize, b: usize) -> Result<DatasetStats> {
    if graphs.is_empty() {
        return Err(Error::arg("statistics of an empty dataset"));
    }
    if a == 0 || b < 2 {
        return Err(Error::arg(
            "need a >= 1 node classes and b >= 2 edge classes",
        ));
    }
    let mut node_hist = vec![0u64; a];
    let mut edge_hist = vec![0u64; b];
    let mut pairs_total = 0u64;
    let max_n = graphs.iter().map(SparseGraph::n).max().unwrap_or(0);
    let mut node_counts = vec![0; max_n + 1];
    let (mut nr, mut er, mut rr) = (
        (usize::MAX, 0),
        (usize::MAX, 0),
        (f64::INFINITY, f64::NEG_INFINITY),
    );
    for g in graphs {
        check_labels(g, a, b)?;
        for &x in g.node_labels() {
            node_hist[x] += 1;
        }
        for &y in g.edge_labels() {
            edge_hist[y] += 1;
        }
        pairs_total += num_pairs(g.n()) as u64;
        node_counts[g.n()] += 1;
        nr = (nr.0.min(g.n()), nr.1.max(g.n()));
        er = (er.0.min(g.num_edges()), er.1.max(g.num_edges()));
        let ratio = g.edge_ratio();
        rr = (rr.0.min(ratio), rr.1.max(ratio));
    }
    let nodes_total: u64 = node_hist.iter().sum();
    let edges_total: u64 = edge_hist[1..].iter().sum();
    if nodes_total == 0 {
        return Err(Error::arg("dataset has no nodes"));
    }
    edge_hist[0] = pairs_total - edges_total;
    let norm = |h: &[u64], total: u64| -> Vec<f64> {
        if total == 0 {
            let mut v = vec![0.0; h.len()];
            v[0] = 1.0;
            v
        } else {
            h.iter().map(|&c| c as f64 / total as f64).collect()
        }
    };
    Ok(DatasetStats {
        graphs: graphs.len(),
        node_range: nr,
        edge_range: er,
        edge_ratio_range: rr,
        node_counts,
        node_marginals: norm(&node_hist, nodes_total),
        edge_marginals: norm(&edge_hist, pairs_total),
    })
}
