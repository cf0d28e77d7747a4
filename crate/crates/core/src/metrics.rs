//! Set-level comparison of graph collections by descriptor histograms and a
//! Gaussian kernel on total-variation distance.

use serde::{Deserialize, Serialize};

use crate::encodings::laplacian_spectrum;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;

pub const CLUSTERING_BINS: usize = 100;
pub const SPECTRAL_BINS: usize = 200;

/// Per-graph histograms, each summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDescriptors {
    /// `degree[d]` = fraction of nodes with degree `d`, for `d` up to the max
    pub degree: Vec<f64>,
    /// local clustering coefficients, 100 bins over [0, 1]
    pub clustering: Vec<f64>,
    /// normalized-Laplacian eigenvalues, 200 bins over [0, 2]
    pub spectral: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Degree,
    Clustering,
    Spectral,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Degree, Metric::Clustering, Metric::Spectral];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Degree => "degree",
            Metric::Clustering => "clustering",
            Metric::Spectral => "spectral",
        }
    }

    fn pick(self, d: &GraphDescriptors) -> &Vec<f64> {
        match self {
            Metric::Degree => &d.degree,
            Metric::Clustering => &d.clustering,
            Metric::Spectral => &d.spectral,
        }
    }
}

/// Kernel bandwidth per descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelWidths {
    pub degree: f64,
    pub clustering: f64,
    pub spectral: f64,
}

impl Default for KernelWidths {
    fn default() -> Self {
        KernelWidths {
            degree: 1.0,
            clustering: 0.1,
            spectral: 1.0,
        }
    }
}

impl KernelWidths {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Degree => self.degree,
            Metric::Clustering => self.clustering,
            Metric::Spectral => self.spectral,
        }
    }
}

/// `c_i = 2·tri(i) / (d_i (d_i - 1))`, and 0 when `d_i < 2`.
pub fn local_clustering(g: &SparseGraph) -> Vec<f64> {
    let adj = g.adjacency();
    (0..g.n())
        .map(|v| {
            let nb = &adj[v];
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (x, &a) in nb.iter().enumerate() {
                for &b in &nb[x + 1..] {
                    if adj[a].binary_search(&b).is_ok() {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// Values within `BIN_SNAP` of a bin edge count toward the upper bin, so
/// round-off in eigenvalues does not move mass between bins.
const BIN_SNAP: f64 = 1e-9;

fn histogram(values: impl Iterator<Item = f64>, bins: usize, hi: f64, count: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for v in values {
        let b = ((v / hi * bins as f64 + BIN_SNAP).floor().max(0.0) as usize).min(bins - 1);
        h[b] += 1.0 / count as f64;
    }
    h
}

pub fn descriptors(g: &SparseGraph) -> Result<GraphDescriptors> {
    let n = g.n();
    if n == 0 {
        return Err(Error::graph("descriptors need at least one node"));
    }
    let deg = g.degrees();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut degree = vec![0.0; max_deg + 1];
    for &d in &deg {
        degree[d] += 1.0 / n as f64;
    }
    let clustering = histogram(local_clustering(g).into_iter(), CLUSTERING_BINS, 1.0, n);
    let spectrum = laplacian_spectrum(g)?;
    let spectral = histogram(spectrum.values.into_iter(), SPECTRAL_BINS, 2.0, n);
    Ok(GraphDescriptors {
        degree,
        clustering,
        spectral,
    })
}

pub fn descriptor_sets(graphs: &[SparseGraph]) -> Result<Vec<GraphDescriptors>> {
    crate::par::map_slice(graphs, descriptors)
        .into_iter()
        .collect()
}

/// `½ Σ |p - q|`, shorter histograms padded with zeros.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let (long, short) = if p.len() >= q.len() { (p, q) } else { (q, p) };
    let mut s: f64 = long[short.len()..].iter().map(|x| x.abs()).sum();
    for (a, b) in short.iter().zip(long) {
        s += (a - b).abs();
    }
    0.5 * s
}

fn kernel_mean(a: &[&[f64]], b: &[&[f64]], sigma: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let rows: Vec<f64> = crate::par::map_indexed(a.len(), |i| {
        b.iter()
            .map(|q| (-total_variation(a[i], q).powi(2) * inv).exp())
            .sum()
    });
    rows.iter().sum::<f64>() / (a.len() * b.len()) as f64
}

/// Biased (V-statistic) MMD² under `k(p, q) = exp(-TV(p, q)² / (2σ²))`,
/// clamped at 0.
pub fn mmd2(a: &[&[f64]], b: &[&[f64]], sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::arg(format!(
            "kernel width must be positive, got {sigma}"
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("MMD needs two nonempty sets"));
    }
    let v = kernel_mean(a, a, sigma) + kernel_mean(b, b, sigma) - 2.0 * kernel_mean(a, b, sigma);
    Ok(v.max(0.0))
}

fn metric_mmd2(
    a: &[GraphDescriptors],
    b: &[GraphDescriptors],
    m: Metric,
    sigma: f64,
) -> Result<f64> {
    let xa: Vec<&[f64]> = a.iter().map(|d| m.pick(d).as_slice()).collect();
    let xb: Vec<&[f64]> = b.iter().map(|d| m.pick(d).as_slice()).collect();
    mmd2(&xa, &xb, sigma)
}

/// Components counted with union-find over the edge list.
pub fn is_connected(g: &SparseGraph) -> bool {
    let n = g.n();
    if n == 0 {
        return false;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for &(i, j) in g.edges() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components == 1
}

pub fn connectivity_fraction(graphs: &[SparseGraph]) -> Result<f64> {
    if graphs.is_empty() {
        return Err(Error::arg("connectivity of an empty set"));
    }
    Ok(graphs.iter().filter(|g| is_connected(g)).count() as f64 / graphs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    /// from the first (or only) generated set
    pub mmd2: f64,
    /// `mmd2 / MMD²(train, reference)` when a training set is supplied
    pub ratio: Option<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<MetricReport>,
    pub connectivity: f64,
    pub reference_connectivity: f64,
    pub n_generated: usize,
    pub n_reference: usize,
    pub repeats: usize,
    pub orbit: String,
}

/// Compares `generated` against `reference`; ratios use
/// `MMD²(train_reference, reference)` as the denominator.
pub fn evaluate(
    generated: &[SparseGraph],
    reference: &[SparseGraph],
    train_reference: Option<&[SparseGraph]>,
    widths: &KernelWidths,
) -> Result<EvalReport> {
    evaluate_repeated(&[generated.to_vec()], reference, train_reference, widths)
}

/// As [`evaluate`] over several independently generated sets, reporting the
/// mean and population std of each MMD² across them.
pub fn evaluate_repeated(
    generated_sets: &[Vec<SparseGraph>],
    reference: &[SparseGraph],
    train_reference: Option<&[SparseGraph]>,
    widths: &KernelWidths,
) -> Result<EvalReport> {
    if generated_sets.is_empty()
        || generated_sets.iter().any(|s| s.is_empty())
        || reference.is_empty()
    {
        return Err(Error::arg(
            "evaluation needs nonempty generated and reference sets",
        ));
    }
    let ref_d = descriptor_sets(reference)?;
    let train_d = train_reference.map(descriptor_sets).transpose()?;
    let gen_d: Vec<Vec<GraphDescriptors>> = generated_sets
        .iter()
        .map(|s| descriptor_sets(s))
        .collect::<Result<_>>()?;
    let mut metrics = Vec::with_capacity(Metric::ALL.len());
    for m in Metric::ALL {
        let sigma = widths.get(m);
        let values: Vec<f64> = gen_d
            .iter()
            .map(|g| metric_mmd2(g, &ref_d, m, sigma))
            .collect::<Result<_>>()?;
        let (mean, std) = crate::stats::mean_std(&values);
        let ratio = match &train_d {
            Some(t) => {
                let base = metric_mmd2(t, &ref_d, m, sigma)?;
                Some(if base > 0.0 {
                    values[0] / base
                } else {
                    f64::INFINITY
                })
            }
            None => None,
        };
        metrics.push(MetricReport {
            metric: m.name().into(),
            mmd2: values[0],
            ratio,
            mean,
            std,
        });
    }
    Ok(EvalReport {
        metrics,
        connectivity: connectivity_fraction(&generated_sets[0])?,
        reference_connectivity: connectivity_fraction(reference)?,
        n_generated: generated_sets[0].len(),
        n_reference: reference.len(),
        repeats: generated_sets.len(),
        orbit: "not computed".into(),
    })
}

impl EvalReport {
    pub fn get(&self, m: Metric) -> &MetricReport {
        self.metrics
            .iter()
            .find(|r| r.metric == m.name())
            .expect("every metric is reported")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;
    use crate::noise::prior_sample;
    use crate::random::seeded;
    use rand::seq::SliceRandom;

    fn from_edges(n: usize, edges: &[(usize, usize)]) -> SparseGraph {
        let raw: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1)).collect();
        crate::graph::canonicalize(&raw, vec![0; n], n, &GraphSpec::uniform(1, 2)).unwrap()
    }

    #[test]
    fn triangle_and_star_clustering() {
        assert_eq!(
            local_clustering(&from_edges(3, &[(0, 1), (1, 2), (0, 2)])),
            vec![1.0; 3]
        );
        assert_eq!(
            local_clustering(&from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])),
            vec![0.0; 5]
        );
    }

    #[test]
    fn triangles_match_brute_force() {
        let mut rng = seeded(5);
        for trial in 0..200 {
            let n = 2 + trial % 6;
            let g = prior_sample(n, &GraphSpec::unattributed(0.5).unwrap(), &mut rng).unwrap();
            let deg = g.degrees();
            let tri = crate::oracle::triangles_per_node(&g);
            for (v, c) in local_clustering(&g).into_iter().enumerate() {
                let d = deg[v] as f64;
                let recovered = if deg[v] < 2 {
                    0.0
                } else {
                    c * d * (d - 1.0) / 2.0
                };
                assert!((recovered - tri[v] as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn histograms_sum_to_one() {
        let mut rng = seeded(6);
        for n in 1..12 {
            let g = prior_sample(n, &GraphSpec::unattributed(0.3).unwrap(), &mut rng).unwrap();
            let d = descriptors(&g).unwrap();
            for h in [&d.degree, &d.clustering, &d.spectral] {
                assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn disjoint_singletons() {
        let a: &[f64] = &[1.0, 0.0];
        let b: &[f64] = &[0.0, 1.0];
        let v = mmd2(&[a], &[b], 1.0).unwrap();
        assert!((v - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-15);
        assert!(mmd2(&[a], &[b], 0.0).is_err());
    }

    #[test]
    fn matches_naive_double_loop() {
        let mut rng = seeded(7);
        let spec = GraphSpec::unattributed(0.3).unwrap();
        let set = |rng: &mut _, k: usize| -> Vec<Vec<f64>> {
            (0..k)
                .map(|i| {
                    descriptors(&prior_sample(4 + i % 5, &spec, rng).unwrap())
                        .unwrap()
                        .degree
                })
                .collect()
        };
        let a = set(&mut rng, 7);
        let b = set(&mut rng, 5);
        let ra: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
        let rb: Vec<&[f64]> = b.iter().map(Vec::as_slice).collect();
        for sigma in [0.1, 1.0] {
            let fast = mmd2(&ra, &rb, sigma).unwrap();
            let naive = crate::oracle::naive_mmd2(&a, &b, sigma).max(0.0);
            assert!((fast - naive).abs() < 1e-12);
            assert!((fast - mmd2(&rb, &ra, sigma).unwrap()).abs() < 1e-15);
        }
        assert!(mmd2(&ra, &ra, 1.0).unwrap() <= 1e-12);
    }

    #[test]
    fn descriptors_are_permutation_invariant() {
        let mut rng = seeded(8);
        let g = prior_sample(10, &GraphSpec::unattributed(0.3).unwrap(), &mut rng).unwrap();
        let mut perm: Vec<usize> = (0..10).collect();
        perm.shuffle(&mut rng);
        let h = crate::graph::permute_nodes(&g, &perm).unwrap();
        let (dg, dh) = (descriptors(&g).unwrap(), descriptors(&h).unwrap());
        assert_eq!(dg.degree, dh.degree);
        assert_eq!(dg.clustering, dh.clustering);
        assert_eq!(total_variation(&dg.spectral, &dh.spectral), 0.0);
    }

    #[test]
    fn connectivity_examples_and_oracle() {
        let tri = from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(connectivity_fraction(&[tri.clone(), tri]).unwrap(), 1.0);
        let empty = vec![SparseGraph::empty(4).unwrap(); 3];
        assert_eq!(connectivity_fraction(&empty).unwrap(), 0.0);
        let mut rng = seeded(9);
        for trial in 0..300 {
            let g = prior_sample(
                1 + trial % 9,
                &GraphSpec::unattributed(0.25).unwrap(),
                &mut rng,
            )
            .unwrap();
            assert_eq!(is_connected(&g), crate::oracle::is_connected(&g));
        }
    }

    #[test]
    fn identical_sets_and_ratio_one() {
        let mut rng = seeded(10);
        let spec = GraphSpec::unattributed(0.3).unwrap();
        let r: Vec<_> = (0..10)
            .map(|_| prior_sample(8, &spec, &mut rng).unwrap())
            .collect();
        let t: Vec<_> = (0..10)
            .map(|_| prior_sample(8, &spec, &mut rng).unwrap())
            .collect();
        let rep = evaluate(&r, &r, Some(&t), &KernelWidths::default()).unwrap();
        for m in &rep.metrics {
            assert!(m.mmd2 <= 1e-12);
        }
        assert_eq!(rep.connectivity, rep.reference_connectivity);
        let rep = evaluate(&t, &r, Some(&t), &KernelWidths::default()).unwrap();
        for m in &rep.metrics {
            assert!((m.ratio.unwrap() - 1.0).abs() < 1e-12);
        }
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["orbit"], "not computed");
    }
}
