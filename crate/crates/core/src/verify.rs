//! Statistical and numerical self-checks comparing the sparse code paths
//! with the dense references in [`crate::oracle`].
//!
//! Each check takes its sizes explicitly so the same code runs both as a
//! quick command-line smoke check and at full scale in the acceptance tests.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::autodiff::Matrix;
use crate::encodings::EncodingConfig;
use crate::error::{Error, Result};
use crate::graph::{num_pairs, pair_from_index_unchecked, GraphSpec, SparseGraph};
use crate::nn::{
    forward, init_network, loss, loss_and_gradients, loss_value, prepare_input, DiffusionSetup,
    Mode, NetworkConfig, NetworkWeights, Prediction,
};
use crate::noise::{
    apply_noise, build_schedule, lemma_bound, lemma_monte_carlo, prior_sample, sample_vacant_pairs,
    transition_matrix, LemmaBoundQuery, NoiseSchedule, PosteriorKernel, ScheduleKind,
    TransitionMatrix,
};
use crate::oracle;
use crate::query::sample_queries;
use crate::random::{seeded, split_seeds};
use crate::sampler::{denoise_step, Denoiser};
use crate::stats::chi_square;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyKind {
    Noise,
    Lemma,
    Gradcheck,
    LossUnbiased,
    Posterior,
}

impl VerifyKind {
    pub const ALL: [VerifyKind; 5] = [
        VerifyKind::Noise,
        VerifyKind::Lemma,
        VerifyKind::Gradcheck,
        VerifyKind::LossUnbiased,
        VerifyKind::Posterior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VerifyKind::Noise => "noise",
            VerifyKind::Lemma => "lemma",
            VerifyKind::Gradcheck => "gradcheck",
            VerifyKind::LossUnbiased => "loss-unbiased",
            VerifyKind::Posterior => "posterior",
        }
    }
}

impl FromStr for VerifyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VerifyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown verification {s:?} (noise, lemma, gradcheck, loss-unbiased, posterior)")))
    }
}

/// One measured quantity against its gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<"`, `"<="` or `">"`: how `value` must compare with `threshold`
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "<",
            passed: value < threshold,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "<=",
            passed: value <= threshold,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: ">",
            passed: value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub kind: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn new(kind: &str, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        VerifyReport {
            kind: kind.into(),
            passed,
            checks,
        }
    }

    pub fn merge(kind: &str, parts: Vec<VerifyReport>) -> Self {
        VerifyReport::new(kind, parts.into_iter().flat_map(|r| r.checks).collect())
    }
}

fn random_distribution<R: Rng + ?Sized>(classes: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Sizes for the forward-noise slot test.
#[derive(Debug, Clone, Copy)]
pub struct NoiseCheck {
    pub graphs: usize,
    pub max_n: usize,
    pub max_classes: usize,
    pub timesteps: usize,
    pub samples: usize,
    /// family-wise significance level over all slots
    pub alpha: f64,
    pub seed: u64,
}

impl Default for NoiseCheck {
    fn default() -> Self {
        NoiseCheck {
            graphs: 20,
            max_n: 7,
            max_classes: 3,
            timesteps: 5,
            samples: 100_000,
            alpha: 1e-3,
            seed: 0,
        }
    }
}

/// Per-slot p-values of one (graph, t) case.
fn noise_case(
    g: &SparseGraph,
    spec: &GraphSpec,
    schedule: &NoiseSchedule,
    t: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = g.n();
    let pairs = num_pairs(n);
    let qx = transition_matrix(schedule, t, &spec.node_marginals, true)?;
    let qy = transition_matrix(schedule, t, &spec.edge_marginals, true)?;
    let (node_rows, pair_rows) = oracle::slot_distributions(g, &qx, &qy);
    let mut node_counts = vec![vec![0u64; spec.a]; n];
    let mut pair_counts = vec![vec![0u64; spec.b]; pairs];
    let mut rng = seeded(seed);
    for _ in 0..samples {
        let h = apply_noise(g, t, schedule, spec, &mut rng)?;
        for (v, &x) in h.node_labels().iter().enumerate() {
            node_counts[v][x] += 1;
        }
        for (idx, &y) in h.edge_indices().iter().zip(h.edge_labels()) {
            pair_counts[*idx][y] += 1;
        }
    }
    for c in &mut pair_counts {
        c[0] = samples as u64 - c[1..].iter().sum::<u64>();
    }
    let mut p = Vec::with_capacity(n + pairs);
    for (c, e) in node_counts
        .iter()
        .zip(&node_rows)
        .chain(pair_counts.iter().zip(&pair_rows))
    {
        p.push(chi_square(c, e).p_value);
    }
    Ok(p)
}

/// Sparse forward noising against per-slot rows of the cumulative kernels.
///
/// Every slot gets its own chi-square test. The gate is family-wise: the
/// smallest p-value must exceed `alpha / slots`. The number of slots below
/// `alpha` itself is reported next to its expectation under the null.
pub fn check_noise(opts: &NoiseCheck) -> Result<VerifyReport> {
    let mut rng = seeded(opts.seed);
    let mut cases = Vec::new();
    for _ in 0..opts.graphs {
        let n = rng.random_range(2..=opts.max_n.max(2));
        let a = rng.random_range(1..=opts.max_classes);
        let b = rng.random_range(2..=opts.max_classes.max(2));
        let spec = GraphSpec::new(
            random_distribution(a, &mut rng),
            random_distribution(b, &mut rng),
        )?;
        let g = prior_sample(n, &spec, &mut rng)?;
        let steps = 50;
        let schedule = build_schedule(steps, ScheduleKind::Cosine)?;
        let mut ts: Vec<usize> = (1..=steps).collect();
        ts.shuffle(&mut rng);
        for &t in ts.iter().take(opts.timesteps) {
            cases.push((g.clone(), spec.clone(), schedule.clone(), t));
        }
    }
    let seeds = split_seeds(&mut rng, cases.len());
    let results: Vec<Result<Vec<f64>>> = crate::par::map_indexed(cases.len(), |k| {
        let (g, spec, schedule, t) = &cases[k];
        noise_case(g, spec, schedule, *t, opts.samples, seeds[k])
    });
    let mut pvals = Vec::new();
    for r in results {
        pvals.extend(r?);
    }
    let slots = pvals.len();
    let min_p = pvals.iter().copied().fold(1.0, f64::min);
    let below = pvals.iter().filter(|&&p| p <= opts.alpha).count();
    Ok(VerifyReport::new(
        "noise",
        vec![
            Check::above(
                format!("min slot p-value over {slots} slots"),
                min_p,
                opts.alpha / slots as f64,
            ),
            Check::at_most(
                format!(
                    "slots with p <= {} (expected {:.1})",
                    opts.alpha,
                    opts.alpha * slots as f64
                ),
                below as f64,
                f64::INFINITY,
            ),
        ],
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct VacantCheck {
    pub configs: usize,
    pub max_n: usize,
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for VacantCheck {
    fn default() -> Self {
        VacantCheck {
            configs: 10,
            max_n: 8,
            draws: 100_000,
            alpha: 1e-3,
            seed: 0,
        }
    }
}

/// Uniformity of vacant-pair sampling. Each configuration gets one
/// chi-square test over its vacant pairs; every draw must be sorted, unique
/// and disjoint from the occupied pairs.
pub fn check_vacant(opts: &VacantCheck) -> Result<VerifyReport> {
    let mut rng = seeded(opts.seed);
    let mut configs = Vec::new();
    for _ in 0..opts.configs {
        let n = rng.random_range(3..=opts.max_n.max(3));
        let pairs = num_pairs(n);
        let occupied_count = rng.random_range(0..pairs - 1);
        let mut occupied: Vec<usize> =
            rand::seq::index::sample(&mut rng, pairs, occupied_count).into_vec();
        occupied.sort_unstable();
        let vacant = pairs - occupied_count;
        let count = rng.random_range(1..=vacant.div_ceil(2));
        configs.push((n, occupied, count));
    }
    let seeds = split_seeds(&mut rng, configs.len());
    let results: Vec<Result<(f64, bool)>> = crate::par::map_indexed(configs.len(), |k| {
        let (n, occupied, count) = &configs[k];
        let mut rng = seeded(seeds[k]);
        let pairs = num_pairs(*n);
        let mut hits = vec![0u64; pairs];
        let mut well_formed = true;
        for _ in 0..opts.draws {
            let got = sample_vacant_pairs(*n, occupied, *count, &mut rng)?;
            well_formed &= got.len() == *count
                && got.windows(2).all(|w| w[0] < w[1])
                && got
                    .iter()
                    .all(|x| occupied.binary_search(x).is_err() && *x < pairs);
            for x in got {
                hits[x] += 1;
            }
        }
        let vacant: Vec<u64> = (0..pairs)
            .filter(|x| occupied.binary_search(x).is_err())
            .map(|x| hits[x])
            .collect();
        Ok((
            crate::stats::chi_square_uniform(&vacant).p_value,
            well_formed,
        ))
    });
    let mut min_p: f64 = 1.0;
    let mut all_ok = true;
    for r in results {
        let (p, ok) = r?;
        min_p = min_p.min(p);
        all_ok &= ok;
    }
    Ok(VerifyReport::new(
        "vacant",
        vec![
            Check::above("min uniformity p-value", min_p, opts.alpha),
            Check::above(
                "draws sorted, unique and vacant",
                f64::from(u8::from(all_ok)),
                0.5,
            ),
        ],
    ))
}

#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub cases: Vec<(usize, f64, f64)>,
    pub trials: usize,
    /// `(n, r, k)` compared against the exact binomial tail
    pub exact_case: (usize, f64, f64),
    pub seed: u64,
}

impl Default for LemmaCheck {
    fn default() -> Self {
        LemmaCheck {
            cases: vec![(20, 0.05, 0.15), (50, 0.05, 0.10), (100, 0.05, 0.08)],
            trials: 1_000_000,
            exact_case: (10, 0.05, 0.15),
            seed: 0,
        }
    }
}

/// Monte-Carlo tail of the edge ratio against the closed-form bound, plus an
/// exact binomial tail cross-check of the Monte-Carlo estimator.
pub fn check_lemma(opts: &LemmaCheck) -> Result<VerifyReport> {
    let mut rng = seeded(opts.seed);
    let mut checks = Vec::new();
    for &(n, r, k) in &opts.cases {
        let bound = lemma_bound(LemmaBoundQuery { n, r, k })?;
        let mc = lemma_monte_carlo(n, r, k, opts.trials, &mut rng)?;
        // log(0) = -inf sits below any bound
        let log_mc = if mc > 0.0 { mc.ln() } else { f64::NEG_INFINITY };
        checks.push(Check::at_most(
            format!("log tail n={n} r={r} k={k} (bound {bound:.4})"),
            log_mc,
            bound,
        ));
    }
    let (n, r, k) = opts.exact_case;
    let pairs = num_pairs(n) as u64;
    let threshold = (k * pairs as f64 - 1e-9).ceil() as u64;
    let exact = oracle::binomial_upper_tail(pairs, r, threshold);
    let mc = lemma_monte_carlo(n, r, k, opts.trials, &mut rng)?;
    let sigma = (exact * (1.0 - exact) / opts.trials as f64).sqrt();
    let z = if sigma > 0.0 {
        (mc - exact).abs() / sigma
    } else {
        (mc - exact).abs() * f64::INFINITY
    };
    checks.push(Check::at_most(
        format!("|MC - exact| / sigma at n={n} (exact {exact:.6})"),
        z,
        3.0,
    ));
    Ok(VerifyReport::new("lemma", checks))
}

#[derive(Debug, Clone)]
pub struct LossCheck {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub draws: usize,
    pub c: f64,
    pub seed: u64,
}

impl Default for LossCheck {
    fn default() -> Self {
        LossCheck {
            n: 6,
            lambdas: vec![0.2, 0.5, 1.0],
            draws: 100_000,
            c: 5.0,
            seed: 0,
        }
    }
}

/// Mean of the rescaled query-edge loss over random query sets against the
/// dense all-pairs edge loss, for fixed synthetic predictions.
pub fn check_loss_unbiased(opts: &LossCheck) -> Result<VerifyReport> {
    let mut rng = seeded(opts.seed);
    let spec = GraphSpec::new(vec![0.5, 0.5], vec![0.6, 0.3, 0.1])?;
    let clean = prior_sample(opts.n, &spec, &mut rng)?;
    let pairs = num_pairs(opts.n);
    let node = Matrix::from_vec(
        opts.n,
        2,
        (0..opts.n)
            .flat_map(|_| random_distribution(2, &mut rng))
            .collect(),
    );
    let edge_all = Matrix::from_vec(
        pairs,
        3,
        (0..pairs)
            .flat_map(|_| random_distribution(3, &mut rng))
            .collect(),
    );
    let (_, dense_edge) = oracle::dense_loss(&node, &edge_all, &clean, opts.c);
    let mut checks = Vec::new();
    for &lambda in &opts.lambdas {
        let draws = if lambda >= 1.0 {
            opts.draws.min(100)
        } else {
            opts.draws
        };
        let seeds = split_seeds(&mut rng, draws);
        let per: Vec<Result<f64>> = crate::par::map_indexed(draws, |d| {
            let q = sample_queries(opts.n, lambda, &mut seeded(seeds[d]))?;
            let mut rows = Vec::with_capacity(q.len() * 3);
            for &idx in &q {
                rows.extend_from_slice(edge_all.row(idx));
            }
            let pred = Prediction {
                node: node.clone(),
                edge: Matrix::from_vec(q.len(), 3, rows),
                queries: q,
            };
            Ok(loss(&pred, &clean, opts.c)?.edge)
        });
        let values: Vec<f64> = per.into_iter().collect::<Result<_>>()?;
        if lambda >= 1.0 {
            let worst = values
                .iter()
                .map(|v| (v - dense_edge).abs() / dense_edge)
                .fold(0.0, f64::max);
            checks.push(Check::below(
                format!("lambda={lambda}: max relative error"),
                worst,
                1e-10,
            ));
        } else {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            checks.push(Check::below(
                format!("lambda={lambda}: relative error of the mean over {draws} draws"),
                (mean - dense_edge).abs() / dense_edge,
                0.01,
            ));
        }
    }
    // all pairs queried: sparse total equals the dense objective
    let q: Vec<usize> = (0..pairs).collect();
    let pred = Prediction {
        node: node.clone(),
        edge: edge_all.clone(),
        queries: q,
    };
    let sparse = loss(&pred, &clean, opts.c)?.total;
    let (dn, de) = oracle::dense_loss(&node, &edge_all, &clean, opts.c);
    checks.push(Check::below(
        "full query set: |sparse - dense| total",
        (sparse - dn - de).abs(),
        1e-10,
    ));
    Ok(VerifyReport::new("loss-unbiased", checks))
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub n: usize,
    pub config: NetworkConfig,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            n: 5,
            config: NetworkConfig {
                layers: 2,
                dx: 16,
                de: 8,
                dg: 8,
                heads: 4,
                a: 2,
                b: 3,
                encoding: EncodingConfig {
                    k_eig: 4,
                    ..EncodingConfig::default()
                },
                ..NetworkConfig::default()
            },
            step: 1e-5,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

/// Largest `‖analytic - numeric‖_∞ / max(‖analytic‖_∞, ‖numeric‖_∞)` over
/// every tensor, with central differences.
pub fn check_gradients(opts: &GradCheck) -> Result<VerifyReport> {
    let cfg = &opts.config;
    let mut rng = seeded(opts.seed);
    let w = init_network(cfg, &mut rng)?;
    let spec = GraphSpec::new(
        random_distribution(cfg.a, &mut rng),
        random_distribution(cfg.b, &mut rng),
    )?;
    let clean = prior_sample(
        opts.n,
        &GraphSpec::new(spec.node_marginals.clone(), vec![0.5, 0.3, 0.2])?,
        &mut rng,
    )?;
    let schedule = build_schedule(10, ScheduleKind::Cosine)?;
    let noisy = apply_noise(&clean, 4, &schedule, &spec, &mut rng)?;
    let queries = sample_queries(opts.n, 0.6, &mut rng)?;
    let input = prepare_input(&noisy, &queries, 0.4, cfg)?;
    let (_, analytic) = loss_and_gradients(&w, cfg, &input, &clean)?;

    let h = opts.step;
    let numeric: Vec<Result<Matrix>> = crate::par::map_indexed(w.len(), |k| {
        let mut local: NetworkWeights = w.clone();
        let len = w.tensors()[k].len();
        let mut g = Matrix::zeros(w.tensors()[k].rows, w.tensors()[k].cols);
        for e in 0..len {
            let orig = w.tensors()[k].data[e];
            local.tensors_mut()[k].data[e] = orig + h;
            let up = loss_value(&local, cfg, &input, &clean)?.total;
            local.tensors_mut()[k].data[e] = orig - h;
            let down = loss_value(&local, cfg, &input, &clean)?.total;
            local.tensors_mut()[k].data[e] = orig;
            g.data[e] = (up - down) / (2.0 * h);
        }
        Ok(g)
    });
    let mut worst: (f64, String) = (0.0, String::new());
    for ((name, a), num) in w.names().iter().zip(&analytic).zip(numeric) {
        let num = num?;
        let scale = a
            .data
            .iter()
            .chain(&num.data)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        let err = a
            .data
            .iter()
            .zip(&num.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / scale;
        if err > worst.0 {
            worst = (err, name.clone());
        }
    }
    Ok(VerifyReport::new(
        "gradcheck",
        vec![Check::below(
            format!(
                "max relative error over {} tensors (worst: {})",
                w.len(),
                worst.1
            ),
            worst.0,
            opts.tolerance,
        )],
    ))
}

#[derive(Debug, Clone)]
pub struct PosteriorCheck {
    pub chains: usize,
    pub max_classes: usize,
    pub steps: usize,
    pub strides: Vec<usize>,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PosteriorCheck {
    fn default() -> Self {
        PosteriorCheck {
            chains: 20,
            max_classes: 4,
            steps: 8,
            strides: vec![2, 4, 8],
            tolerance: 1e-10,
            seed: 0,
        }
    }
}

/// The closed-form k-step posterior against explicit matrix products and
/// against chaining k single-step posteriors.
pub fn check_posterior(opts: &PosteriorCheck) -> Result<VerifyReport> {
    let mut rng = seeded(opts.seed);
    let mut worst_direct: f64 = 0.0;
    let mut worst_composed: f64 = 0.0;
    for _ in 0..opts.chains {
        let c = rng.random_range(2..=opts.max_classes.max(2));
        let p = random_distribution(c, &mut rng);
        let alphas: Vec<f64> = (0..opts.steps)
            .map(|_| rng.random_range(0.05..0.98))
            .collect();
        let schedule = NoiseSchedule::from_alphas(alphas.clone())?;
        let steps: Vec<TransitionMatrix> = alphas
            .iter()
            .map(|&a| TransitionMatrix::marginal(a, &p))
            .collect();
        for &k in &opts.strides {
            for t in k..=opts.steps {
                let kernel = PosteriorKernel::new(&schedule, t, k, &p)?;
                for z in 0..c {
                    for x0 in 0..c {
                        let mut one_hot = vec![0.0; c];
                        one_hot[x0] = 1.0;
                        let got = kernel.posterior(z, &one_hot)?;
                        let direct = oracle::dense_posterior(&steps, t, k, z, x0);
                        let composed = oracle::composed_posterior(&steps, t, k, z, x0);
                        for j in 0..c {
                            worst_direct = worst_direct.max((got[j] - direct[j]).abs());
                            worst_composed = worst_composed.max((got[j] - composed[j]).abs());
                        }
                    }
                }
            }
        }
    }
    Ok(VerifyReport::new(
        "posterior",
        vec![
            Check::below(
                "max |closed form - explicit products|",
                worst_direct,
                opts.tolerance,
            ),
            Check::below(
                "max |closed form - composed single steps|",
                worst_composed,
                opts.tolerance,
            ),
        ],
    ))
}

#[derive(Debug, Clone)]
pub struct ReverseStepCheck {
    pub n: usize,
    pub steps: usize,
    pub t: usize,
    pub repeats: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ReverseStepCheck {
    fn default() -> Self {
        ReverseStepCheck {
            n: 6,
            steps: 10,
            t: 5,
            repeats: 100_000,
            alpha: 1e-3,
            seed: 0,
        }
    }
}

/// Per-slot label counts for nodes and pairs.
type SlotCounts = (Vec<Vec<u64>>, Vec<Vec<u64>>);

/// With every pair queried, the law of `G^{t-1}` from the sparse reverse
/// step against per-slot dense reverse kernels built from explicit single-step
/// matrices. One chi-square test per slot, each at `alpha`.
pub fn check_reverse_step(opts: &ReverseStepCheck) -> Result<VerifyReport> {
    let mut rng = seeded(opts.seed);
    let cfg = NetworkConfig {
        layers: 2,
        dx: 16,
        de: 8,
        dg: 8,
        heads: 2,
        a: 2,
        b: 3,
        mode: Mode::Transformer,
        encoding: EncodingConfig {
            k_eig: 4,
            ..EncodingConfig::default()
        },
        ..NetworkConfig::default()
    };
    let w = init_network(&cfg, &mut rng)?;
    let spec = GraphSpec::new(vec![0.6, 0.4], vec![0.55, 0.3, 0.15])?;
    let schedule = build_schedule(opts.steps, ScheduleKind::Cosine)?;
    let singles: Vec<TransitionMatrix> = (1..=opts.steps)
        .map(|s| transition_matrix(&schedule, s, &spec.edge_marginals, false))
        .collect::<Result<_>>()?;
    let node_singles: Vec<TransitionMatrix> = (1..=opts.steps)
        .map(|s| transition_matrix(&schedule, s, &spec.node_marginals, false))
        .collect::<Result<_>>()?;
    let setup = DiffusionSetup {
        schedule: schedule.clone(),
        spec: spec.clone(),
    };
    let g_t = prior_sample(opts.n, &spec, &mut rng)?;
    let n = opts.n;
    let pairs = num_pairs(n);

    let all: Vec<usize> = (0..pairs).collect();
    let pred = forward(
        &w,
        &cfg,
        &prepare_input(&g_t, &all, opts.t as f64 / opts.steps as f64, &cfg)?,
    )?;
    let node_expect: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            oracle::dense_reverse_slot(
                &node_singles,
                opts.t,
                1,
                g_t.node_labels()[v],
                pred.node.row(v),
            )
        })
        .collect();
    let pair_expect: Vec<Vec<f64>> = (0..pairs)
        .map(|idx| {
            let (i, j) = pair_from_index_unchecked(idx, n);
            oracle::dense_reverse_slot(
                &singles,
                opts.t,
                1,
                g_t.edge_label(i, j),
                pred.edge.row(idx),
            )
        })
        .collect();

    let model = Denoiser {
        weights: &w,
        config: &cfg,
        setup: &setup,
    };
    let chunks = 64.min(opts.repeats.max(1));
    let seeds = split_seeds(&mut rng, chunks);
    let partial: Vec<Result<SlotCounts>> =
        crate::par::map_indexed(chunks, |c| {
            let mut rng = seeded(seeds[c]);
            let reps = opts.repeats / chunks + usize::from(c < opts.repeats % chunks);
            let mut nc = vec![vec![0u64; 2]; n];
            let mut pc = vec![vec![0u64; 3]; pairs];
            for _ in 0..reps {
                let (h, _) = denoise_step(model, &g_t, opts.t, 1, 1.0, &mut rng)?;
                for (v, &x) in h.node_labels().iter().enumerate() {
                    nc[v][x] += 1;
                }
                for (idx, &y) in h.edge_indices().iter().zip(h.edge_labels()) {
                    pc[*idx][y] += 1;
                }
            }
            for c in pc.iter_mut() {
                c[0] = reps as u64 - c[1..].iter().sum::<u64>();
            }
            Ok((nc, pc))
        });
    let mut nc = vec![vec![0u64; 2]; n];
    let mut pc = vec![vec![0u64; 3]; pairs];
    for part in partial {
        let (a, b) = part?;
        for (x, y) in nc.iter_mut().zip(a) {
            x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
        }
        for (x, y) in pc.iter_mut().zip(b) {
            x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
        }
    }
    let mut min_p: f64 = 1.0;
    for (c, e) in nc
        .iter()
        .zip(&node_expect)
        .chain(pc.iter().zip(&pair_expect))
    {
        min_p = min_p.min(chi_square(c, e).p_value);
    }
    Ok(VerifyReport::new(
        "reverse-step",
        vec![Check::above(
            format!("min slot p-value over {} slots", n + pairs),
            min_p,
            opts.alpha,
        )],
    ))
}

/// Runs one suite at command-line scale (smaller than the acceptance sizes).
pub fn run(kind: VerifyKind, seed: u64) -> Result<VerifyReport> {
    match kind {
        VerifyKind::Noise => Ok(VerifyReport::merge(
            "noise",
            vec![
                check_noise(&NoiseCheck {
                    graphs: 4,
                    samples: 20_000,
                    seed,
                    ..NoiseCheck::default()
                })?,
                check_vacant(&VacantCheck {
                    configs: 4,
                    draws: 20_000,
                    seed,
                    ..VacantCheck::default()
                })?,
            ],
        )),
        VerifyKind::Lemma => check_lemma(&LemmaCheck {
            trials: 200_000,
            seed,
            ..LemmaCheck::default()
        }),
        VerifyKind::Gradcheck => check_gradients(&GradCheck {
            seed,
            ..GradCheck::default()
        }),
        VerifyKind::LossUnbiased => check_loss_unbiased(&LossCheck {
            draws: 20_000,
            seed,
            ..LossCheck::default()
        }),
        VerifyKind::Posterior => Ok(VerifyReport::merge(
            "posterior",
            vec![
                check_posterior(&PosteriorCheck {
                    seed,
                    ..PosteriorCheck::default()
                })?,
                check_reverse_step(&ReverseStepCheck {
                    repeats: 10_000,
                    seed,
                    ..ReverseStepCheck::default()
                })?,
            ],
        )),
    }
}
