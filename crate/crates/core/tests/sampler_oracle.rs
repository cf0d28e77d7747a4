//! Full reverse chains against the dense per-slot chain marginal.

use graphdiff_core::encodings::EncodingConfig;
use graphdiff_core::graph::num_pairs;
use graphdiff_core::nn::{init_network, DiffusionSetup, NetworkConfig};
use graphdiff_core::noise::{build_schedule, transition_matrix, ScheduleKind};
use graphdiff_core::oracle::dense_chain_marginal;
use graphdiff_core::sampler::{generate, stride_ladder, Denoiser, NodeCountSource, SamplerConfig};
use graphdiff_core::GraphSpec;

/// With a zeroed output head every prediction is uniform, so each pair runs
/// its own Markov chain and the final edge probability has a closed form.
fn edge_density_matches(lambda: f64, inference_steps: usize) {
    let cfg = NetworkConfig {
        layers: 1,
        dx: 8,
        de: 4,
        dg: 4,
        heads: 2,
        encoding: EncodingConfig {
            k_eig: 3,
            ..EncodingConfig::default()
        },
        ..NetworkConfig::default()
    };
    let mut w = init_network(&cfg, &mut graphdiff_core::random::seeded(1)).unwrap();
    for name in ["out.node.w", "out.node.b", "out.edge.w", "out.edge.b"] {
        w.get_mut(name)
            .unwrap()
            .data
            .iter_mut()
            .for_each(|v| *v = 0.0);
    }
    let steps = 12;
    let spec = GraphSpec::unattributed(0.2).unwrap();
    let setup = DiffusionSetup {
        schedule: build_schedule(steps, ScheduleKind::Cosine).unwrap(),
        spec: spec.clone(),
    };
    let singles: Vec<_> = (1..=steps)
        .map(|s| transition_matrix(&setup.schedule, s, &spec.edge_marginals, false).unwrap())
        .collect();
    let ladder = stride_ladder(steps, inference_steps).unwrap();
    let expect = dense_chain_marginal(&singles, &ladder, &spec.edge_marginals, &[0.5, 0.5])[1];

    let n = 7;
    let count = 4000;
    let model = Denoiser {
        weights: &w,
        config: &cfg,
        setup: &setup,
    };
    let sampler = SamplerConfig {
        inference_steps,
        lambda,
        seed: 5,
    };
    let graphs = generate(model, &NodeCountSource::Fixed(n), &sampler, count).unwrap();
    let trials = (count * num_pairs(n)) as f64;
    let edges: usize = graphs.iter().map(|g| g.num_edges()).sum();
    let observed = edges as f64 / trials;
    // pairs within a graph are independent here, so the binomial sd applies
    let sd = (expect * (1.0 - expect) / trials).sqrt();
    assert!(
        (observed - expect).abs() < 5.0 * sd,
        "observed {observed}, expected {expect} (sd {sd})"
    );
}

#[test]
fn full_lambda_every_step() {
    edge_density_matches(1.0, 12);
}

#[test]
fn chunked_every_step() {
    edge_density_matches(0.3, 12);
}

#[test]
fn chunked_strided() {
    edge_density_matches(0.4, 5);
}
