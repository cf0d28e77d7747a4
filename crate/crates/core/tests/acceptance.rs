//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Arguments that do not start with `-` select criteria by substring of
//! their id, e.g. `cargo test --test acceptance -- c08 c09`.

use std::time::{Duration, Instant};

use graphdiff_core::datasets::{
    dataset_stats, gen_er, gen_sbm, write_dataset, Dataset, DatasetHeader, SbmParams,
};
use graphdiff_core::graph::num_pairs;
use graphdiff_core::metrics::{evaluate, KernelWidths, Metric};
use graphdiff_core::nn::{
    read_checkpoint, train_epochs, write_checkpoint, Checkpoint, DiffusionSetup, EpochConfig,
    NetworkConfig, OptimizerConfig, TrainState,
};
use graphdiff_core::noise::{build_schedule, prior_sample, ScheduleKind};
use graphdiff_core::random::seeded;
use graphdiff_core::sampler::{generate, sample_one, Denoiser, NodeCountSource, SamplerConfig};
use graphdiff_core::verify::{
    check_gradients, check_lemma, check_loss_unbiased, check_noise, check_posterior,
    check_reverse_step, check_vacant, GradCheck, LemmaCheck, LossCheck, NoiseCheck, PosteriorCheck,
    ReverseStepCheck, VacantCheck, VerifyReport,
};
use graphdiff_core::{Error, GraphSpec, Result, SparseGraph};

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_report(r: VerifyReport, limit: Option<(Duration, Duration)>) -> Outcome {
    let mut detail: Vec<String> = r
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} = {:.4e} ({} {:.4e})",
                c.name, c.value, c.relation, c.threshold
            )
        })
        .collect();
    let mut passed = r.passed;
    if let Some((took, max)) = limit {
        passed &= took < max;
        detail.push(format!(
            "runtime {:.1}s (limit {}s)",
            took.as_secs_f64(),
            max.as_secs()
        ));
    }
    Outcome {
        passed,
        detail: detail.join("; "),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn c01() -> Result<Outcome> {
    let (r, took) = timed(|| {
        check_noise(&NoiseCheck {
            seed: 101,
            ..NoiseCheck::default()
        })
    });
    Ok(from_report(r?, Some((took, Duration::from_secs(300)))))
}

fn c02() -> Result<Outcome> {
    let (r, took) = timed(|| {
        check_vacant(&VacantCheck {
            seed: 102,
            ..VacantCheck::default()
        })
    });
    Ok(from_report(r?, Some((took, Duration::from_secs(120)))))
}

fn c03() -> Result<Outcome> {
    let (r, took) = timed(|| {
        check_lemma(&LemmaCheck {
            seed: 103,
            ..LemmaCheck::default()
        })
    });
    Ok(from_report(r?, Some((took, Duration::from_secs(300)))))
}

fn c04() -> Result<Outcome> {
    Ok(from_report(
        check_loss_unbiased(&LossCheck {
            seed: 104,
            ..LossCheck::default()
        })?,
        None,
    ))
}

fn c05() -> Result<Outcome> {
    let (r, took) = timed(|| {
        check_gradients(&GradCheck {
            seed: 105,
            ..GradCheck::default()
        })
    });
    Ok(from_report(r?, Some((took, Duration::from_secs(120)))))
}

fn c06() -> Result<Outcome> {
    Ok(from_report(
        check_posterior(&PosteriorCheck {
            seed: 106,
            ..PosteriorCheck::default()
        })?,
        None,
    ))
}

fn c07() -> Result<Outcome> {
    Ok(from_report(
        check_reverse_step(&ReverseStepCheck {
            seed: 107,
            ..ReverseStepCheck::default()
        })?,
        None,
    ))
}

const DIFFUSION_STEPS: usize = 200;

struct Trained {
    config: NetworkConfig,
    setup: DiffusionSetup,
    state: TrainState,
    train: Vec<SparseGraph>,
    held_out: Vec<SparseGraph>,
    minutes: f64,
}

fn desk_config() -> NetworkConfig {
    NetworkConfig {
        layers: 3,
        dx: 32,
        de: 16,
        dg: 16,
        heads: 4,
        lambda: 0.5,
        ..NetworkConfig::default()
    }
}

fn train_model(
    train: Vec<SparseGraph>,
    held_out: Vec<SparseGraph>,
    epochs: usize,
    seed: u64,
) -> Result<Trained> {
    let stats = dataset_stats(&train, 1, 2)?;
    let setup = DiffusionSetup {
        schedule: build_schedule(DIFFUSION_STEPS, ScheduleKind::Cosine)?,
        spec: stats.spec()?,
    };
    let config = desk_config();
    let opt = OptimizerConfig {
        lr: 2e-3,
        ..OptimizerConfig::default()
    };
    let mut rng = seeded(seed);
    let mut state = TrainState::new(config.clone(), opt, &mut rng)?;
    let epoch_cfg = EpochConfig {
        epochs,
        batch_size: 16,
        lambda: config.lambda,
        augment: true,
    };
    let start = Instant::now();
    train_epochs(&mut state, &setup, &train, &epoch_cfg, &mut rng, |r, _| {
        if r.epoch % 25 == 0 {
            eprintln!(
                "    epoch {:4} loss {:.4} ({:.0}s)",
                r.epoch,
                r.mean_loss,
                start.elapsed().as_secs_f64()
            );
        }
        Ok(())
    })?;
    Ok(Trained {
        config,
        setup,
        state,
        train,
        held_out,
        minutes: start.elapsed().as_secs_f64() / 60.0,
    })
}

fn sample_set(t: &Trained, steps: usize, count: usize, seed: u64) -> Result<Vec<SparseGraph>> {
    let model = Denoiser {
        weights: &t.state.weights,
        config: &t.config,
        setup: &t.setup,
    };
    let stats = dataset_stats(&t.train, 1, 2)?;
    let cfg = SamplerConfig {
        inference_steps: steps,
        lambda: t.config.lambda,
        seed,
    };
    generate(
        model,
        &NodeCountSource::Empirical(stats.node_counts),
        &cfg,
        count,
    )
}

fn prior_set(t: &Trained, count: usize, seed: u64) -> Result<Vec<SparseGraph>> {
    let stats = dataset_stats(&t.train, 1, 2)?;
    let nodes = NodeCountSource::Empirical(stats.node_counts);
    let mut rng = seeded(seed);
    (0..count)
        .map(|_| prior_sample(nodes.draw(&mut rng)?, &t.setup.spec, &mut rng))
        .collect()
}

fn end_to_end(t: &Trained, metric: Metric, label: &str) -> Result<(bool, String)> {
    let widths = KernelWidths::default();
    let generated = sample_set(t, 0, 64, 11)?;
    let prior = prior_set(t, 64, 12)?;
    let gen_r = evaluate(&generated, &t.held_out, None, &widths)?;
    let prior_r = evaluate(&prior, &t.held_out, None, &widths)?;
    let (g, p) = (gen_r.get(metric).mmd2, prior_r.get(metric).mmd2);
    let toward = (gen_r.connectivity - gen_r.reference_connectivity).abs()
        <= (prior_r.connectivity - prior_r.reference_connectivity).abs();
    let ok = g <= 0.5 * p && toward && t.minutes <= 30.0;
    Ok((
        ok,
        format!(
            "{label}: {}-MMD² generated {g:.4e} vs prior {p:.4e} (need <= {:.4e}); connected {:.2} / prior {:.2} / ref {:.2}; trained {:.1} min",
            metric.name(),
            0.5 * p,
            gen_r.connectivity,
            prior_r.connectivity,
            gen_r.reference_connectivity,
            t.minutes
        ),
    ))
}

fn er_model() -> Result<Trained> {
    let mut rng = seeded(801);
    let graphs = gen_er(264, 16, 16, 0.15, &mut rng)?;
    let (train, held) = graphs.split_at(200);
    train_model(train.to_vec(), held.to_vec(), 150, 802)
}

fn sbm_model() -> Result<Trained> {
    let mut rng = seeded(811);
    let params = SbmParams {
        blocks_min: 2,
        blocks_max: 2,
        block_size_min: 11,
        block_size_max: 13,
        ..SbmParams::default()
    };
    let graphs = gen_sbm(264, &params, &mut rng)?;
    let (train, held) = graphs.split_at(200);
    train_model(train.to_vec(), held.to_vec(), 150, 812)
}

fn c08(er: &Trained, sbm: &Trained) -> Result<Outcome> {
    let (a, da) = end_to_end(er, Metric::Degree, "ER")?;
    let (b, db) = end_to_end(sbm, Metric::Clustering, "SBM")?;
    Ok(Outcome {
        passed: a && b,
        detail: format!("{da}; {db}"),
    })
}

fn c09(er: &Trained) -> Result<Outcome> {
    let widths = KernelWidths::default();
    let mut mmd = Vec::new();
    let mut valid = true;
    for s in [200, 100, 40] {
        let set = sample_set(er, s, 64, 21)?;
        for g in &set {
            valid &= g.validate_labels(&er.setup.spec).is_ok() && g.n() == 16;
        }
        mmd.push(
            evaluate(&set, &er.held_out, None, &widths)?
                .get(Metric::Degree)
                .mmd2,
        );
    }
    let ok = valid && mmd[2] <= 2.0 * mmd[0];
    Ok(Outcome {
        passed: ok,
        detail: format!(
            "all valid: {valid}; degree-MMD² S=200 {:.4e}, S=100 {:.4e}, S=40 {:.4e} (need S=40 <= {:.4e})",
            mmd[0],
            mmd[1],
            mmd[2],
            2.0 * mmd[0]
        ),
    })
}

fn c10() -> Result<Outcome> {
    let n = 200;
    let config = NetworkConfig {
        layers: 2,
        dx: 16,
        de: 8,
        dg: 8,
        heads: 2,
        ..NetworkConfig::default()
    };
    let setup = DiffusionSetup {
        schedule: build_schedule(20, ScheduleKind::Cosine)?,
        spec: GraphSpec::unattributed(0.02)?,
    };
    let weights = graphdiff_core::nn::init_network(&config, &mut seeded(1001))?;
    let model = Denoiser {
        weights: &weights,
        config: &config,
        setup: &setup,
    };
    let mut worst_slack = i64::MAX;
    let mut steps = 0;
    let mut violations = 0;
    for (lambda, seed) in [(0.1, 1002), (0.25, 1003)] {
        let bound_q = (lambda * num_pairs(n) as f64).ceil() as usize;
        let cfg = SamplerConfig {
            inference_steps: 0,
            lambda,
            seed,
        };
        sample_one(model, n, &cfg, &mut seeded(seed), |s| {
            steps += 1;
            let bound = s.noisy_edges + bound_q;
            if s.peak_live_edge_rows > bound {
                violations += 1;
            }
            worst_slack = worst_slack.min(bound as i64 - s.peak_live_edge_rows as i64);
        })?;
    }
    Ok(Outcome {
        passed: violations == 0 && steps > 0,
        detail: format!(
            "{steps} steps at n={n}, {violations} over the bound, min slack {worst_slack} rows"
        ),
    })
}

/// Checkpoint bytes, `(steps, mean loss)` per epoch, sampled dataset bytes.
type RunBytes = (Vec<u8>, Vec<(u64, f64)>, Vec<u8>);

fn c11() -> Result<Outcome> {
    let mut rng = seeded(1101);
    let train = gen_er(16, 8, 10, 0.3, &mut rng)?;
    let run = |seed: u64| -> Result<RunBytes> {
        let stats = dataset_stats(&train, 1, 2)?;
        let setup = DiffusionSetup {
            schedule: build_schedule(20, ScheduleKind::Cosine)?,
            spec: stats.spec()?,
        };
        let config = NetworkConfig {
            layers: 2,
            dx: 16,
            de: 8,
            dg: 8,
            heads: 2,
            ..NetworkConfig::default()
        };
        let mut rng = seeded(seed);
        let mut state = TrainState::new(config.clone(), OptimizerConfig::default(), &mut rng)?;
        let cfg = EpochConfig {
            epochs: 3,
            batch_size: 4,
            lambda: 0.5,
            augment: true,
        };
        let log = train_epochs(&mut state, &setup, &train, &cfg, &mut rng, |_, _| Ok(()))?;
        let ckpt = Checkpoint {
            config: config.clone(),
            meta: serde_json::json!({ "seed": seed }),
            weights: state.weights.clone(),
        };
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &ckpt)?;
        let model = Denoiser {
            weights: &state.weights,
            config: &config,
            setup: &setup,
        };
        let sampled = generate(
            model,
            &NodeCountSource::Fixed(9),
            &SamplerConfig {
                seed,
                ..SamplerConfig::default()
            },
            4,
        )?;
        let mut out = Vec::new();
        write_dataset(&mut out, &Dataset::new(DatasetHeader::new(1, 2), sampled))?;
        Ok((
            bytes,
            log.iter().map(|r| (r.steps, r.mean_loss)).collect(),
            out,
        ))
    };
    let (ckpt_a, log_a, sample_a) = run(7)?;
    let (ckpt_b, log_b, sample_b) = run(7)?;
    let reloaded = read_checkpoint(ckpt_a.as_slice())?;
    let mut again = Vec::new();
    write_checkpoint(&mut again, &reloaded)?;
    let round_trip = again == ckpt_a;
    let train_repro = ckpt_a == ckpt_b && log_a == log_b;
    let sample_repro = sample_a == sample_b;
    Ok(Outcome {
        passed: round_trip && train_repro && sample_repro,
        detail: format!(
            "checkpoint round trip identical: {round_trip}; training reproducible: {train_repro}; sampling reproducible: {sample_repro}"
        ),
    })
}

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected = |id: &str| filters.is_empty() || filters.iter().any(|f| id.contains(f.as_str()));
    let mut results: Vec<(String, Result<Outcome>)> = Vec::new();
    let mut run = |id: &str, f: &mut dyn FnMut() -> Result<Outcome>| {
        if !selected(id) {
            return;
        }
        let (r, took) = timed(f);
        let line = match &r {
            Ok(o) => format!(
                "{} {id}: {} [{:.1}s]",
                if o.passed { "PASS" } else { "FAIL" },
                o.detail,
                took.as_secs_f64()
            ),
            Err(e) => format!("FAIL {id}: error: {e} [{:.1}s]", took.as_secs_f64()),
        };
        println!("{line}");
        results.push((id.to_string(), r));
    };
    run("c01_noise_oracle", &mut c01);
    run("c02_vacant_uniformity", &mut c02);
    run("c03_tail_bound", &mut c03);
    run("c04_loss_unbiased", &mut c04);
    run("c05_gradients", &mut c05);
    run("c06_posterior_composition", &mut c06);
    run("c07_reverse_step", &mut c07);
    if selected("c08_end_to_end") || selected("c09_fewer_steps") {
        let er = er_model();
        if selected("c08_end_to_end") {
            let sbm = sbm_model();
            run("c08_end_to_end", &mut || match (&er, &sbm) {
                (Ok(er), Ok(sbm)) => c08(er, sbm),
                (Err(e), _) | (_, Err(e)) => Err(Error::Numerical(format!("training failed: {e}"))),
            });
        }
        run("c09_fewer_steps", &mut || match &er {
            Ok(er) => c09(er),
            Err(e) => Err(Error::Numerical(format!("training failed: {e}"))),
        });
    }
    run("c10_live_rows", &mut c10);
    run("c11_persistence", &mut c11);
    let failed = results
        .iter()
        .filter(|(_, r)| !matches!(r, Ok(o) if o.passed))
        .count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
