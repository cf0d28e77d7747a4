use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use graphdiff_core::datasets::{self, dataset_stats, Dataset, DatasetHeader};
use graphdiff_core::nn::load_checkpoint;
use graphdiff_core::SparseGraph;
use tempfile::TempDir;

const TINY: &str = r#"
[diffusion]
steps = 20

[model]
layers = 1
dx = 8
de = 4
dg = 4
heads = 2

[model.encoding]
k_eig = 3

[train]
epochs = 1
batch_size = 8
checkpoint_every = 1

[data]
count = 16
n_min = 6
n_max = 9
er_p = 0.3

[sample]
count = 6
"#;

fn graphdiff(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphdiff"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn generate(dir: &Path, out: &str) {
    ok(&graphdiff(
        dir,
        &[
            "generate-data",
            "--config",
            "tiny.toml",
            "--seed",
            "4",
            "--out",
            out,
        ],
    ));
}

fn train(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec![
        "train",
        "--config",
        "tiny.toml",
        "--seed",
        "2",
        "--data",
        "data/dataset.jsonl",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    ok(&graphdiff(dir, &args));
}

/// Loss log lines without the wall-clock column.
fn loss_rows(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("wall_seconds");
            }
            v
        })
        .collect()
}

#[test]
fn generated_dataset_round_trips_and_is_stamped() {
    let dir = setup();
    generate(dir.path(), "data");
    let ds = datasets::load(&dir.path().join("data/dataset.jsonl")).unwrap();
    assert_eq!(ds.graphs.len(), 16);
    assert!(ds.graphs.iter().all(|g| (6..=9).contains(&g.n())));
    assert_eq!(ds.header.seed, Some(4));
    let hash = ds.header.config_hash.clone().unwrap();
    assert_eq!(hash.len(), 16);
    let stats: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("data/dataset_stats.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(stats["config_hash"], hash.as_str());
    assert_eq!(stats["seed"], 4);
    let echo = fs::read_to_string(dir.path().join("data/effective_config.toml")).unwrap();
    assert!(echo.starts_with(&format!("# config_hash = \"{hash}\"\n# seed = 4\n")));

    generate(dir.path(), "again");
    assert_eq!(
        fs::read(dir.path().join("data/dataset.jsonl")).unwrap(),
        fs::read(dir.path().join("again/dataset.jsonl")).unwrap()
    );
}

#[test]
fn sbm_profile_stays_in_documented_ranges() {
    let dir = setup();
    let out = graphdiff(
        dir.path(),
        &[
            "generate-data",
            "--dataset-profile",
            "sbm",
            "--seed",
            "1",
            "--out",
            "sbm",
        ],
    );
    ok(&out);
    let ds = datasets::load(&dir.path().join("sbm/dataset.jsonl")).unwrap();
    let s = dataset_stats(&ds.graphs, 1, 2).unwrap();
    assert_eq!(s.graphs, 200);
    assert!(
        s.node_range.0 >= 40 && s.node_range.1 <= 200,
        "{:?}",
        s.node_range
    );
    let in_band = ds
        .graphs
        .iter()
        .filter(|g| {
            let r = g.num_edges() as f64 / graphdiff_core::graph::num_pairs(g.n()) as f64;
            (0.06..=0.17).contains(&r)
        })
        .count();
    assert!(
        in_band >= 190,
        "{in_band} of 200 graphs have edge ratio in [0.06, 0.17]"
    );
}

#[test]
fn missing_output_directories_are_created() {
    let dir = setup();
    generate(dir.path(), "a/b/c");
    assert!(dir.path().join("a/b/c/dataset.jsonl").exists());
}

#[test]
fn flags_override_config_values() {
    let dir = setup();
    fs::write(dir.path().join("seeded.toml"), format!("seed = 5\n{TINY}")).unwrap();
    ok(&graphdiff(
        dir.path(),
        &[
            "generate-data",
            "--config",
            "seeded.toml",
            "--seed",
            "7",
            "--n-nodes",
            "5",
            "--out",
            "o",
        ],
    ));
    let ds = datasets::load(&dir.path().join("o/dataset.jsonl")).unwrap();
    assert_eq!(ds.header.seed, Some(7));
    assert!(ds.graphs.iter().all(|g| g.n() == 5));
    let echo = fs::read_to_string(dir.path().join("o/effective_config.toml")).unwrap();
    assert!(echo.contains("\nseed = 7\n"));
}

#[test]
fn lambda_defaults_follow_profile_unless_set() {
    let dir = setup();
    let lambda_of = |dir: &Path, out: &str| -> f64 {
        let text = fs::read_to_string(dir.join(out).join("effective_config.toml")).unwrap();
        let v: toml::Table = toml::from_str(&text).unwrap();
        v["model"]["lambda"].as_float().unwrap()
    };
    ok(&graphdiff(
        dir.path(),
        &["generate-data", "--dataset-profile", "sbm", "--out", "p"],
    ));
    assert_eq!(lambda_of(dir.path(), "p"), 0.25);
    ok(&graphdiff(
        dir.path(),
        &[
            "generate-data",
            "--dataset-profile",
            "sbm",
            "--lambda",
            "0.4",
            "--out",
            "q",
        ],
    ));
    assert_eq!(lambda_of(dir.path(), "q"), 0.4);
    fs::write(dir.path().join("l.toml"), "[model]\nlambda = 0.7\n").unwrap();
    ok(&graphdiff(
        dir.path(),
        &[
            "generate-data",
            "--config",
            "l.toml",
            "--dataset-profile",
            "sbm",
            "--out",
            "r",
        ],
    ));
    assert_eq!(lambda_of(dir.path(), "r"), 0.7);
}

#[test]
fn validation_failures_exit_2() {
    let dir = setup();
    fs::write(dir.path().join("unknown.toml"), "[model]\nlayerz = 3\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["generate-data", "--config", "unknown.toml"],
        vec!["generate-data", "--lambda", "1.5"],
        vec!["generate-data", "--dataset-profile", "planar"],
        vec!["generate-data", "--dataset-profile", "ego"],
        vec!["verify", "everything"],
        vec!["train"],
        vec!["sample"],
        vec!["bogus-subcommand"],
    ];
    for args in cases {
        let out = graphdiff(dir.path(), &args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn runtime_failures_exit_3() {
    let dir = setup();
    fs::write(dir.path().join("garbage.ckpt"), b"not a checkpoint").unwrap();
    let out = graphdiff(
        dir.path(),
        &["sample", "--checkpoint", "garbage.ckpt", "--out", "s"],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = graphdiff(
        dir.path(),
        &["train", "--data", "does-not-exist.jsonl", "--out", "t"],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn train_writes_valid_checkpoints_and_reruns_identically() {
    let dir = setup();
    generate(dir.path(), "data");
    train(dir.path(), "t1", &[]);
    train(dir.path(), "t2", &["--workers", "1"]);
    let ckpt = load_checkpoint(&dir.path().join("t1/model.ckpt")).unwrap();
    assert_eq!(ckpt.meta["seed"], 2);
    assert!(ckpt.weights.all_finite());
    assert!(dir.path().join("t1/checkpoints/epoch_00001.ckpt").exists());
    assert_eq!(
        fs::read(dir.path().join("t1/model.ckpt")).unwrap(),
        fs::read(dir.path().join("t2/model.ckpt")).unwrap()
    );

    let rows = loss_rows(&dir.path().join("t1/loss_log.jsonl"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["format"], "graphdiff-loss-log");
    assert_eq!(rows[0]["seed"], 2);
    assert!(rows[0]["config_hash"].is_string());
    for key in ["epoch", "mean_loss", "node_loss", "edge_loss"] {
        assert!(rows[1].get(key).is_some(), "missing {key}");
    }
    assert_eq!(rows, loss_rows(&dir.path().join("t2/loss_log.jsonl")));
}

#[test]
fn sampling_is_reproducible_and_respects_overrides() {
    let dir = setup();
    generate(dir.path(), "data");
    train(dir.path(), "t", &[]);
    let sample = |out: &str, extra: &[&str]| {
        let mut args = vec![
            "sample",
            "--config",
            "tiny.toml",
            "--checkpoint",
            "t/model.ckpt",
            "--seed",
            "3",
            "--out",
            out,
        ];
        args.extend_from_slice(extra);
        ok(&graphdiff(dir.path(), &args));
        fs::read(dir.path().join(out).join("samples.jsonl")).unwrap()
    };
    let a = sample("s1", &[]);
    let b = sample("s2", &["--workers", "1"]);
    assert_eq!(a, b);
    sample("s3", &["--n-nodes", "11", "--count", "3"]);
    let ds = datasets::load(&dir.path().join("s3/samples.jsonl")).unwrap();
    assert_eq!(ds.graphs.len(), 3);
    assert!(ds.graphs.iter().all(|g| g.n() == 11));
    for steps in ["20", "4"] {
        sample("s4", &["--steps", steps]);
        let ds = datasets::load(&dir.path().join("s4/samples.jsonl")).unwrap();
        assert_eq!(ds.graphs.len(), 6);
    }
    let out = graphdiff(
        dir.path(),
        &[
            "sample",
            "--config",
            "tiny.toml",
            "--checkpoint",
            "t/model.ckpt",
            "--steps",
            "21",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_writes_stamped_report() {
    let dir = setup();
    generate(dir.path(), "data");
    ok(&graphdiff(
        dir.path(),
        &[
            "generate-data",
            "--config",
            "tiny.toml",
            "--seed",
            "9",
            "--out",
            "ref",
        ],
    ));
    let out = graphdiff(
        dir.path(),
        &[
            "eval",
            "--generated",
            "data/dataset.jsonl",
            "--reference",
            "ref/dataset.jsonl",
            "--train-reference",
            "data/dataset.jsonl",
            "--seed",
            "6",
            "--out",
            "e",
        ],
    );
    ok(&out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("e/eval.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 6);
    assert_eq!(report["metrics"].as_array().unwrap().len(), 3);
    assert!((report["metrics"][0]["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn verify_reports_and_sets_status() {
    let dir = setup();
    for kind in ["posterior", "lemma", "loss-unbiased"] {
        let out = graphdiff(dir.path(), &["verify", kind, "--out", "v"]);
        ok(&out);
        let file = dir.path().join(format!("v/verify_{kind}.json"));
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
        assert_eq!(report["passed"], true);
        assert!(report["config_hash"].is_string());
    }
}

#[test]
fn loss_decreases_over_200_steps_on_fixed_toy_set() {
    let dir = setup();
    let cycle = |n: usize| {
        let mut edges: Vec<(usize, usize)> = (0..n)
            .map(|i| (i.min((i + 1) % n), i.max((i + 1) % n)))
            .collect();
        edges.sort();
        SparseGraph::from_parts(n, vec![0; n], edges, vec![1; n]).unwrap()
    };
    let graphs: Vec<_> = (0..16).map(|k| cycle(6 + k % 3)).collect();
    fs::create_dir_all(dir.path().join("data")).unwrap();
    datasets::save(
        &dir.path().join("data/dataset.jsonl"),
        &Dataset::new(DatasetHeader::new(1, 2), graphs),
    )
    .unwrap();
    fs::write(
        dir.path().join("toy.toml"),
        TINY.replace("epochs = 1", "epochs = 100")
            .replace("checkpoint_every = 1", "checkpoint_every = 0")
            + "\n[optimizer]\nlr = 0.005\n",
    )
    .unwrap();
    ok(&graphdiff(
        dir.path(),
        &[
            "train",
            "--config",
            "toy.toml",
            "--data",
            "data/dataset.jsonl",
            "--out",
            "t",
        ],
    ));
    let rows = loss_rows(&dir.path().join("t/loss_log.jsonl"));
    assert_eq!(rows.last().unwrap()["steps"], 200);
    let mean = |r: &[serde_json::Value]| {
        r.iter()
            .map(|v| v["mean_loss"].as_f64().unwrap())
            .sum::<f64>()
            / r.len() as f64
    };
    let (first, last) = (mean(&rows[1..11]), mean(&rows[rows.len() - 10..]));
    assert!(last < 0.8 * first, "first {first}, last {last}");
}
