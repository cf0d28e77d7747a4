//! On-disk round trips of checkpoints and dataset files.

use graphdiff_core::datasets::{self, gen_er, Dataset, DatasetHeader};
use graphdiff_core::nn::{
    init_network, load_checkpoint, save_checkpoint, Checkpoint, NetworkConfig,
};
use graphdiff_core::random::seeded;

#[test]
fn checkpoint_file_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = NetworkConfig {
        layers: 2,
        dx: 16,
        de: 8,
        dg: 8,
        heads: 2,
        ..NetworkConfig::default()
    };
    let weights = init_network(&config, &mut seeded(4)).unwrap();
    let ckpt = Checkpoint {
        config,
        meta: serde_json::json!({ "seed": 4, "config_hash": "00ff" }),
        weights,
    };
    let a = dir.path().join("a.ckpt");
    let b = dir.path().join("b.ckpt");
    save_checkpoint(&a, &ckpt).unwrap();
    let loaded = load_checkpoint(&a).unwrap();
    assert_eq!(loaded, ckpt);
    save_checkpoint(&b, &loaded).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn truncated_checkpoint_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = NetworkConfig {
        layers: 1,
        dx: 8,
        de: 4,
        dg: 4,
        heads: 2,
        ..NetworkConfig::default()
    };
    let weights = init_network(&config, &mut seeded(1)).unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(
        &path,
        &Checkpoint {
            config,
            meta: serde_json::Value::Null,
            weights,
        },
    )
    .unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn dataset_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = gen_er(20, 3, 12, 0.4, &mut seeded(2)).unwrap();
    let header = DatasetHeader {
        seed: Some(2),
        config_hash: Some("abcd".into()),
        ..DatasetHeader::new(1, 2)
    };
    let path = dir.path().join("d.jsonl");
    datasets::save(&path, &Dataset::new(header.clone(), graphs.clone())).unwrap();
    let back = datasets::load(&path).unwrap();
    assert_eq!(back.header, header);
    assert_eq!(back.graphs, graphs);
}
