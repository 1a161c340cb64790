//! Integration tests of the end-to-end pipeline and the CLI binary.

use std::collections::BTreeSet;
use std::process::Command;
use texfuse::pipeline::{
    config_hash, extract_features, fit_shape_models, generate_synth_corpus, load_manifest,
    make_splits, run_train_eval, CReg, DatasetManifest, FeatureConfig, FeatureKind, SetupKind,
    SplitSpec, SynthConfig,
};

fn small_corpus(dir: &std::path::Path, seed: u64) -> DatasetManifest {
    generate_synth_corpus(
        dir,
        &SynthConfig {
            specimens_per_class: 2,
            images_per_specimen: 3,
            size: 48,
            seed,
        },
    )
    .unwrap()
}

/// Fast feature settings for integration tests.
fn tiny_cfg() -> FeatureConfig {
    FeatureConfig {
        gabor_scales: vec![1],
        sift_scales: 2,
        pca_dim: 8,
        gmm_k: 4,
        vq_k: 4,
        descriptor_sample: 2000,
        mclbp_radii: vec![1.0, 2.0],
        ..FeatureConfig::desk_scale()
    }
}

#[test]
fn cache_is_idempotent_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&dir.path().join("corpus"), 3);
    let cfg = tiny_cfg();
    let cache_path = dir.path().join("pricolbp.tffc");
    let (cache, written) =
        extract_features(&manifest, FeatureKind::Pricolbp, &cfg, None, &cache_path).unwrap();
    assert_eq!(written, manifest.entries.len());
    // Re-running with the same config writes zero new rows.
    let (cache2, written2) =
        extract_features(&manifest, FeatureKind::Pricolbp, &cfg, None, &cache_path).unwrap();
    assert_eq!(written2, 0);
    for e in &manifest.entries {
        let p = e.image.to_string_lossy();
        assert_eq!(cache.get(&p), cache2.get(&p));
    }
    // A different config is rejected instead of mixed in.
    let mut other = cfg.clone();
    other.lbp_radius = 2.0;
    assert_ne!(
        config_hash(FeatureKind::Pricolbp, &cfg),
        config_hash(FeatureKind::Pricolbp, &other)
    );
    assert!(
        extract_features(&manifest, FeatureKind::Pricolbp, &other, None, &cache_path).is_err()
    );
}

#[test]
fn shape_models_ignore_test_set() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&dir.path().join("corpus"), 5);
    let cfg = tiny_cfg();
    let train: BTreeSet<String> = manifest
        .specimens()
        .iter()
        .filter(|s| s.ends_with("00"))
        .map(|s| s.to_string())
        .collect();
    assert!(!train.is_empty());
    // Same training specimens, different test entries: drop half the
    // non-training entries from the manifest.
    let reduced = DatasetManifest::from_entries(
        manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(i, e)| train.contains(&e.specimen) || i % 2 == 0)
            .map(|(_, e)| e.clone())
            .collect(),
    )
    .unwrap();
    let a = fit_shape_models(&manifest, &train, &cfg, true, true).unwrap();
    let b = fit_shape_models(&reduced, &train, &cfg, true, true).unwrap();
    // Byte-identical serialization.
    assert_eq!(a.to_model_file().to_bytes(), b.to_model_file().to_bytes());
}

#[test]
fn end_to_end_train_eval_on_tiny_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(&dir.path().join("corpus"), 7);
    let cfg = tiny_cfg();
    let cache_path = dir.path().join("mclbp_sum.tffc");
    let (cache, _) =
        extract_features(&manifest, FeatureKind::MclbpSum, &cfg, None, &cache_path).unwrap();
    let spec = SplitSpec::new(SetupKind::SetupA, 11);
    let splits = make_splits(&manifest, &spec).unwrap();
    let report = run_train_eval(&manifest, &splits[0], &[&cache], CReg::Fixed(10.0)).unwrap();
    // Confusion row sums equal per-class test counts; metrics in range.
    let total: usize = report.confusion.iter().flatten().sum();
    assert_eq!(total, report.test_rows);
    assert!(report.accuracy >= 0.0 && report.accuracy <= 1.0);
    assert!(report.mca >= 0.0 && report.mca <= 1.0);
}

fn texfuse_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_texfuse"))
}

#[test]
fn cli_end_to_end_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let cache = dir.path().join("cache");
    let out = dir.path().join("summary.json");

    // synth
    let status = texfuse_bin()
        .args(["synth", "--out"])
        .arg(&corpus)
        .args(["--seed", "4", "--specimens", "2", "--images", "3", "--size", "48"])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest_path = corpus.join("manifest.jsonl");
    assert!(load_manifest(&manifest_path).is_ok());

    // split
    let splits_path = dir.path().join("splits.json");
    let status = texfuse_bin()
        .args(["split", "--manifest"])
        .arg(&manifest_path)
        .args(["--setup", "a", "--repeats", "2", "--seed", "1", "--out"])
        .arg(&splits_path)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(splits_path.exists());

    // extract + eval (texture feature, fixed C, 2 repeats) with a thread cap
    let status = texfuse_bin()
        .env("TEXFUSE_THREADS", "2")
        .args(["eval", "--manifest"])
        .arg(&manifest_path)
        .args(["--feature", "pricolbp", "--cache"])
        .arg(&cache)
        .args(["--setup", "a", "--repeats", "2", "--seed", "1", "--c", "10", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["repeats"], 2);

    // report renders the summary
    let output = texfuse_bin().arg("report").arg(&out).output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("accuracy"));

    // usage error -> exit 1
    let status = texfuse_bin().args(["eval", "--bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let status = texfuse_bin()
        .args(["split", "--manifest"])
        .arg(&manifest_path)
        .args(["--setup", "zz", "--out"])
        .arg(&splits_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // data error (missing manifest) -> exit 2
    let status = texfuse_bin()
        .args(["split", "--manifest", "/nonexistent/m.jsonl", "--setup", "a", "--out"])
        .arg(&splits_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // bad TEXFUSE_THREADS -> exit 1
    let status = texfuse_bin()
        .env("TEXFUSE_THREADS", "zero")
        .arg("report")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
