//! Save-state semantics: stage isolation and fingerprint scoping.

use divrec::pipeline::{self, ExperimentConfig, ModelName, ModelSpec, RerankSpec, Stage};
use divrec::rerank::RerankMethod;
use divrec::split::{SplitMethod, SplitSpec};
use divrec::synthetic::{self, SynthSpec};

fn experiment(dir: &std::path::Path) -> ExperimentConfig {
    let corpus = synthetic::generate(&SynthSpec {
        n_items: 120,
        n_users: 12,
        ..SynthSpec::default()
    });
    let paths = synthetic::write_corpus(&corpus, dir).unwrap();
    ExperimentConfig {
        corpus: pipeline::CorpusPathsConfig {
            items: paths.items,
            histories: paths.histories,
            impressions: paths.impressions,
            party_map: paths.party_map,
        },
        article_pool: None,
        split: SplitSpec {
            method: SplitMethod::AttributeStratified,
            test_fraction: 0.2,
            attribute: Some("category".to_string()),
            skew: None,
            k_clusters: None,
            seed: 11,
        },
        ntd: None,
        models: vec![ModelSpec {
            name: ModelName::Rp3b,
            hops: None,
            beta: None,
            list_size: Some(40),
        }],
        rerankers: vec![RerankSpec {
            method: RerankMethod::Pm2,
            lambda: None,
            n: None,
            gamma: None,
        }],
        behavior: None,
        metrics: None,
        ntv_targets: None,
        top_n: 20,
        out_dir: dir.join("out"),
        seed: 11,
    }
}

fn hash_tree(dir: &std::path::Path, skip: &str) -> Vec<(String, String)> {
    let mut entries = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            if rel.starts_with(skip) || rel == "manifest.json" {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                entries.push((rel, pipeline::sha256_hex(&std::fs::read(&path).unwrap())));
            }
        }
    }
    entries.sort();
    entries
}

#[test]
fn eval_rerun_leaves_earlier_stages_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let config = experiment(dir.path());
    pipeline::run(&config, Stage::Pre).unwrap();
    let before = hash_tree(&config.out_dir, "reports");
    std::fs::remove_dir_all(config.out_dir.join("reports")).unwrap();
    pipeline::run(&config, Stage::Eval).unwrap();
    let after = hash_tree(&config.out_dir, "reports");
    assert_eq!(before, after);
    assert!(config.out_dir.join("reports/report.csv").exists());
}

#[test]
fn reranker_change_keeps_candidates_valid() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = experiment(dir.path());
    pipeline::run(&config, Stage::Pre).unwrap();
    // Swapping the re-ranker only touches the post fingerprint, so saved
    // candidates may be reused.
    config.rerankers = vec![RerankSpec {
        method: RerankMethod::Gkl,
        lambda: None,
        n: None,
        gamma: None,
    }];
    pipeline::run(&config, Stage::Post).unwrap();
    assert!(config
        .out_dir
        .join("recommendations/rp3b_gkl.jsonl")
        .exists());
}

#[test]
fn model_change_invalidates_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = experiment(dir.path());
    pipeline::run(&config, Stage::Pre).unwrap();
    config.models[0].beta = Some(1.5);
    let err = pipeline::run(&config, Stage::Post).unwrap_err();
    assert!(matches!(err, divrec::Error::FingerprintMismatch(_)), "{err}");
    // Re-running the invalidated stage clears the mismatch.
    pipeline::run(&config, Stage::In).unwrap();
}

#[test]
fn identical_configs_produce_identical_bytes() {
    // Two fresh runs of the same experiment in different directories must
    // agree byte for byte on every stage output (the manifest differs only
    // through the absolute corpus paths inside its fingerprints).
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let config_a = experiment(dir_a.path());
    let mut config_b = experiment(dir_b.path());
    config_b.corpus = config_a.corpus.clone();
    pipeline::run(&config_a, Stage::Pre).unwrap();
    pipeline::run(&config_b, Stage::Pre).unwrap();
    let tree_a = hash_tree(&config_a.out_dir, "\u{0}");
    let tree_b = hash_tree(&config_b.out_dir, "\u{0}");
    assert!(!tree_a.is_empty());
    assert_eq!(tree_a, tree_b);
}

#[test]
fn seed_changes_propagate_to_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = experiment(dir.path());
    config.models[0].name = ModelName::Random;
    pipeline::run(&config, Stage::Pre).unwrap();
    let first = std::fs::read(config.out_dir.join("candidates/random.jsonl")).unwrap();
    config.seed = 999;
    pipeline::run(&config, Stage::Pre).unwrap();
    let second = std::fs::read(config.out_dir.join("candidates/random.jsonl")).unwrap();
    assert_ne!(first, second);
}
