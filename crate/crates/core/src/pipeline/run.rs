use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{self, Corpus, Impression, InteractionMatrix, Item};
use crate::error::{Error, Result};
use crate::metrics::{
    self, auc, build_distribution, corpus_category_dimension, eild, gini, ild, MetricReport,
    MetricValues, RadioInputs,
};
use crate::models::{self, ModelConfig, RankedList};
use crate::ntd::{self, Dimension, DimensionKind};
use crate::pipeline::config::{ExperimentConfig, ModelName, ModelSpec};
use crate::pipeline::savestate::{fingerprint, Manifest};
use crate::pipeline::Stage;
use crate::rerank::rerank_static;
use crate::seeding::user_seed;
use crate::simulate::{run_simulation, UserProfile};
use crate::split::{self, Split};

const FRAGMENTATION_SAMPLES: usize = 10;

/// Stage outputs on disk plus their manifest.
#[derive(Debug)]
pub struct SaveState {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

fn stage_fingerprints(config: &ExperimentConfig) -> Result<BTreeMap<&'static str, String>> {
    let pre = fingerprint(&json!({
        "corpus": serde_json::to_value(&config.corpus)?,
        "article_pool": serde_json::to_value(&config.article_pool)?,
    }));
    let ntd = serde_json::to_value(config.ntd())?;
    let stage_in = fingerprint(&json!({
        "pre": pre,
        "split": serde_json::to_value(&config.split)?,
        "ntd": ntd,
        "models": serde_json::to_value(&config.models)?,
        "seed": config.seed,
    }));
    let post = fingerprint(&json!({
        "in": stage_in,
        "rerankers": serde_json::to_value(&config.rerankers)?,
        "behavior": serde_json::to_value(&config.behavior)?,
        "top_n": config.top_n,
        "seed": config.seed,
    }));
    let eval = fingerprint(&json!({
        "post": post,
        "metrics": serde_json::to_value(&config.metrics)?,
        "ntv_targets": serde_json::to_value(config.ntv_targets())?,
        "seed": config.seed,
    }));
    Ok([("pre", pre), ("in", stage_in), ("post", post), ("eval", eval)].into())
}

pub fn load_and_clean(config: &ExperimentConfig) -> Result<(Corpus, corpus::CleanReport)> {
    let raw = corpus::load_corpus(
        &config.corpus.items,
        &config.corpus.histories,
        &config.corpus.impressions,
        &config.corpus.party_map,
    )?;
    Ok(corpus::clean_corpus(&raw, None))
}

pub fn write_ranked_lists(path: &Path, lists: &[RankedList]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for list in lists {
        writeln!(out, "{}", serde_json::to_string(list)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ranked_lists(path: &Path) -> Result<Vec<RankedList>> {
    let file = std::fs::File::open(path)?;
    let mut lists = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            lists.push(serde_json::from_str(&line)?);
        }
    }
    Ok(lists)
}

/// Execute the pipeline from `from` through evaluation. Earlier stages must
/// already exist on disk with matching fingerprints and content hashes.
pub fn run(config: &ExperimentConfig, from: Stage) -> Result<SaveState> {
    run_range(config, from, Stage::Eval)
}

/// Execute the stages `from..=to`.
pub fn run_range(config: &ExperimentConfig, from: Stage, to: Stage) -> Result<SaveState> {
    config.validate()?;
    let out_dir = config.out_dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    let fps = stage_fingerprints(config)?;
    let mut manifest = Manifest::load(&out_dir)?.unwrap_or_default();

    for stage in Stage::ALL {
        if stage < from {
            manifest.verify_fingerprint(stage.as_str(), &fps[stage.as_str()])?;
            manifest.verify_stage(&out_dir, stage.as_str())?;
        }
    }

    let (corpus, clean_report) = load_and_clean(config)?;
    log::info!(
        "cleaned corpus: {} items, {} users, {} impressions ({:?})",
        corpus.items.len(),
        corpus.histories.len(),
        corpus.impressions.len(),
        clean_report
    );

    for stage in Stage::ALL {
        if stage < from || stage > to {
            continue;
        }
        manifest.clear_stage(stage.as_str());
        match stage {
            Stage::Pre => run_pre(config, &corpus, &out_dir, &mut manifest)?,
            Stage::In => run_in(config, &corpus, &out_dir, &mut manifest)?,
            Stage::Post => {
                run_post_static(config, &corpus, &out_dir, &mut manifest)?;
                run_post_sims(config, &corpus, &out_dir, &mut manifest)?;
            }
            Stage::Eval => {
                run_eval(config, &corpus, &out_dir, &mut manifest)?;
            }
        }
        manifest
            .fingerprints
            .insert(stage.as_str().to_string(), fps[stage.as_str()].clone());
        manifest.save(&out_dir)?;
    }
    Ok(SaveState { out_dir, manifest })
}

const ITEM_POOL_FILE: &str = "item_pool.jsonl";

fn run_pre(
    config: &ExperimentConfig,
    corpus: &Corpus,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let pool = corpus::resolve_pool(corpus, config.article_pool.as_deref(), None)?;
    if pool.is_empty() {
        return Err(Error::Config("resolved item pool is empty".to_string()));
    }
    let path = out_dir.join(ITEM_POOL_FILE);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    for id in &pool {
        writeln!(out, "{}", serde_json::to_string(&corpus.items[id])?)?;
    }
    out.flush()?;
    manifest.record_file(out_dir, Stage::Pre.as_str(), ITEM_POOL_FILE)?;
    Ok(())
}

fn read_pool(out_dir: &Path) -> Result<Vec<String>> {
    let path = out_dir.join(ITEM_POOL_FILE);
    if !path.exists() {
        return Err(Error::MissingStage("pre".to_string()));
    }
    let file = std::fs::File::open(path)?;
    let mut pool = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            let item: Item = serde_json::from_str(&line)?;
            pool.push(item.item_id);
        }
    }
    Ok(pool)
}

/// Split the cleaned corpus and persist `split/train.csv` + `split/test.csv`.
pub fn run_split(
    config: &ExperimentConfig,
    corpus: &Corpus,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<Split> {
    let split = split::split(corpus, &config.split)?;
    if split.test_users.is_empty() {
        return Err(Error::Config("split produced an empty test set".to_string()));
    }
    split.save(&out_dir.join("split"))?;
    manifest.record_file(out_dir, Stage::In.as_str(), "split/train.csv")?;
    manifest.record_file(out_dir, Stage::In.as_str(), "split/test.csv")?;
    Ok(split)
}

fn train_histories(split: &Split) -> BTreeMap<String, BTreeSet<String>> {
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (user, item) in &split.train_pairs {
        map.entry(user.clone()).or_default().insert(item.clone());
    }
    map
}

fn train_matrix(split: &Split) -> Result<InteractionMatrix> {
    let users: BTreeSet<String> = split.train_pairs.iter().map(|(u, _)| u.clone()).collect();
    let items: BTreeSet<String> = split.train_pairs.iter().map(|(_, i)| i.clone()).collect();
    InteractionMatrix::from_pairs(users, items, &split.train_pairs)
}

fn candidates_file(model: ModelName) -> String {
    format!("candidates/{}.jsonl", model.as_str())
}

fn recommendations_file(model: ModelName, variant: &str) -> String {
    format!("recommendations/{}_{variant}.jsonl", model.as_str())
}

fn generate_candidates(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    corpus: &Corpus,
    matrix: &InteractionMatrix,
    pool: &[String],
    split: &Split,
) -> Result<Vec<RankedList>> {
    let base_cfg = config.model_config(spec)?;
    let users: Vec<String> = split.test_users.iter().cloned().collect();
    if spec.name == ModelName::Pld {
        let lists = models::recommend_pld(corpus, pool, &users, &base_cfg)?;
        return Ok(lists.into_values().collect());
    }
    let histories = train_histories(split);
    let per_user = |user: &String| -> Result<RankedList> {
        let cfg = ModelConfig {
            seed: user_seed(config.seed, user),
            ..base_cfg.clone()
        };
        let empty = BTreeSet::new();
        let history = histories.get(user).unwrap_or(&empty);
        let list = match spec.name {
            ModelName::Random => models::recommend_random(matrix, pool, user, &cfg),
            ModelName::Rp3b => models::recommend_rp3b(matrix, pool, user, &cfg),
            ModelName::Rwe => models::recommend_rwe(matrix, pool, user, &cfg),
            ModelName::Drdw => {
                models::recommend_drdw(matrix, corpus, pool, user, &cfg).map(|(list, devs)| {
                    if !devs.is_empty() {
                        log::warn!("D-RDW quota deviations for `{user}`: {devs:?}");
                    }
                    list
                })
            }
            ModelName::Epd => models::recommend_epd(corpus, pool, user, history, &cfg),
            ModelName::Pld => unreachable!("handled above"),
        };
        match list {
            Err(Error::ColdUser(_)) => {
                log::warn!(
                    "user `{user}` is cold for {}; random fallback",
                    spec.name.as_str()
                );
                models::recommend_random(matrix, pool, user, &cfg)
            }
            other => other,
        }
    };
    users.par_iter().map(per_user).collect()
}

fn run_in(
    config: &ExperimentConfig,
    corpus: &Corpus,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let split = run_split(config, corpus, out_dir, manifest)?;
    let matrix = train_matrix(&split)?;
    let pool = read_pool(out_dir)?;
    for spec in &config.models {
        let lists = generate_candidates(config, spec, corpus, &matrix, &pool, &split)?;
        let rel = candidates_file(spec.name);
        write_ranked_lists(&out_dir.join(&rel), &lists)?;
        manifest.record_file(out_dir, Stage::In.as_str(), &rel)?;
    }
    Ok(())
}

/// Static re-ranking of every model's candidate file.
pub fn run_post_static(
    config: &ExperimentConfig,
    corpus: &Corpus,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    for model in &config.models {
        let candidates = read_ranked_lists(&out_dir.join(candidates_file(model.name)))?;
        for spec in config.static_rerankers() {
            let cfg = config.rerank_config(spec);
            let reranked: Vec<RankedList> = candidates
                .par_iter()
                .map(|list| rerank_static(list, &corpus.items, &cfg))
                .collect::<Result<_>>()?;
            let rel = recommendations_file(model.name, spec.method.as_str());
            write_ranked_lists(&out_dir.join(&rel), &reranked)?;
            manifest.record_file(out_dir, Stage::Post.as_str(), &rel)?;
        }
    }
    Ok(())
}

/// Simulated sessions with DAP re-ranking; emits per-loop logs and the final
/// post-DAP lists as a recommendation variant.
pub fn run_post_sims(
    config: &ExperimentConfig,
    corpus: &Corpus,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let Some(behavior) = &config.behavior else {
        return Ok(());
    };
    let split = Split::load(&out_dir.join("split"))?;
    let histories = train_histories(&split);
    let dap = config.dap_config();
    let ntd = config.ntd();
    for model in &config.models {
        let candidates = read_ranked_lists(&out_dir.join(candidates_file(model.name)))?;
        let logs: Vec<crate::simulate::SimLog> = candidates
            .par_iter()
            .map(|list| {
                let history_items: Vec<&Item> = histories
                    .get(&list.user_id)
                    .map(|h| h.iter().filter_map(|id| corpus.items.get(id)).collect())
                    .unwrap_or_default();
                let profile = UserProfile::build(&history_items, Some(&ntd));
                let per_user_behavior = crate::simulate::BehaviorConfig {
                    seed: user_seed(behavior.seed ^ config.seed, &list.user_id),
                    ..behavior.clone()
                };
                run_simulation(list, &corpus.items, &profile, &dap, &per_user_behavior)
            })
            .collect::<Result<_>>()?;

        // One JSON line per user per loop.
        let sim_rel = format!("simlogs/{}_{}.jsonl", model.name.as_str(), behavior.mode.as_str());
        let sim_path = out_dir.join(&sim_rel);
        std::fs::create_dir_all(sim_path.parent().expect("parent"))?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(&sim_path)?);
        for log_entry in &logs {
            for (loop_index, sim_loop) in log_entry.loops.iter().enumerate() {
                let line = serde_json::json!({
                    "user_id": log_entry.user_id,
                    "loop": loop_index,
                    "shown": sim_loop.shown.items,
                    "clicked": sim_loop.clicked,
                    "post": sim_loop.post.items,
                });
                writeln!(out, "{line}")?;
            }
        }
        out.flush()?;
        manifest.record_file(out_dir, Stage::Post.as_str(), &sim_rel)?;

        // The list a user would see after the final loop becomes the
        // evaluated recommendation set of the simulated variant.
        let finals: Vec<RankedList> = logs
            .iter()
            .map(|log_entry| match log_entry.loops.last() {
                Some(last) => last.post.clone(),
                None => RankedList {
                    user_id: log_entry.user_id.clone(),
                    items: Vec::new(),
                },
            })
            .collect();
        let rel = recommendations_file(model.name, behavior.mode.as_str());
        write_ranked_lists(&out_dir.join(&rel), &finals)?;
        manifest.record_file(out_dir, Stage::Post.as_str(), &rel)?;
    }
    Ok(())
}

/// Pre-processing plus the split files, without candidate generation.
pub fn run_split_only(config: &ExperimentConfig) -> Result<SaveState> {
    let state = run_range(config, Stage::Pre, Stage::Pre)?;
    let (corpus, _) = load_and_clean(config)?;
    let mut manifest = state.manifest;
    run_split(config, &corpus, &state.out_dir, &mut manifest)?;
    manifest.save(&state.out_dir)?;
    Ok(SaveState {
        out_dir: state.out_dir,
        manifest,
    })
}

fn verified_post_inputs(config: &ExperimentConfig) -> Result<(PathBuf, Manifest, Corpus)> {
    config.validate()?;
    let out_dir = config.out_dir.clone();
    let fps = stage_fingerprints(config)?;
    let manifest = Manifest::load(&out_dir)?
        .ok_or_else(|| Error::MissingStage(Stage::Pre.as_str().to_string()))?;
    for stage in [Stage::Pre, Stage::In] {
        manifest.verify_fingerprint(stage.as_str(), &fps[stage.as_str()])?;
        manifest.verify_stage(&out_dir, stage.as_str())?;
    }
    let (corpus, _) = load_and_clean(config)?;
    Ok((out_dir, manifest, corpus))
}

/// Static re-ranking over saved candidates (the `rerank` subcommand).
pub fn run_rerank_only(config: &ExperimentConfig) -> Result<SaveState> {
    let (out_dir, mut manifest, corpus) = verified_post_inputs(config)?;
    run_post_static(config, &corpus, &out_dir, &mut manifest)?;
    let fps = stage_fingerprints(config)?;
    manifest
        .fingerprints
        .insert(Stage::Post.as_str().to_string(), fps["post"].clone());
    manifest.save(&out_dir)?;
    Ok(SaveState { out_dir, manifest })
}

/// Simulated sessions over saved candidates (the `simulate` subcommand).
pub fn run_simulate_only(config: &ExperimentConfig) -> Result<SaveState> {
    if config.behavior.is_none() {
        return Err(Error::Config(
            "simulate requires a behavior section in the config".to_string(),
        ));
    }
    let (out_dir, mut manifest, corpus) = verified_post_inputs(config)?;
    run_post_sims(config, &corpus, &out_dir, &mut manifest)?;
    let fps = stage_fingerprints(config)?;
    manifest
        .fingerprints
        .insert(Stage::Post.as_str().to_string(), fps["post"].clone());
    manifest.save(&out_dir)?;
    Ok(SaveState { out_dir, manifest })
}

/// One row of the evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub reranker: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

struct EvalContext<'a> {
    config: &'a ExperimentConfig,
    corpus: &'a Corpus,
    reference_pool: Vec<String>,
    histories: BTreeMap<String, BTreeSet<String>>,
    test_impressions: Vec<Impression>,
    category_dim: Dimension,
    sentiment_dim: Dimension,
    party_dim: Dimension,
    relevant: BTreeMap<String, BTreeSet<String>>,
    genres: BTreeMap<String, BTreeSet<String>>,
}

impl<'a> EvalContext<'a> {
    fn new(config: &'a ExperimentConfig, corpus: &'a Corpus, split: &Split) -> Result<Self> {
        let ntd = config.ntd();
        let reference_pool = match &config.article_pool {
            Some(ids) => corpus::resolve_pool(corpus, Some(ids), None)?,
            None => corpus::resolve_pool(corpus, None, Some(&split.test_users))?,
        };
        let test_impressions: Vec<Impression> = corpus
            .impressions
            .iter()
            .filter(|imp| split.test_users.contains(&imp.user_id))
            .cloned()
            .collect();
        let sentiment_dim = ntd
            .dimensions
            .iter()
            .find(|nd| nd.dimension.kind == DimensionKind::SentimentBin)
            .map(|nd| nd.dimension.clone())
            .unwrap_or_else(|| Dimension::sentiment_bins(&[-1.0, -0.5, 0.0, 0.5, 1.0]));
        let mut relevant: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for imp in &test_impressions {
            for shown in &imp.shown {
                if shown.clicked {
                    relevant
                        .entry(imp.user_id.clone())
                        .or_default()
                        .insert(shown.item_id.clone());
                }
            }
        }
        let genres: BTreeMap<String, BTreeSet<String>> = corpus
            .items
            .values()
            .map(|item| (item.item_id.clone(), [item.category.clone()].into()))
            .collect();
        Ok(EvalContext {
            config,
            corpus,
            reference_pool,
            histories: train_histories(split),
            test_impressions,
            category_dim: corpus_category_dimension(corpus),
            sentiment_dim,
            party_dim: Dimension::party_buckets(),
            relevant,
            genres,
        })
    }

    fn dimension_metrics(&self, values: &mut MetricValues, items: &[&Item]) {
        let dims = [
            ("category", &self.category_dim),
            ("sentiment", &self.sentiment_dim),
            ("party", &self.party_dim),
        ];
        for (key, dim) in dims {
            if self.config.metric_selected("gini") {
                if let Ok(dist) = build_distribution(items, dim) {
                    if !dist.empty {
                        values.gini.insert(key.to_string(), gini(&dist));
                    }
                }
            }
            if self.config.metric_selected("ild") {
                if let Ok(Some(v)) = ild(items, dim) {
                    values.ild.insert(key.to_string(), v);
                }
            }
            if self.config.metric_selected("eild") {
                if let Ok(Some(v)) = eild(items, dim) {
                    values.eild.insert(key.to_string(), v);
                }
            }
        }
    }

    /// Metric report over per-user lists; candidate scores enable AUC.
    fn evaluate(
        &self,
        lists: &[RankedList],
        scores: Option<&BTreeMap<(String, String), f64>>,
    ) -> MetricReport {
        let recs: BTreeMap<String, Vec<String>> = lists
            .iter()
            .map(|l| {
                let mut ids = l.item_ids();
                ids.truncate(self.config.top_n);
                (l.user_id.clone(), ids)
            })
            .collect();
        let radio = if self.config.metric_selected("radio") {
            metrics::radio_suite(&RadioInputs {
                corpus: self.corpus,
                recommendations: &recs,
                histories: &self.histories,
                pool: &self.reference_pool,
                seed: self.config.seed,
                fragmentation_samples: FRAGMENTATION_SAMPLES,
            })
        } else {
            BTreeMap::new()
        };

        let mut per_impression: BTreeMap<&str, Vec<&Impression>> = BTreeMap::new();
        for imp in &self.test_impressions {
            per_impression.entry(&imp.user_id).or_default().push(imp);
        }

        let mut per_user: BTreeMap<String, MetricValues> = BTreeMap::new();
        for (user, ids) in &recs {
            let mut values = MetricValues::default();
            if let Some(r) = radio.get(user) {
                values.activation = r.activation;
                values.cat_calibration = r.cat_calibration;
                values.comp_calibration = r.comp_calibration;
                values.fragmentation = r.fragmentation;
                values.representation = r.representation;
                values.alt_voices = r.alt_voices;
            }
            let items: Vec<&Item> = ids.iter().filter_map(|id| self.corpus.items.get(id)).collect();
            self.dimension_metrics(&mut values, &items);
            if self.config.metric_selected("alpha_ndcg") {
                if let Some(relevant) = self.relevant.get(user) {
                    values.alpha_ndcg =
                        Some(metrics::alpha_ndcg(ids, relevant, &self.genres, 0.5));
                }
            }
            if self.config.metric_selected("binomial") && !self.reference_pool.is_empty() {
                values.binomial_diversity =
                    metrics::binomial_diversity(ids, &self.genres, &self.reference_pool).ok();
            }
            if self.config.metric_selected("auc") {
                if let (Some(scores), Some(imps)) = (scores, per_impression.get(user.as_str())) {
                    let imps: Vec<Impression> = imps.iter().map(|i| (*i).clone()).collect();
                    let summary = auc(
                        |u: &str, i: &str| scores.get(&(u.to_string(), i.to_string())).copied(),
                        &imps,
                    );
                    values.auc = summary.value;
                }
            }
            per_user.insert(user.clone(), values);
        }
        MetricReport::from_per_user(per_user)
    }
}

const REPORT_CSV: &str = "reports/report.csv";
const REPORT_JSON: &str = "reports/report.json";

/// Table-style column order of the CSV report.
pub const CSV_COLUMNS: [&str; 15] = [
    "Model",
    "Re-ranking",
    "Activ.",
    "Cat. Calib.",
    "Comp. Calib.",
    "Frag.",
    "Alt. Voices",
    "Repr.",
    "Cat. Gini",
    "Sent. Gini",
    "Party Gini",
    "Cat. ILD",
    "Sent. ILD",
    "Party ILD",
    "AUC",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

pub fn report_to_csv(rows: &[EvalRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        let a = &row.report.aggregate;
        let fields = [
            row.model.clone(),
            row.reranker.clone(),
            cell(a.activation),
            cell(a.cat_calibration),
            cell(a.comp_calibration),
            cell(a.fragmentation),
            cell(a.alt_voices),
            cell(a.representation),
            cell(a.gini.get("category").copied()),
            cell(a.gini.get("sentiment").copied()),
            cell(a.gini.get("party").copied()),
            cell(a.ild.get("category").copied()),
            cell(a.ild.get("sentiment").copied()),
            cell(a.ild.get("party").copied()),
            cell(a.auc),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn ntv_row(config: &ExperimentConfig) -> EvalRow {
    let values = ntd::ntv(&config.ntd(), config.top_n, &config.ntv_targets());
    EvalRow {
        model: "NTV".to_string(),
        reranker: String::new(),
        report: MetricReport {
            per_user: BTreeMap::new(),
            aggregate: values,
        },
    }
}

/// Evaluate candidates and every re-ranked variant; returns all report rows.
pub fn run_eval(
    config: &ExperimentConfig,
    corpus: &Corpus,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<EvalRow>> {
    let split = Split::load(&out_dir.join("split"))?;
    let ctx = EvalContext::new(config, corpus, &split)?;
    let mut rows = vec![ntv_row(config)];

    for model in &config.models {
        let candidates = read_ranked_lists(&out_dir.join(candidates_file(model.name)))?;
        let scores: BTreeMap<(String, String), f64> = candidates
            .iter()
            .flat_map(|list| {
                list.items
                    .iter()
                    .map(|s| ((list.user_id.clone(), s.id.clone()), s.score))
                    .collect::<Vec<_>>()
            })
            .collect();
        rows.push(EvalRow {
            model: model.name.as_str().to_string(),
            reranker: String::new(),
            report: ctx.evaluate(&candidates, Some(&scores)),
        });
        let mut variants: Vec<String> = config
            .static_rerankers()
            .map(|r| r.method.as_str().to_string())
            .collect();
        if let Some(behavior) = &config.behavior {
            variants.push(behavior.mode.as_str().to_string());
        }
        for variant in variants {
            let path = out_dir.join(recommendations_file(model.name, &variant));
            if !path.exists() {
                return Err(Error::MissingStage(format!(
                    "post ({} missing)",
                    path.display()
                )));
            }
            let lists = read_ranked_lists(&path)?;
            rows.push(EvalRow {
                model: model.name.as_str().to_string(),
                reranker: variant,
                report: ctx.evaluate(&lists, None),
            });
        }
    }

    std::fs::create_dir_all(out_dir.join("reports"))?;
    std::fs::write(out_dir.join(REPORT_CSV), report_to_csv(&rows))?;
    std::fs::write(
        out_dir.join(REPORT_JSON),
        serde_json::to_string_pretty(&rows)?,
    )?;
    manifest.record_file(out_dir, Stage::Eval.as_str(), REPORT_CSV)?;
    manifest.record_file(out_dir, Stage::Eval.as_str(), REPORT_JSON)?;
    Ok(rows)
}
