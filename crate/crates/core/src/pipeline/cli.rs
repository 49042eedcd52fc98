use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::ntd::{self, Ntd, NtvTargets};
use crate::pipeline::config::{ExperimentConfig, ModelName, ModelSpec, RerankSpec};
use crate::pipeline::jrex::export_jrex;
use crate::pipeline::run::{
    self, load_and_clean, read_ranked_lists, report_to_csv, EvalRow,
};
use crate::pipeline::Stage;
use crate::rerank::RerankMethod;
use crate::simulate::{BehaviorConfig, BehaviorMode};
use crate::split::{SplitMethod, SplitSpec};
use crate::synthetic::{self, SynthSpec};

#[derive(Parser)]
#[command(
    name = "divrec",
    version,
    about = "Diversity-aware recommendation pipeline: splits, models, re-rankers, simulation, and metrics"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and clean the corpus; print the removal report.
    Validate,
    /// Write the train/test split files.
    Split,
    /// Run pre- and in-processing: item pool, split, candidate lists.
    Recommend,
    /// Apply the static re-rankers to saved candidate lists.
    Rerank,
    /// Run simulated sessions with dynamic re-ranking.
    Simulate,
    /// Compute metrics over saved recommendations.
    Evaluate {
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Print the normative target values row.
    Ntv {
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Export saved recommendations as a JREX document.
    Export {
        /// Recommendations JSONL (defaults to the first saved file).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "default")]
        style: String,
        #[arg(long, default_value = "experiment")]
        experiment_id: String,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Execute the pipeline end to end.
    Run {
        #[arg(long, default_value = "pre")]
        from_stage: String,
    },
    /// Generate a synthetic corpus plus a ready-to-run config.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        items: usize,
        #[arg(long, default_value_t = 50)]
        users: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// Entry point shared by the binary and tests; returns the process exit code
/// (0 success, 1 validation error, 2 I/O error).
pub fn cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".to_string()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Validate => {
            let config = load_config(&cli)?;
            let (corpus, report) = load_and_clean(&config)?;
            let summary = serde_json::json!({
                "items": corpus.items.len(),
                "users": corpus.histories.len(),
                "impressions": corpus.impressions.len(),
                "removed": report,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Split => {
            let config = load_config(&cli)?;
            run::run_split_only(&config)?;
            println!("split written to {}", config.out_dir.join("split").display());
            Ok(())
        }
        Command::Recommend => {
            let config = load_config(&cli)?;
            run::run_range(&config, Stage::Pre, Stage::In)?;
            println!(
                "candidates written to {}",
                config.out_dir.join("candidates").display()
            );
            Ok(())
        }
        Command::Rerank => {
            let config = load_config(&cli)?;
            run::run_rerank_only(&config)?;
            println!(
                "recommendations written to {}",
                config.out_dir.join("recommendations").display()
            );
            Ok(())
        }
        Command::Simulate => {
            let config = load_config(&cli)?;
            run::run_simulate_only(&config)?;
            println!(
                "simulation logs written to {}",
                config.out_dir.join("simlogs").display()
            );
            Ok(())
        }
        Command::Evaluate { format } => {
            let config = load_config(&cli)?;
            run::run_range(&config, Stage::Eval, Stage::Eval)?;
            print_report(&config, format)
        }
        Command::Ntv { format } => {
            let (ntd, top_n, targets) = ntv_inputs(&cli)?;
            let values = ntd::ntv(&ntd, top_n, &targets);
            match format.as_str() {
                "json" => println!("{}", serde_json::to_string_pretty(&values)?),
                _ => {
                    let row = EvalRow {
                        model: "NTV".to_string(),
                        reranker: String::new(),
                        report: crate::metrics::MetricReport {
                            per_user: Default::default(),
                            aggregate: values,
                        },
                    };
                    print!("{}", report_to_csv(&[row]));
                }
            }
            Ok(())
        }
        Command::Export {
            input,
            style,
            experiment_id,
            output,
        } => {
            let config = load_config(&cli)?;
            let path = match input {
                Some(p) => p.clone(),
                None => first_recommendation_file(&config)?,
            };
            let lists = read_ranked_lists(&path)?;
            let doc = export_jrex(&lists, experiment_id, style);
            let text = serde_json::to_string_pretty(&doc)?;
            match output {
                Some(out) => std::fs::write(out, text)?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Run { from_stage } => {
            let config = load_config(&cli)?;
            let from: Stage = from_stage.parse()?;
            run::run(&config, from)?;
            print_report(&config, "csv")
        }
        Command::Synth {
            dir,
            items,
            users,
            seed,
        } => {
            let spec = SynthSpec {
                n_items: *items,
                n_users: *users,
                seed: *seed,
                ..SynthSpec::default()
            };
            let corpus = synthetic::generate(&spec);
            let paths = synthetic::write_corpus(&corpus, dir)?;
            let config = demo_config(&paths, dir, *seed);
            let config_path = dir.join("config.json");
            std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
            println!("corpus and config written to {}", config_path.display());
            Ok(())
        }
    }
}

fn print_report(config: &ExperimentConfig, format: &str) -> Result<()> {
    let name = match format {
        "json" => "reports/report.json",
        "csv" => "reports/report.csv",
        other => {
            return Err(Error::Config(format!(
                "unknown format `{other}` (expected csv or json)"
            )))
        }
    };
    let text = std::fs::read_to_string(config.out_dir.join(name))?;
    print!("{text}");
    Ok(())
}

/// `ntv` accepts either a full experiment config or a bare NTD document.
fn ntv_inputs(cli: &Cli) -> Result<(Ntd, usize, NtvTargets)> {
    match load_config(cli) {
        Ok(config) => Ok((config.ntd(), config.top_n, config.ntv_targets())),
        Err(Error::Json(_)) | Err(Error::Config(_)) => {
            if let Some(path) = &cli.config {
                let text = std::fs::read_to_string(path)?;
                let ntd = Ntd::from_json_str(&text)?;
                Ok((ntd, 20, NtvTargets::default()))
            } else {
                Ok((Ntd::default_news(), 20, NtvTargets::default()))
            }
        }
        Err(e) => Err(e),
    }
}

fn first_recommendation_file(config: &ExperimentConfig) -> Result<PathBuf> {
    let dir = config.out_dir.join("recommendations");
    if !dir.is_dir() {
        return Err(Error::MissingStage("post (no recommendations)".to_string()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    files
        .into_iter()
        .next()
        .ok_or_else(|| Error::MissingStage("post (no recommendation files)".to_string()))
}

/// Ready-to-run configuration over a synthetic corpus.
fn demo_config(
    paths: &synthetic::CorpusPaths,
    dir: &std::path::Path,
    seed: u64,
) -> ExperimentConfig {
    let model = |name: ModelName, list_size: usize| ModelSpec {
        name,
        hops: None,
        beta: None,
        list_size: Some(list_size),
    };
    let rerank = |method: RerankMethod| RerankSpec {
        method,
        lambda: None,
        n: None,
        gamma: None,
    };
    ExperimentConfig {
        corpus: crate::pipeline::config::CorpusPathsConfig {
            items: paths.items.clone(),
            histories: paths.histories.clone(),
            impressions: paths.impressions.clone(),
            party_map: paths.party_map.clone(),
        },
        article_pool: None,
        split: SplitSpec {
            method: SplitMethod::AttributeStratified,
            test_fraction: 0.2,
            attribute: Some("category".to_string()),
            skew: None,
            k_clusters: None,
            seed,
        },
        ntd: None,
        models: vec![
            model(ModelName::Random, 100),
            model(ModelName::Rp3b, 100),
            model(ModelName::Rwe, 100),
            model(ModelName::Drdw, 20),
            model(ModelName::Pld, 20),
            model(ModelName::Epd, 20),
        ],
        rerankers: vec![
            rerank(RerankMethod::Gkl),
            rerank(RerankMethod::Pm2),
            rerank(RerankMethod::Mmr),
        ],
        behavior: Some(BehaviorConfig {
            mode: BehaviorMode::Pos,
            loops: 3,
            seed,
            ..BehaviorConfig::default()
        }),
        metrics: None,
        ntv_targets: None,
        top_n: 20,
        out_dir: dir.join("out"),
        seed,
    }
}
