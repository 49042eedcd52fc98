use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelConfig;
use crate::ntd::{Ntd, NtvTargets};
use crate::rerank::{RerankConfig, RerankMethod};
use crate::simulate::BehaviorConfig;
use crate::split::SplitSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusPathsConfig {
    pub items: PathBuf,
    pub histories: PathBuf,
    pub impressions: PathBuf,
    pub party_map: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Random,
    Rp3b,
    Rwe,
    Drdw,
    Pld,
    Epd,
}

impl ModelName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelName::Random => "random",
            ModelName::Rp3b => "rp3b",
            ModelName::Rwe => "rwe",
            ModelName::Drdw => "drdw",
            ModelName::Pld => "pld",
            ModelName::Epd => "epd",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: ModelName,
    #[serde(default)]
    pub hops: Option<usize>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub list_size: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RerankSpec {
    pub method: RerankMethod,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn default_top_n() -> usize {
    20
}

/// The experiment configuration file (`--config`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus: CorpusPathsConfig,
    #[serde(default)]
    pub article_pool: Option<Vec<String>>,
    pub split: SplitSpec,
    /// Normative target distribution; defaults to the news NTD (party
    /// 15/15/15/15/40, sentiment 20/30/30/20).
    #[serde(default)]
    pub ntd: Option<Ntd>,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub rerankers: Vec<RerankSpec>,
    #[serde(default)]
    pub behavior: Option<BehaviorConfig>,
    /// Metric selection; `None` computes everything.
    #[serde(default)]
    pub metrics: Option<Vec<String>>,
    #[serde(default)]
    pub ntv_targets: Option<NtvTargets>,
    /// Evaluated list length (top-N).
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".to_string()));
        }
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be >= 1".to_string()));
        }
        self.split.validate()?;
        self.ntd().validate()?;
        for spec in &self.models {
            self.model_config(spec)?.validate()?;
        }
        for spec in &self.rerankers {
            self.rerank_config(spec).validate()?;
        }
        if let Some(behavior) = &self.behavior {
            behavior.validate()?;
        }
        if let Some(names) = &self.metrics {
            const KNOWN: [&str; 7] = [
                "radio",
                "gini",
                "ild",
                "eild",
                "alpha_ndcg",
                "binomial",
                "auc",
            ];
            for name in names {
                if !KNOWN.contains(&name.as_str()) {
                    return Err(Error::Config(format!("unknown metric `{name}`")));
                }
            }
        }
        Ok(())
    }

    pub fn ntd(&self) -> Ntd {
        self.ntd.clone().unwrap_or_else(Ntd::default_news)
    }

    pub fn ntv_targets(&self) -> NtvTargets {
        self.ntv_targets.clone().unwrap_or_default()
    }

    pub fn metric_selected(&self, name: &str) -> bool {
        match &self.metrics {
            None => true,
            Some(list) => list.iter().any(|m| m == name),
        }
    }

    pub fn model_config(&self, spec: &ModelSpec) -> Result<ModelConfig> {
        let defaults = ModelConfig::default();
        Ok(ModelConfig {
            hops: spec.hops.unwrap_or(defaults.hops),
            beta: spec.beta.unwrap_or(defaults.beta),
            list_size: spec.list_size.unwrap_or(self.top_n),
            seed: self.seed,
            ntd: Some(self.ntd()),
        })
    }

    pub fn rerank_config(&self, spec: &RerankSpec) -> RerankConfig {
        let mut cfg = RerankConfig::new(spec.method, self.ntd(), spec.n.unwrap_or(self.top_n));
        if let Some(lambda) = spec.lambda {
            cfg.lambda = lambda;
        }
        if let Some(gamma) = spec.gamma {
            cfg.gamma = gamma;
        }
        cfg
    }

    /// DAP settings for the simulator: the configured `dap` re-ranker entry,
    /// or defaults.
    pub fn dap_config(&self) -> RerankConfig {
        self.rerankers
            .iter()
            .find(|r| r.method == RerankMethod::Dap)
            .map(|r| self.rerank_config(r))
            .unwrap_or_else(|| RerankConfig::new(RerankMethod::Dap, self.ntd(), self.top_n))
    }

    pub fn static_rerankers(&self) -> impl Iterator<Item = &RerankSpec> {
        self.rerankers
            .iter()
            .filter(|r| r.method != RerankMethod::Dap)
    }
}
