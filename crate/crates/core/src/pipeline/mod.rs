//! Four-stage orchestration (pre-processing, in-processing, post-processing,
//! evaluation) with a save-state manifest, the JREX export, and the CLI.

mod cli;
mod config;
mod jrex;
mod run;
mod savestate;

pub use cli::cli;
pub use config::{CorpusPathsConfig, ExperimentConfig, ModelName, ModelSpec, RerankSpec};
pub use jrex::{export_jrex, jrex_to_ranked_lists, JrexDoc, JrexItem, JrexUser};
pub use run::{read_ranked_lists, run, write_ranked_lists, EvalRow, SaveState};
pub use savestate::{sha256_hex, Manifest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pre,
    In,
    Post,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Pre, Stage::In, Stage::Post, Stage::Eval];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Pre => "pre",
            Stage::In => "in",
            Stage::Post => "post",
            Stage::Eval => "eval",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        match s.to_ascii_lowercase().as_str() {
            "pre" => Ok(Stage::Pre),
            "in" => Ok(Stage::In),
            "post" => Ok(Stage::Post),
            "eval" => Ok(Stage::Eval),
            other => Err(Error::Config(format!(
                "unknown stage `{other}` (expected pre, in, post, or eval)"
            ))),
        }
    }
}
