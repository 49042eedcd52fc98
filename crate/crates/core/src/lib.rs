//! Diversity-aware recommender pipeline.
//!
//! The crate is organized along the four pipeline stages:
//!
//! * [`corpus`] loads and cleans items, histories, and impressions and
//!   builds the interaction matrix (pre-processing);
//! * [`split`] partitions interactions under five strategies and [`models`]
//!   generates candidate lists (in-processing);
//! * [`rerank`] re-orders candidates statically (MMR, PM-2, Greedy-KL) or
//!   dynamically (DAP inside [`simulate`]) (post-processing);
//! * [`metrics`] scores lists with traditional and normative diversity
//!   measures plus AUC (evaluation).
//!
//! [`ntd`] holds the normative target distributions shared by the quota
//! models, the re-rankers, and the target-value computation. [`pipeline`]
//! wires the stages together behind a save-state manifest and the CLI;
//! [`synthetic`] generates the bundled demo corpus.

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod models;
pub mod ntd;
pub mod pipeline;
pub mod rerank;
pub mod seeding;
pub mod simulate;
pub mod split;
pub mod synthetic;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
