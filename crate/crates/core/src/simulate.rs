//! Multi-session user simulation: position-biased click sampling over shown
//! lists with dynamic attribute penalization between loops.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Item;
use crate::error::{Error, Result};
use crate::models::RankedList;
use crate::ntd::{Dimension, DimensionKind, Ntd};
use crate::rerank::{rerank_dap, RerankConfig, SessionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorMode {
    /// Position preference only: click weight is the geometric rank decay.
    Pos,
    /// Attribute preference: party/sentiment matches multiply the weight.
    Att,
}

impl BehaviorMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BehaviorMode::Pos => "pos",
            BehaviorMode::Att => "att",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BehaviorConfig {
    pub mode: BehaviorMode,
    /// Geometric rank decay rho in (0, 1).
    pub position_decay: f64,
    /// Click-weight boost for items whose category the user has read;
    /// superseded by the POS and ATT presets.
    pub category_boost: f64,
    /// Per-matching-attribute boost (party, sentiment) in ATT mode.
    pub attribute_boost: f64,
    pub clicks_per_session: usize,
    pub loops: usize,
    pub seed: u64,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        BehaviorConfig {
            mode: BehaviorMode::Pos,
            position_decay: 0.85,
            category_boost: 3.0,
            attribute_boost: 3.0,
            clicks_per_session: 2,
            loops: 1,
            seed: 0,
        }
    }
}

impl BehaviorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.position_decay) || self.position_decay == 0.0 {
            return Err(Error::Config("position_decay must be in (0, 1)".to_string()));
        }
        if self.category_boost < 1.0 || self.attribute_boost < 1.0 {
            return Err(Error::Config("boosts must be >= 1".to_string()));
        }
        if self.loops == 0 {
            return Err(Error::Config("loops must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Attribute classes seen in a user's reading history, under the party and
/// sentiment partitions the simulation runs with.
#[derive(Debug, Clone)]
pub struct UserProfile {
    pub categories: BTreeSet<String>,
    pub party_classes: BTreeSet<usize>,
    pub sentiment_classes: BTreeSet<usize>,
    party_dim: Dimension,
    sentiment_dim: Dimension,
}

impl UserProfile {
    /// Profile from history items; party/sentiment partitions come from the
    /// NTD when it carries them, otherwise from the defaults.
    pub fn build(history: &[&Item], ntd: Option<&Ntd>) -> UserProfile {
        let find = |kind: DimensionKind| -> Option<Dimension> {
            ntd.and_then(|n| {
                n.dimensions
                    .iter()
                    .find(|nd| nd.dimension.kind == kind)
                    .map(|nd| nd.dimension.clone())
            })
        };
        let party_dim = find(DimensionKind::PartyBucket).unwrap_or_else(Dimension::party_buckets);
        let sentiment_dim = find(DimensionKind::SentimentBin)
            .unwrap_or_else(|| Dimension::sentiment_bins(&[-1.0, -0.5, 0.0, 0.5, 1.0]));
        let mut profile = UserProfile {
            categories: BTreeSet::new(),
            party_classes: BTreeSet::new(),
            sentiment_classes: BTreeSet::new(),
            party_dim,
            sentiment_dim,
        };
        for item in history {
            if !item.category.is_empty() {
                profile.categories.insert(item.category.clone());
            }
            if let Ok(c) = profile.party_dim.assign_class(item) {
                profile.party_classes.insert(c);
            }
            if let Ok(c) = profile.sentiment_dim.assign_class(item) {
                profile.sentiment_classes.insert(c);
            }
        }
        profile
    }

    fn attribute_matches(&self, item: &Item) -> u32 {
        let mut matches = 0;
        if let Ok(c) = self.party_dim.assign_class(item) {
            if self.party_classes.contains(&c) {
                matches += 1;
            }
        }
        if let Ok(c) = self.sentiment_dim.assign_class(item) {
            if self.sentiment_classes.contains(&c) {
                matches += 1;
            }
        }
        matches
    }
}

/// Normalized click probabilities for a shown list: geometric position decay
/// times the mode's attribute boost.
pub fn click_probabilities(
    list: &RankedList,
    profile: &UserProfile,
    items: &BTreeMap<String, Item>,
    cfg: &BehaviorConfig,
) -> Result<Vec<f64>> {
    if list.items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let weights: Vec<f64> = list
        .items
        .iter()
        .enumerate()
        .map(|(rank, entry)| {
            let decay = cfg.position_decay.powi(rank as i32);
            let boost = match cfg.mode {
                BehaviorMode::Pos => 1.0,
                BehaviorMode::Att => items
                    .get(&entry.id)
                    .map(|item| {
                        cfg.attribute_boost
                            .powi(profile.attribute_matches(item) as i32)
                    })
                    .unwrap_or(1.0),
            };
            decay * boost
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// One simulation step: what was shown, what was clicked, and the re-ranked
/// list that followed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLoop {
    pub shown: RankedList,
    pub clicked: Vec<String>,
    pub post: RankedList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub user_id: String,
    pub loops: Vec<SimLoop>,
}

fn sample_without_replacement(
    probs: &[f64],
    count: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<usize> {
    let mut weights = probs.to_vec();
    let mut picked = Vec::new();
    for _ in 0..count.min(probs.len()) {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut draw = rng.random_range(0.0..total);
        let mut chosen = weights.len() - 1;
        for (idx, w) in weights.iter().enumerate() {
            if draw < *w {
                chosen = idx;
                break;
            }
            draw -= w;
        }
        picked.push(chosen);
        weights[chosen] = 0.0;
    }
    picked
}

/// Drive `loops` sessions over the candidate list: show the top N, sample
/// clicks, update the session state, and apply DAP before the next loop.
pub fn run_simulation(
    candidates: &RankedList,
    items: &BTreeMap<String, Item>,
    profile: &UserProfile,
    dap: &RerankConfig,
    behavior: &BehaviorConfig,
) -> Result<SimLog> {
    behavior.validate()?;
    if candidates.items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(behavior.seed);
    let mut state = SessionState::new(&candidates.user_id, &dap.ntd);
    // The full remaining candidate list is re-scored every loop; the shown
    // list is its top N.
    let full = RerankConfig {
        n: candidates.items.len(),
        ..dap.clone()
    };
    let mut current = candidates.clone();
    let mut loops = Vec::new();
    for _ in 0..behavior.loops {
        let mut shown = current.clone();
        shown.items.truncate(dap.n);
        if shown.items.is_empty() {
            log::warn!(
                "candidate list for `{}` exhausted after {} loops",
                candidates.user_id,
                loops.len()
            );
            break;
        }
        let probs = click_probabilities(&shown, profile, items, behavior)?;
        let clicked_idx = sample_without_replacement(&probs, behavior.clicks_per_session, &mut rng);
        let mut clicked: Vec<String> = clicked_idx
            .iter()
            .map(|&i| shown.items[i].id.clone())
            .collect();
        clicked.sort();
        for id in &clicked {
            if let Some(item) = items.get(id) {
                state.record_click(item, &dap.ntd);
            }
        }
        state.session_index += 1;
        current = rerank_dap(candidates, &state, items, &full);
        let mut post = current.clone();
        post.items.truncate(dap.n);
        loops.push(SimLoop {
            shown,
            clicked,
            post,
        });
    }
    Ok(SimLog {
        user_id: candidates.user_id.clone(),
        loops,
    })
}
