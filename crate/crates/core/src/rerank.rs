//! Static re-rankers (MMR, PM-2, Greedy-KL) and the dynamic attribute
//! penalization (DAP) used inside simulated sessions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Item;
use crate::error::{Error, Result};
use crate::models::{RankedList, ScoredItem};
use crate::ntd::Ntd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankMethod {
    Mmr,
    Pm2,
    Gkl,
    Dap,
}

impl RerankMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RerankMethod::Mmr => "mmr",
            RerankMethod::Pm2 => "pm2",
            RerankMethod::Gkl => "gkl",
            RerankMethod::Dap => "dap",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RerankConfig {
    pub method: RerankMethod,
    /// Relevance/diversity trade-off for MMR and PM-2.
    pub lambda: f64,
    pub ntd: Ntd,
    /// Output list size.
    pub n: usize,
    /// DAP per-matching-dimension score penalty.
    pub gamma: f64,
}

impl RerankConfig {
    pub fn new(method: RerankMethod, ntd: Ntd, n: usize) -> RerankConfig {
        RerankConfig {
            method,
            lambda: 0.5,
            ntd,
            n,
            gamma: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("lambda must be in [0, 1]".to_string()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || self.gamma == 0.0 {
            return Err(Error::Config("gamma must be in (0, 1]".to_string()));
        }
        if self.n == 0 {
            return Err(Error::Config("rerank output size must be >= 1".to_string()));
        }
        self.ntd.validate()
    }
}

/// Per-user session memory for dynamic re-ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub user_id: String,
    pub clicked: BTreeSet<String>,
    /// Per NTD dimension: class index -> click count.
    pub clicked_classes: Vec<BTreeMap<usize, usize>>,
    pub session_index: usize,
}

impl SessionState {
    pub fn new(user_id: &str, ntd: &Ntd) -> SessionState {
        SessionState {
            user_id: user_id.to_string(),
            clicked: BTreeSet::new(),
            clicked_classes: vec![BTreeMap::new(); ntd.dimensions.len()],
            session_index: 0,
        }
    }

    pub fn record_click(&mut self, item: &Item, ntd: &Ntd) {
        self.clicked.insert(item.item_id.clone());
        for (d, nd) in ntd.dimensions.iter().enumerate() {
            if let Ok(class) = nd.dimension.assign_class(item) {
                *self.clicked_classes[d].entry(class).or_insert(0) += 1;
            }
        }
    }
}

/// Candidate with its per-dimension class assignment, in relevance order.
struct Classified {
    entry: ScoredItem,
    relnorm: f64,
    classes: Vec<usize>,
}

fn classify_candidates(
    candidates: &RankedList,
    items: &BTreeMap<String, Item>,
    ntd: &Ntd,
) -> Result<Vec<Classified>> {
    if candidates.items.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let (min, max) = candidates
        .items
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.score), hi.max(s.score))
        });
    let span = max - min;
    let mut classified: Vec<Classified> = Vec::with_capacity(candidates.items.len());
    for entry in &candidates.items {
        let Some(item) = items.get(&entry.id) else {
            log::warn!("candidate `{}` missing from the item set; skipped", entry.id);
            continue;
        };
        let classes: Result<Vec<usize>> = ntd
            .dimensions
            .iter()
            .map(|nd| nd.dimension.assign_class(item))
            .collect();
        let classes = match classes {
            Ok(c) => c,
            Err(_) => {
                log::warn!("candidate `{}` not classifiable on the NTD; skipped", entry.id);
                continue;
            }
        };
        let relnorm = if span > 0.0 { (entry.score - min) / span } else { 1.0 };
        classified.push(Classified {
            entry: entry.clone(),
            relnorm,
            classes,
        });
    }
    if classified.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    // Relevance order with item-id tie-breaks; greedy argmax scans use strict
    // comparisons so ties resolve to this order.
    classified.sort_by(|a, b| {
        b.entry
            .score
            .partial_cmp(&a.entry.score)
            .unwrap()
            .then_with(|| a.entry.id.cmp(&b.entry.id))
    });
    if classified.len() < candidates.items.len() {
        log::warn!(
            "re-ranking {} of {} candidates",
            classified.len(),
            candidates.items.len()
        );
    }
    Ok(classified)
}

fn one_hot_cosine(a: &[usize], b: &[usize]) -> f64 {
    let matches = a.iter().zip(b).filter(|(x, y)| x == y).count();
    matches as f64 / a.len() as f64
}

/// MMR: greedy trade-off between normalized relevance and the maximum
/// one-hot cosine similarity to already selected items.
pub fn rerank_mmr(
    candidates: &RankedList,
    items: &BTreeMap<String, Item>,
    cfg: &RerankConfig,
) -> Result<RankedList> {
    let pool = classify_candidates(candidates, items, &cfg.ntd)?;
    let n = cfg.n.min(pool.len());
    if n < cfg.n {
        log::warn!("candidates shorter than requested output ({} < {})", pool.len(), cfg.n);
    }
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    while selected.len() < n {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &idx) in remaining.iter().enumerate() {
            let score = if selected.is_empty() {
                pool[idx].relnorm
            } else {
                let max_sim = selected
                    .iter()
                    .map(|&s| one_hot_cosine(&pool[idx].classes, &pool[s].classes))
                    .fold(f64::NEG_INFINITY, f64::max);
                cfg.lambda * pool[idx].relnorm - (1.0 - cfg.lambda) * max_sim
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((slot, score));
            }
        }
        let (slot, _) = best.expect("remaining candidates");
        selected.push(remaining.remove(slot));
    }
    Ok(RankedList {
        user_id: candidates.user_id.clone(),
        items: selected.iter().map(|&i| pool[i].entry.clone()).collect(),
    })
}

/// PM-2: Sainte-Lague quotients over the union of NTD classes; each pick
/// credits its aspects by fractional membership.
pub fn rerank_pm2(
    candidates: &RankedList,
    items: &BTreeMap<String, Item>,
    cfg: &RerankConfig,
) -> Result<RankedList> {
    let pool = classify_candidates(candidates, items, &cfg.ntd)?;
    let n = cfg.n.min(pool.len());

    // Aspect table: one entry per (dimension, class), weight = dim weight * p.
    let mut aspect_weight: Vec<f64> = Vec::new();
    let mut aspect_offset: Vec<usize> = Vec::new();
    for nd in &cfg.ntd.dimensions {
        aspect_offset.push(aspect_weight.len());
        for p in &nd.proportions {
            aspect_weight.push(nd.weight * p);
        }
    }
    let aspect_of = |classes: &[usize]| -> Vec<usize> {
        classes
            .iter()
            .enumerate()
            .map(|(d, &c)| aspect_offset[d] + c)
            .collect()
    };

    let mut credit = vec![0.0f64; aspect_weight.len()];
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let dims = cfg.ntd.dimensions.len() as f64;

    while selected.len() < n {
        let quotients: Vec<f64> = aspect_weight
            .iter()
            .zip(&credit)
            .map(|(v, s)| v / (2.0 * s + 1.0))
            .collect();
        let star = quotients
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(idx, _)| idx)
            .expect("at least one aspect");
        let mut best: Option<(usize, f64)> = None;
        for (slot, &idx) in remaining.iter().enumerate() {
            let aspects = aspect_of(&pool[idx].classes);
            let mut on_star = 0.0;
            let mut off_star = 0.0;
            for &a in &aspects {
                if a == star {
                    on_star += quotients[a];
                } else {
                    off_star += quotients[a];
                }
            }
            let score = cfg.lambda * on_star + (1.0 - cfg.lambda) * off_star;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((slot, score));
            }
        }
        let (slot, _) = best.expect("remaining candidates");
        let idx = remaining.remove(slot);
        for a in aspect_of(&pool[idx].classes) {
            credit[a] += 1.0 / dims;
        }
        selected.push(idx);
    }
    Ok(RankedList {
        user_id: candidates.user_id.clone(),
        items: selected.iter().map(|&i| pool[i].entry.clone()).collect(),
    })
}

/// Weighted sum over dimensions of KL(target || smoothed selection) in bits.
fn gkl_objective(ntd: &Ntd, counts: &[Vec<usize>], total: usize) -> f64 {
    const EPS: f64 = 1e-6;
    let mut objective = 0.0;
    for (nd, dim_counts) in ntd.dimensions.iter().zip(counts) {
        let classes = dim_counts.len() as f64;
        let denom = total as f64 + classes * EPS;
        let mut kl = 0.0;
        for (p, &count) in nd.proportions.iter().zip(dim_counts) {
            if *p > 0.0 {
                let q = (count as f64 + EPS) / denom;
                kl += p * (p / q).log2();
            }
        }
        objective += nd.weight * kl;
    }
    objective
}

/// Greedy-KL: append the candidate minimizing the divergence between the NTD
/// and the running selection distribution.
pub fn rerank_gkl(
    candidates: &RankedList,
    items: &BTreeMap<String, Item>,
    cfg: &RerankConfig,
) -> Result<RankedList> {
    let pool = classify_candidates(candidates, items, &cfg.ntd)?;
    let n = cfg.n.min(pool.len());
    let mut counts: Vec<Vec<usize>> = cfg
        .ntd
        .dimensions
        .iter()
        .map(|nd| vec![0usize; nd.dimension.class_count()])
        .collect();
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    while selected.len() < n {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &idx) in remaining.iter().enumerate() {
            for (d, &c) in pool[idx].classes.iter().enumerate() {
                counts[d][c] += 1;
            }
            let objective = gkl_objective(&cfg.ntd, &counts, selected.len() + 1);
            for (d, &c) in pool[idx].classes.iter().enumerate() {
                counts[d][c] -= 1;
            }
            if best.is_none_or(|(_, b)| objective < b) {
                best = Some((slot, objective));
            }
        }
        let (slot, _) = best.expect("remaining candidates");
        let idx = remaining.remove(slot);
        for (d, &c) in pool[idx].classes.iter().enumerate() {
            counts[d][c] += 1;
        }
        selected.push(idx);
    }
    Ok(RankedList {
        user_id: candidates.user_id.clone(),
        items: selected.iter().map(|&i| pool[i].entry.clone()).collect(),
    })
}

/// DAP: drop already clicked items, then multiply every remaining score by
/// gamma^m where m counts the NTD dimensions on which the item shares a
/// class with a clicked one.
pub fn rerank_dap(
    candidates: &RankedList,
    state: &SessionState,
    items: &BTreeMap<String, Item>,
    cfg: &RerankConfig,
) -> RankedList {
    let mut rescored: Vec<ScoredItem> = Vec::new();
    for entry in &candidates.items {
        if state.clicked.contains(&entry.id) {
            continue;
        }
        let Some(item) = items.get(&entry.id) else { continue };
        let mut matches = 0u32;
        for (d, nd) in cfg.ntd.dimensions.iter().enumerate() {
            if let Ok(class) = nd.dimension.assign_class(item) {
                if state.clicked_classes[d].contains_key(&class) {
                    matches += 1;
                }
            }
        }
        rescored.push(ScoredItem {
            id: entry.id.clone(),
            score: entry.score * cfg.gamma.powi(matches as i32),
        });
    }
    rescored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    rescored.truncate(cfg.n);
    RankedList {
        user_id: candidates.user_id.clone(),
        items: rescored,
    }
}

/// Apply a static re-ranker by method name; DAP needs session state and has
/// its own entry point.
pub fn rerank_static(
    candidates: &RankedList,
    items: &BTreeMap<String, Item>,
    cfg: &RerankConfig,
) -> Result<RankedList> {
    match cfg.method {
        RerankMethod::Mmr => rerank_mmr(candidates, items, cfg),
        RerankMethod::Pm2 => rerank_pm2(candidates, items, cfg),
        RerankMethod::Gkl => rerank_gkl(candidates, items, cfg),
        RerankMethod::Dap => Err(Error::Config(
            "DAP is a dynamic re-ranker; run it through the simulator".to_string(),
        )),
    }
}
