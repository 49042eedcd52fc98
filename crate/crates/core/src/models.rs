//! Candidate-list generation: random baseline, bipartite random walks with
//! popularity discount (RP3beta) and erasure (RWE-D), the quota-constrained
//! diversity walk (D-RDW), and the shared-agenda (PLD) and equal-exposure
//! (EPD) filters.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, InteractionMatrix, Item, PartyLabel};
use crate::error::{Error, Result};
use crate::ntd::Ntd;

/// Knobs shared by all models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Walk length; odd so walks end on the item side.
    pub hops: usize,
    /// Popularity discount exponent for RP3beta.
    pub beta: f64,
    /// Output list size.
    pub list_size: usize,
    pub seed: u64,
    /// Required by D-RDW, PLD, and EPD.
    pub ntd: Option<Ntd>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hops: 3,
            beta: 0.7,
            list_size: 20,
            seed: 0,
            ntd: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hops < 3 || self.hops.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "hops must be an odd integer >= 3, got {}",
                self.hops
            )));
        }
        if self.beta < 0.0 {
            return Err(Error::Config("beta must be >= 0".to_string()));
        }
        if self.list_size == 0 {
            return Err(Error::Config("list_size must be >= 1".to_string()));
        }
        if let Some(ntd) = &self.ntd {
            ntd.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub score: f64,
}

/// A per-user ordered list of scored items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user_id: String,
    pub items: Vec<ScoredItem>,
}

impl RankedList {
    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|s| s.id.clone()).collect()
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.items.iter().any(|s| s.id == item_id)
    }
}

/// A quota the selected list could not meet exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaDeviation {
    pub dimension: String,
    pub class: String,
    pub quota: usize,
    pub selected: usize,
}

/// Uniform sample of the pool (minus the user's history), without
/// replacement. Pools smaller than the list size yield a shorter list.
pub fn recommend_random(
    matrix: &InteractionMatrix,
    pool: &[String],
    user_id: &str,
    cfg: &ModelConfig,
) -> Result<RankedList> {
    let history = matrix.history_items(user_id);
    let eligible: Vec<&String> = pool.iter().filter(|id| !history.contains(*id)).collect();
    if eligible.is_empty() {
        return Err(Error::Config(format!(
            "empty pool for user `{user_id}` after history exclusion"
        )));
    }
    let n = cfg.list_size.min(eligible.len());
    if n < cfg.list_size {
        log::warn!(
            "pool for `{user_id}` has {} items, emitting a short list",
            eligible.len()
        );
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let picked = rand::seq::index::sample(&mut rng, eligible.len(), n);
    let items = picked
        .iter()
        .enumerate()
        .map(|(rank, idx)| ScoredItem {
            id: eligible[idx].clone(),
            score: (n - rank) as f64 / n as f64,
        })
        .collect();
    Ok(RankedList {
        user_id: user_id.to_string(),
        items,
    })
}

fn row_mass(entries: &[(usize, f64)]) -> f64 {
    entries.iter().map(|(_, w)| w).sum()
}

/// Exact h-hop visit distribution over items for one user, alternating
/// row-stochastic user-to-item and item-to-user transitions.
pub fn walk_scores(
    matrix: &InteractionMatrix,
    user_id: &str,
    hops: usize,
) -> Result<Vec<f64>> {
    erased_walk(matrix, user_id, hops, &BTreeSet::new())
}

/// Walk with per-hop erasure: after every item-side hop past the first, the
/// mass on `erase` items is zeroed and the distribution renormalized. The
/// first item hop seeds the walk on the user's own history, so erasing there
/// would empty the distribution by construction.
pub fn erased_walk(
    matrix: &InteractionMatrix,
    user_id: &str,
    hops: usize,
    erase: &BTreeSet<usize>,
) -> Result<Vec<f64>> {
    if hops.is_multiple_of(2) || hops == 0 {
        return Err(Error::Config(format!("hops must be odd, got {hops}")));
    }
    let user = matrix
        .user_idx(user_id)
        .ok_or_else(|| Error::ColdUser(user_id.to_string()))?;
    if matrix.user_row(user).is_empty() {
        return Err(Error::ColdUser(user_id.to_string()));
    }

    let mut user_mass = vec![0.0; matrix.n_users()];
    user_mass[user] = 1.0;
    let mut item_mass = vec![0.0; matrix.n_items()];

    for hop in 0..hops {
        if hop % 2 == 0 {
            // user -> item
            item_mass.iter_mut().for_each(|m| *m = 0.0);
            for (u, mass) in user_mass.iter().enumerate() {
                if *mass == 0.0 {
                    continue;
                }
                let row = matrix.user_row(u);
                let total = row_mass(row);
                for (i, w) in row {
                    item_mass[*i] += mass * w / total;
                }
            }
            if hop > 0 && !erase.is_empty() {
                for idx in erase {
                    item_mass[*idx] = 0.0;
                }
                let total: f64 = item_mass.iter().sum();
                if total <= 0.0 {
                    return Err(Error::ColdUser(user_id.to_string()));
                }
                item_mass.iter_mut().for_each(|m| *m /= total);
            }
        } else {
            // item -> user
            user_mass.iter_mut().for_each(|m| *m = 0.0);
            for (i, mass) in item_mass.iter().enumerate() {
                if *mass == 0.0 {
                    continue;
                }
                let col = matrix.item_col(i);
                let total = row_mass(col);
                for (u, w) in col {
                    user_mass[*u] += mass * w / total;
                }
            }
        }
    }
    Ok(item_mass)
}

/// Pool candidates with positive walk mass, history excluded, ranked by
/// score descending with item-id tie-breaks.
fn ranked_from_scores(
    matrix: &InteractionMatrix,
    pool: &[String],
    user_id: &str,
    score_of: impl Fn(usize) -> f64,
    list_size: usize,
) -> RankedList {
    let history = matrix.history_items(user_id);
    let mut scored: Vec<ScoredItem> = pool
        .iter()
        .filter(|id| !history.contains(*id))
        .filter_map(|id| {
            let idx = matrix.item_idx(id)?;
            let score = score_of(idx);
            (score > 0.0).then(|| ScoredItem {
                id: id.clone(),
                score,
            })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    if scored.len() < list_size {
        log::warn!(
            "walk reached {} pool items for `{user_id}`, below the requested {list_size}",
            scored.len()
        );
    }
    scored.truncate(list_size);
    RankedList {
        user_id: user_id.to_string(),
        items: scored,
    }
}

/// RP3beta: walk visit probability discounted by item popularity.
pub fn recommend_rp3b(
    matrix: &InteractionMatrix,
    pool: &[String],
    user_id: &str,
    cfg: &ModelConfig,
) -> Result<RankedList> {
    let walk = walk_scores(matrix, user_id, cfg.hops)?;
    Ok(ranked_from_scores(
        matrix,
        pool,
        user_id,
        |idx| {
            let degree = matrix.item_degree(idx) as f64;
            if degree > 0.0 {
                walk[idx] * degree.powf(-cfg.beta)
            } else {
                0.0
            }
        },
        cfg.list_size,
    ))
}

/// RWE-D: walk with history erasure between hops; falls back to the random
/// baseline when erasure removes all reachable mass.
pub fn recommend_rwe(
    matrix: &InteractionMatrix,
    pool: &[String],
    user_id: &str,
    cfg: &ModelConfig,
) -> Result<RankedList> {
    let history: BTreeSet<usize> = matrix
        .history_items(user_id)
        .iter()
        .filter_map(|id| matrix.item_idx(id))
        .collect();
    match erased_walk(matrix, user_id, cfg.hops, &history) {
        Ok(walk) => Ok(ranked_from_scores(
            matrix,
            pool,
            user_id,
            |idx| walk[idx],
            cfg.list_size,
        )),
        Err(Error::ColdUser(_)) if !history.is_empty() => {
            log::warn!("history of `{user_id}` covers every reachable item; using random fallback");
            recommend_random(matrix, pool, user_id, cfg)
        }
        Err(e) => Err(e),
    }
}

/// D-RDW: walk-ranked greedy selection that admits an item only while every
/// NTD class count stays within quota; under-length lists are relaxed by
/// filling the largest quota deficits first.
pub fn recommend_drdw(
    matrix: &InteractionMatrix,
    corpus: &Corpus,
    pool: &[String],
    user_id: &str,
    cfg: &ModelConfig,
) -> Result<(RankedList, Vec<QuotaDeviation>)> {
    let ntd = cfg
        .ntd
        .as_ref()
        .ok_or_else(|| Error::Config("D-RDW requires an NTD".to_string()))?;
    let walk = walk_scores(matrix, user_id, cfg.hops)?;
    let history = matrix.history_items(user_id);

    // Classifiable pool entries with positive walk mass.
    let mut candidates: Vec<(ScoredItem, Vec<usize>)> = Vec::new();
    let mut classifiable = 0usize;
    for id in pool {
        let Some(item) = corpus.items.get(id) else { continue };
        let classes: Option<Vec<usize>> = ntd
            .dimensions
            .iter()
            .map(|nd| nd.dimension.assign_class(item).ok())
            .collect();
        let Some(classes) = classes else { continue };
        classifiable += 1;
        if history.contains(id) {
            continue;
        }
        let Some(idx) = matrix.item_idx(id) else { continue };
        if walk[idx] <= 0.0 {
            continue;
        }
        candidates.push((
            ScoredItem {
                id: id.clone(),
                score: walk[idx],
            },
            classes,
        ));
    }
    if classifiable == 0 {
        return Err(Error::Config(
            "no pool item is classifiable on every NTD dimension".to_string(),
        ));
    }
    candidates.sort_by(|a, b| {
        b.0.score
            .partial_cmp(&a.0.score)
            .unwrap()
            .then_with(|| a.0.id.cmp(&b.0.id))
    });

    let quotas = ntd.quotas(cfg.list_size);
    let mut counts: Vec<Vec<usize>> = quotas
        .per_dimension
        .iter()
        .map(|q| vec![0; q.len()])
        .collect();
    let mut selected: Vec<ScoredItem> = Vec::new();
    let mut taken = vec![false; candidates.len()];

    for (pos, (scored, classes)) in candidates.iter().enumerate() {
        if selected.len() == cfg.list_size {
            break;
        }
        let fits = classes
            .iter()
            .enumerate()
            .all(|(d, &c)| counts[d][c] < quotas.per_dimension[d][c]);
        if fits {
            for (d, &c) in classes.iter().enumerate() {
                counts[d][c] += 1;
            }
            selected.push(scored.clone());
            taken[pos] = true;
        }
    }

    // Relaxation: fill remaining slots minimizing the added quota deviation,
    // preferring the classes with the largest remaining deficit.
    while selected.len() < cfg.list_size {
        let mut best: Option<(usize, i64, i64)> = None;
        for (pos, (_, classes)) in candidates.iter().enumerate() {
            if taken[pos] {
                continue;
            }
            let mut under = 0i64;
            let mut deficit = 0i64;
            for (d, &c) in classes.iter().enumerate() {
                let quota = quotas.per_dimension[d][c] as i64;
                let have = counts[d][c] as i64;
                if have < quota {
                    under += 1;
                    deficit += quota - have;
                }
            }
            let better = match best {
                None => true,
                Some((_, best_under, best_deficit)) => {
                    (under, deficit) > (best_under, best_deficit)
                }
            };
            if better {
                best = Some((pos, under, deficit));
            }
        }
        let Some((pos, _, _)) = best else { break };
        let (scored, classes) = &candidates[pos];
        for (d, &c) in classes.iter().enumerate() {
            counts[d][c] += 1;
        }
        selected.push(scored.clone());
        taken[pos] = true;
    }

    let mut deviations = Vec::new();
    for (d, nd) in ntd.dimensions.iter().enumerate() {
        for (c, name) in nd.dimension.class_names().iter().enumerate() {
            if counts[d][c] != quotas.per_dimension[d][c] {
                deviations.push(QuotaDeviation {
                    dimension: nd.dimension.name.clone(),
                    class: name.clone(),
                    quota: quotas.per_dimension[d][c],
                    selected: counts[d][c],
                });
            }
        }
    }
    Ok((
        RankedList {
            user_id: user_id.to_string(),
            items: selected,
        },
        deviations,
    ))
}

fn recency_key(item: &Item) -> (i64, &str) {
    (item.published_at.unwrap_or(i64::MIN), item.item_id.as_str())
}

/// Recency order: newest first, `item_id` ascending on ties.
fn sort_by_recency(items: &mut [&Item]) {
    items.sort_by(|a, b| {
        let (ta, ia) = recency_key(a);
        let (tb, ib) = recency_key(b);
        tb.cmp(&ta).then_with(|| ia.cmp(ib))
    });
}

/// PLD: one shared list for every user, built from the largest political
/// story clusters (most recent item per cluster, cycling when clusters run
/// out). User histories are not excluded.
pub fn recommend_pld(
    corpus: &Corpus,
    pool: &[String],
    users: &[String],
    cfg: &ModelConfig,
) -> Result<BTreeMap<String, RankedList>> {
    let shared = pld_shared_items(corpus, pool, cfg)?;
    Ok(users
        .iter()
        .map(|user| {
            (
                user.clone(),
                RankedList {
                    user_id: user.clone(),
                    items: shared.clone(),
                },
            )
        })
        .collect())
}

fn pld_shared_items(corpus: &Corpus, pool: &[String], cfg: &ModelConfig) -> Result<Vec<ScoredItem>> {
    let mut clusters: BTreeMap<u64, Vec<&Item>> = BTreeMap::new();
    for id in pool {
        if let Some(item) = corpus.items.get(id) {
            if let Some(cluster) = item.story_cluster {
                clusters.entry(cluster).or_default().push(item);
            }
        }
    }
    let mut political: Vec<(u64, Vec<&Item>)> = clusters
        .into_iter()
        .filter(|(_, items)| items.iter().any(|i| i.party_label != PartyLabel::None))
        .collect();
    if political.is_empty() {
        return Err(Error::Config(
            "no story cluster contains political items".to_string(),
        ));
    }
    for (_, items) in political.iter_mut() {
        sort_by_recency(items);
    }
    // Largest clusters first; ties by lower cluster id.
    political.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));

    let mut picked = Vec::new();
    let mut round = 0usize;
    while picked.len() < cfg.list_size {
        let mut advanced = false;
        for (_, items) in &political {
            if picked.len() == cfg.list_size {
                break;
            }
            if let Some(item) = items.get(round) {
                picked.push(ScoredItem {
                    id: item.item_id.clone(),
                    score: items.len() as f64,
                });
                advanced = true;
            }
        }
        if !advanced {
            break;
        }
        round += 1;
    }
    Ok(picked)
}

/// EPD: round-robin over the political buckets until their combined NTD
/// share is filled, then the no-mentions bucket by recency. Buckets without
/// supply are skipped and their share is spread over the remaining ones.
pub fn recommend_epd(
    corpus: &Corpus,
    pool: &[String],
    user_id: &str,
    history: &BTreeSet<String>,
    cfg: &ModelConfig,
) -> Result<RankedList> {
    let ntd = cfg
        .ntd
        .as_ref()
        .ok_or_else(|| Error::Config("EPD requires an NTD".to_string()))?;
    let party_dim = ntd
        .dimensions
        .iter()
        .find(|nd| nd.dimension.kind == crate::ntd::DimensionKind::PartyBucket)
        .ok_or_else(|| Error::Config("EPD requires a party dimension in the NTD".to_string()))?;
    let quotas = crate::ntd::largest_remainder(cfg.list_size, &party_dim.proportions);
    let classes = party_dim.dimension.class_names();
    let none_idx = classes.iter().position(|c| c == "none");
    let political_share: usize = quotas
        .iter()
        .enumerate()
        .filter(|(idx, _)| Some(*idx) != none_idx)
        .map(|(_, q)| *q)
        .sum();

    let political_order = [
        PartyLabel::Governing,
        PartyLabel::Opposition,
        PartyLabel::Both,
        PartyLabel::Other,
    ];
    let mut buckets: BTreeMap<PartyLabel, Vec<&Item>> = BTreeMap::new();
    for id in pool {
        if history.contains(id) {
            continue;
        }
        if let Some(item) = corpus.items.get(id) {
            buckets.entry(item.party_label).or_default().push(item);
        }
    }
    for items in buckets.values_mut() {
        let mut refs: Vec<&Item> = items.clone();
        sort_by_recency(&mut refs);
        *items = refs;
    }
    for label in political_order {
        if buckets.get(&label).is_none_or(|b| b.is_empty()) {
            log::warn!("EPD bucket `{}` is empty; re-balancing", label.as_str());
        }
    }

    let mut cursors: BTreeMap<PartyLabel, usize> = BTreeMap::new();
    let mut picked: Vec<ScoredItem> = Vec::new();
    let mut political_taken = 0usize;
    loop {
        if political_taken >= political_share {
            break;
        }
        let mut advanced = false;
        for label in political_order {
            if political_taken >= political_share {
                break;
            }
            let cursor = cursors.entry(label).or_insert(0);
            if let Some(item) = buckets.get(&label).and_then(|b| b.get(*cursor)) {
                picked.push(ScoredItem {
                    id: item.item_id.clone(),
                    score: item.published_at.unwrap_or(0) as f64,
                });
                *cursor += 1;
                political_taken += 1;
                advanced = true;
            }
        }
        if !advanced {
            break;
        }
    }
    if let Some(none_items) = buckets.get(&PartyLabel::None) {
        for item in none_items {
            if picked.len() == cfg.list_size {
                break;
            }
            picked.push(ScoredItem {
                id: item.item_id.clone(),
                score: item.published_at.unwrap_or(0) as f64,
            });
        }
    }
    if picked.len() < cfg.list_size {
        log::warn!(
            "EPD produced {} of {} items for `{user_id}`",
            picked.len(),
            cfg.list_size
        );
    }
    Ok(RankedList {
        user_id: user_id.to_string(),
        items: picked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_matrix;
    use crate::testutil::{event, item, toy_graph_corpus};
    use approx::assert_abs_diff_eq;

    fn toy_matrix() -> InteractionMatrix {
        build_matrix(&toy_graph_corpus()).unwrap()
    }

    /// Brute-force oracle: enumerate every user-item-user-item path and sum
    /// the step probabilities. Only valid for 3 hops.
    fn enumerate_three_hops(matrix: &InteractionMatrix, user: &str) -> Vec<f64> {
        let u0 = matrix.user_idx(user).unwrap();
        let mut probs = vec![0.0; matrix.n_items()];
        let row0 = matrix.user_row(u0);
        for (i1, _) in row0 {
            let p1 = 1.0 / row0.len() as f64;
            let col = matrix.item_col(*i1);
            for (u1, _) in col {
                let p2 = p1 / col.len() as f64;
                let row1 = matrix.user_row(*u1);
                for (i2, _) in row1 {
                    probs[*i2] += p2 / row1.len() as f64;
                }
            }
        }
        probs
    }

    #[test]
    fn walk_matches_path_enumeration() {
        let matrix = toy_matrix();
        for user in matrix.users().to_vec() {
            let walk = walk_scores(&matrix, &user, 3).unwrap();
            let oracle = enumerate_three_hops(&matrix, &user);
            for (a, b) in walk.iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(walk.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn walk_single_user_component() {
        let mut corpus = toy_graph_corpus();
        corpus.histories.insert("solo".into(), vec![event("solo", "i9", 1)]);
        corpus.items.insert("i9".into(), item("i9", "news", Some(0.1), PartyLabel::None));
        let matrix = build_matrix(&corpus).unwrap();
        let walk = walk_scores(&matrix, "solo", 3).unwrap();
        let i9 = matrix.item_idx("i9").unwrap();
        assert_abs_diff_eq!(walk[i9], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(walk.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn walk_disconnected_item_gets_zero() {
        let matrix = toy_matrix();
        // i6 is only held by u5; from u1 the 3-hop mass on i6 must be zero
        // (no user shares items with both components' frontier).
        let walk = walk_scores(&matrix, "u1", 3).unwrap();
        let i6 = matrix.item_idx("i6").unwrap();
        assert_abs_diff_eq!(walk[i6], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn walk_rejects_cold_user() {
        let matrix = toy_matrix();
        assert!(matches!(
            walk_scores(&matrix, "nobody", 3),
            Err(Error::ColdUser(_))
        ));
    }

    #[test]
    fn rp3b_beta_zero_equals_raw_walk() {
        let matrix = toy_matrix();
        let pool: Vec<String> = matrix.items().to_vec();
        let cfg = ModelConfig {
            beta: 0.0,
            ..ModelConfig::default()
        };
        let list = recommend_rp3b(&matrix, &pool, "u1", &cfg).unwrap();
        let walk = walk_scores(&matrix, "u1", 3).unwrap();
        let history = matrix.history_items("u1");
        let mut expected: Vec<(String, f64)> = pool
            .iter()
            .filter(|id| !history.contains(*id))
            .map(|id| (id.clone(), walk[matrix.item_idx(id).unwrap()]))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        assert_eq!(
            list.item_ids(),
            expected.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rp3b_matches_hand_discounting() {
        let matrix = toy_matrix();
        let pool: Vec<String> = matrix.items().to_vec();
        for beta in [0.0, 0.7, 2.0] {
            let cfg = ModelConfig {
                beta,
                ..ModelConfig::default()
            };
            for user in matrix.users().to_vec() {
                let list = recommend_rp3b(&matrix, &pool, &user, &cfg).unwrap();
                let walk = walk_scores(&matrix, &user, 3).unwrap();
                for entry in &list.items {
                    let idx = matrix.item_idx(&entry.id).unwrap();
                    let expected = walk[idx] * (matrix.item_degree(idx) as f64).powf(-beta);
                    assert_abs_diff_eq!(entry.score, expected, epsilon = 1e-12);
                }
                // Scores are non-increasing down the list.
                for pair in list.items.windows(2) {
                    assert!(pair[0].score >= pair[1].score);
                }
            }
        }
    }

    #[test]
    fn rp3b_large_beta_prefers_unpopular_ties() {
        // u4 holds only i5 (degree 3). After one hop it reaches u3/u5, whose
        // items i3, i4, i6 carry walk mass; i4 and i6 tie on walk mass but
        // differ in degree only through beta = 0 (both degree 1), so compare
        // i3 (degree 2) versus i4 (degree 1) at equal walk mass instead.
        let matrix = toy_matrix();
        let walk = walk_scores(&matrix, "u4", 3).unwrap();
        let (i3, i4) = (matrix.item_idx("i3").unwrap(), matrix.item_idx("i4").unwrap());
        assert_abs_diff_eq!(walk[i3], walk[i4], epsilon = 1e-12);
        let pool: Vec<String> = matrix.items().to_vec();
        let cfg = ModelConfig {
            beta: 5.0,
            ..ModelConfig::default()
        };
        let list = recommend_rp3b(&matrix, &pool, "u4", &cfg).unwrap();
        let pos3 = list.items.iter().position(|s| s.id == "i3").unwrap();
        let pos4 = list.items.iter().position(|s| s.id == "i4").unwrap();
        assert!(pos4 < pos3, "low-degree item must rank first under large beta");
    }

    #[test]
    fn rp3b_ranking_invariant_under_weight_scaling() {
        let mut matrix = toy_matrix();
        let pool: Vec<String> = matrix.items().to_vec();
        let cfg = ModelConfig::default();
        let before = recommend_rp3b(&matrix, &pool, "u2", &cfg).unwrap();
        matrix.scale_weights(7.5);
        let after = recommend_rp3b(&matrix, &pool, "u2", &cfg).unwrap();
        assert_eq!(before.item_ids(), after.item_ids());
    }

    #[test]
    fn erased_walk_with_empty_set_is_plain_walk() {
        let matrix = toy_matrix();
        let plain = walk_scores(&matrix, "u3", 3).unwrap();
        let erased = erased_walk(&matrix, "u3", 3, &BTreeSet::new()).unwrap();
        assert_eq!(plain, erased);
    }

    #[test]
    fn rwe_erasure_matches_matrix_iteration_oracle() {
        let matrix = toy_matrix();
        let history: BTreeSet<usize> = matrix
            .history_items("u2")
            .iter()
            .filter_map(|id| matrix.item_idx(id))
            .collect();
        let got = erased_walk(&matrix, "u2", 3, &history).unwrap();

        // Oracle: explicit 3-hop iteration, erasing history mass after the
        // final item hop and renormalizing.
        let mut expected = enumerate_three_hops_erased(&matrix, "u2", &history);
        let total: f64 = expected.iter().sum();
        expected.iter_mut().for_each(|m| *m /= total);
        for (a, b) in got.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    fn enumerate_three_hops_erased(
        matrix: &InteractionMatrix,
        user: &str,
        erase: &BTreeSet<usize>,
    ) -> Vec<f64> {
        let mut probs = enumerate_three_hops(matrix, user);
        for idx in erase {
            probs[*idx] = 0.0;
        }
        probs
    }

    #[test]
    fn rwe_full_coverage_falls_back_to_random() {
        // A solo user whose reachable set equals the history.
        let mut corpus = toy_graph_corpus();
        corpus.histories.insert(
            "solo".into(),
            vec![event("solo", "s1", 1), event("solo", "s2", 2)],
        );
        corpus.items.insert("s1".into(), item("s1", "news", Some(0.1), PartyLabel::None));
        corpus.items.insert("s2".into(), item("s2", "news", Some(0.2), PartyLabel::None));
        let matrix = build_matrix(&corpus).unwrap();
        let pool: Vec<String> = matrix.items().to_vec();
        let cfg = ModelConfig {
            list_size: 2,
            seed: 42,
            ..ModelConfig::default()
        };
        let list = recommend_rwe(&matrix, &pool, "solo", &cfg).unwrap();
        let random = recommend_random(&matrix, &pool, "solo", &cfg).unwrap();
        assert_eq!(list, random);
    }

    #[test]
    fn random_short_pool_yields_short_list() {
        let matrix = toy_matrix();
        let pool = vec!["i1".to_string(), "i2".to_string(), "i3".to_string()];
        let cfg = ModelConfig {
            list_size: 20,
            seed: 5,
            ..ModelConfig::default()
        };
        // u4's history is {i5}: all three pool items eligible.
        let list = recommend_random(&matrix, &pool, "u4", &cfg).unwrap();
        assert_eq!(list.items.len(), 3);
    }

    #[test]
    fn random_is_seed_deterministic() {
        let matrix = toy_matrix();
        let pool: Vec<String> = matrix.items().to_vec();
        let cfg = ModelConfig {
            list_size: 3,
            seed: 99,
            ..ModelConfig::default()
        };
        let a = recommend_random(&matrix, &pool, "u1", &cfg).unwrap();
        let b = recommend_random(&matrix, &pool, "u1", &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_inclusion_is_uniform() {
        let matrix = toy_matrix();
        // 10-item pool, no history exclusion for a fresh user id is not
        // possible (cold user), so use u4 with history {i5} excluded and a
        // dedicated pool without it.
        let pool: Vec<String> = (0..10).map(|k| format!("p{k}")).collect();
        let mut corpus = toy_graph_corpus();
        for id in &pool {
            corpus.items.insert(id.clone(), item(id, "news", Some(0.0), PartyLabel::None));
        }
        let _ = matrix;
        let matrix = build_matrix(&corpus).unwrap();
        let draws = 10_000usize;
        let k = 3usize;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for seed in 0..draws {
            let cfg = ModelConfig {
                list_size: k,
                seed: seed as u64,
                ..ModelConfig::default()
            };
            let list = recommend_random(&matrix, &pool, "u4", &cfg).unwrap();
            for entry in list.items {
                *counts.entry(entry.id).or_insert(0) += 1;
            }
        }
        let expected = draws as f64 * k as f64 / pool.len() as f64;
        let sigma = (draws as f64 * (k as f64 / pool.len() as f64)
            * (1.0 - k as f64 / pool.len() as f64))
            .sqrt();
        for id in &pool {
            let got = *counts.get(id).unwrap_or(&0) as f64;
            assert!(
                (got - expected).abs() <= 3.0 * sigma,
                "item {id}: {got} vs {expected} +- {}",
                3.0 * sigma
            );
        }
    }

    fn rich_corpus() -> Corpus {
        // 160 items covering every (party x sentiment bin) combination
        // eight times, so the cap-greedy never starves a bucket after
        // history exclusion.
        let sentiments = [-0.75, -0.25, 0.25, 0.75];
        let labels = PartyLabel::ALL;
        let mut corpus = toy_graph_corpus();
        corpus.items.clear();
        let mut idx = 0;
        for rep in 0..8 {
            for &label in &labels {
                for &s in &sentiments {
                    let id = format!("r{idx:03}");
                    let mut it = item(&id, "news", Some(s), label);
                    it.story_cluster = Some((idx % 7) as u64);
                    it.published_at = Some(1_700_000_000 + idx as i64 * 60 + rep);
                    corpus.items.insert(id, it);
                    idx += 1;
                }
            }
        }
        // Three users with interleaved stride-3 histories plus shared anchor
        // items, so the graph is connected and every bucket stays reachable.
        let ids: Vec<String> = corpus.items.keys().cloned().collect();
        corpus.histories.clear();
        for u in 0..3 {
            let mut events: Vec<_> = ids
                .iter()
                .enumerate()
                .filter(|(k, _)| k % 3 == u || *k < 3)
                .map(|(k, id)| event(&format!("w{u}"), id, k as i64))
                .collect();
            events.dedup_by(|a, b| a.item_id == b.item_id);
            corpus.histories.insert(format!("w{u}"), events);
        }
        corpus.impressions.clear();
        corpus
    }

    #[test]
    fn drdw_hits_quotas_exactly_on_rich_pool() {
        let corpus = rich_corpus();
        let matrix = build_matrix(&corpus).unwrap();
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let (list, deviations) = recommend_drdw(&matrix, &corpus, &pool, "w0", &cfg).unwrap();
        assert_eq!(list.items.len(), 20);
        assert!(deviations.is_empty(), "{deviations:?}");
        let ntd = cfg.ntd.as_ref().unwrap();
        let quotas = ntd.quotas(20);
        for (d, nd) in ntd.dimensions.iter().enumerate() {
            let mut counts = vec![0usize; nd.dimension.class_count()];
            for entry in &list.items {
                counts[nd.dimension.assign_class(&corpus.items[&entry.id]).unwrap()] += 1;
            }
            assert_eq!(counts, quotas.per_dimension[d]);
        }
    }

    #[test]
    fn drdw_reports_missing_bucket() {
        let mut corpus = rich_corpus();
        // Remove every Opposition item.
        let opposition: Vec<String> = corpus
            .items
            .values()
            .filter(|i| i.party_label == PartyLabel::Opposition)
            .map(|i| i.item_id.clone())
            .collect();
        for id in &opposition {
            corpus.items.remove(id);
        }
        for events in corpus.histories.values_mut() {
            events.retain(|e| corpus.items.contains_key(&e.item_id));
        }
        let matrix = build_matrix(&corpus).unwrap();
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let (_, deviations) = recommend_drdw(&matrix, &corpus, &pool, "w0", &cfg).unwrap();
        assert!(
            deviations.iter().any(|d| d.class == "opposition" && d.selected < d.quota),
            "{deviations:?}"
        );
    }

    #[test]
    fn sparse_graph_needs_more_hops_for_twenty_items() {
        // Star-of-stars replica of a sparse interaction graph: 3 hops reach
        // fewer than 20 items, 5 hops reach more.
        let mut corpus = toy_graph_corpus();
        corpus.items.clear();
        corpus.histories.clear();
        corpus.impressions.clear();
        let mut add_item = |id: &str| {
            corpus
                .items
                .insert(id.to_string(), item(id, "news", Some(0.0), PartyLabel::None));
        };
        let mut histories: BTreeMap<String, Vec<crate::corpus::HistoryEvent>> = BTreeMap::new();
        for j in 0..4 {
            add_item(&format!("a{j}"));
            histories
                .entry("u0".to_string())
                .or_default()
                .push(event("u0", &format!("a{j}"), j as i64));
            let mid = format!("v{j}");
            histories
                .entry(mid.clone())
                .or_default()
                .push(event(&mid, &format!("a{j}"), 0));
            for k in 0..2 {
                let b = format!("b{j}{k}");
                add_item(&b);
                histories.entry(mid.clone()).or_default().push(event(&mid, &b, k as i64 + 1));
                let leaf = format!("w{j}{k}");
                histories.entry(leaf.clone()).or_default().push(event(&leaf, &b, 0));
                for c in 0..3 {
                    let cid = format!("c{j}{k}{c}");
                    add_item(&cid);
                    histories
                        .entry(leaf.clone())
                        .or_default()
                        .push(event(&leaf, &cid, c as i64 + 1));
                }
            }
        }
        corpus.histories = histories;
        let matrix = build_matrix(&corpus).unwrap();
        let three = walk_scores(&matrix, "u0", 3).unwrap();
        let five = walk_scores(&matrix, "u0", 5).unwrap();
        let reached = |v: &[f64]| v.iter().filter(|m| **m > 0.0).count();
        assert!(reached(&three) < 20, "3 hops reached {}", reached(&three));
        assert!(reached(&five) >= 20, "5 hops reached {}", reached(&five));
    }

    fn clustered_corpus(n_clusters: u64) -> Corpus {
        let mut corpus = toy_graph_corpus();
        corpus.items.clear();
        let mut idx = 0;
        for cluster in 0..n_clusters {
            // Cluster size grows with the id so sizes are distinct; every
            // cluster holds one political item.
            let size = 2 + (cluster % 3);
            for j in 0..=size {
                let id = format!("c{cluster:02}_{j}");
                let label = if j == 0 { PartyLabel::Governing } else { PartyLabel::None };
                let mut it = item(&id, "news", Some(0.1), label);
                it.story_cluster = Some(cluster);
                it.published_at = Some(1_700_000_000 + (cluster * 100 + j) as i64);
                corpus.items.insert(id, it);
                idx += 1;
            }
        }
        let _ = idx;
        corpus
    }

    #[test]
    fn pld_one_item_per_cluster() {
        let corpus = clustered_corpus(25);
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let users = vec!["u1".to_string()];
        let lists = recommend_pld(&corpus, &pool, &users, &cfg).unwrap();
        let list = &lists["u1"];
        assert_eq!(list.items.len(), 20);
        let clusters: BTreeSet<u64> = list
            .items
            .iter()
            .map(|s| corpus.items[&s.id].story_cluster.unwrap())
            .collect();
        assert_eq!(clusters.len(), 20, "twenty distinct clusters");
    }

    #[test]
    fn pld_lists_are_identical_across_users() {
        let corpus = clustered_corpus(25);
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let users = vec!["u1".to_string(), "u2".to_string()];
        let lists = recommend_pld(&corpus, &pool, &users, &cfg).unwrap();
        assert_eq!(lists["u1"].items, lists["u2"].items);
    }

    #[test]
    fn pld_cluster_size_tie_prefers_lower_id() {
        // Clusters 0 and 3 both have size 3 (2 + cluster % 3).
        let corpus = clustered_corpus(6);
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            list_size: 6,
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let users = vec!["u1".to_string()];
        let lists = recommend_pld(&corpus, &pool, &users, &cfg).unwrap();
        let order: Vec<u64> = lists["u1"]
            .items
            .iter()
            .map(|s| corpus.items[&s.id].story_cluster.unwrap())
            .collect();
        // Sizes: cluster 1,4 -> 4 items; 2,5 -> 5 items; 0,3 -> 3 items.
        // Largest first with id tie-breaks: 2, 5, 1, 4, 0, 3.
        assert_eq!(order, vec![2, 5, 1, 4, 0, 3]);
    }

    #[test]
    fn pld_requires_political_clusters() {
        let mut corpus = clustered_corpus(4);
        for it in corpus.items.values_mut() {
            it.party_mentions.clear();
            it.party_label = PartyLabel::None;
        }
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig::default();
        assert!(recommend_pld(&corpus, &pool, &["u1".to_string()], &cfg).is_err());
    }

    fn epd_corpus() -> Corpus {
        let mut corpus = toy_graph_corpus();
        corpus.items.clear();
        let mut idx = 0;
        for &label in &PartyLabel::ALL {
            for j in 0..10 {
                let id = format!("e{idx:02}");
                let mut it = item(&id, "news", Some(0.1), label);
                it.published_at = Some(1_700_000_000 + idx as i64);
                corpus.items.insert(id, it);
                idx += 1;
                let _ = j;
            }
        }
        corpus
    }

    #[test]
    fn epd_default_ntd_bucket_counts() {
        let corpus = epd_corpus();
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let list =
            recommend_epd(&corpus, &pool, "u1", &BTreeSet::new(), &cfg).unwrap();
        let mut counts: BTreeMap<PartyLabel, usize> = BTreeMap::new();
        for entry in &list.items {
            *counts.entry(corpus.items[&entry.id].party_label).or_insert(0) += 1;
        }
        assert_eq!(counts[&PartyLabel::Governing], 3);
        assert_eq!(counts[&PartyLabel::Opposition], 3);
        assert_eq!(counts[&PartyLabel::Both], 3);
        assert_eq!(counts[&PartyLabel::Other], 3);
        assert_eq!(counts[&PartyLabel::None], 8);
    }

    #[test]
    fn epd_rebalances_missing_bucket() {
        let mut corpus = epd_corpus();
        let opposition: Vec<String> = corpus
            .items
            .values()
            .filter(|i| i.party_label == PartyLabel::Opposition)
            .map(|i| i.item_id.clone())
            .collect();
        for id in opposition {
            corpus.items.remove(&id);
        }
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let list = recommend_epd(&corpus, &pool, "u1", &BTreeSet::new(), &cfg).unwrap();
        let mut counts: BTreeMap<PartyLabel, usize> = BTreeMap::new();
        for entry in &list.items {
            *counts.entry(corpus.items[&entry.id].party_label).or_insert(0) += 1;
        }
        assert_eq!(counts[&PartyLabel::Governing], 4);
        assert_eq!(counts[&PartyLabel::Both], 4);
        assert_eq!(counts[&PartyLabel::Other], 4);
        assert_eq!(counts[&PartyLabel::None], 8);
    }

    #[test]
    fn epd_recency_tie_breaks_by_item_id() {
        let mut corpus = epd_corpus();
        for it in corpus.items.values_mut() {
            it.published_at = Some(1_700_000_000);
        }
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let list = recommend_epd(&corpus, &pool, "u1", &BTreeSet::new(), &cfg).unwrap();
        // First pick is the lexicographically smallest governing item.
        let first_governing = corpus
            .items
            .values()
            .filter(|i| i.party_label == PartyLabel::Governing)
            .map(|i| i.item_id.clone())
            .min()
            .unwrap();
        assert_eq!(list.items[0].id, first_governing);
    }

    #[test]
    fn epd_excludes_history() {
        let corpus = epd_corpus();
        let pool: Vec<String> = corpus.items.keys().cloned().collect();
        let cfg = ModelConfig {
            ntd: Some(Ntd::default_news()),
            ..ModelConfig::default()
        };
        let newest_governing = corpus
            .items
            .values()
            .filter(|i| i.party_label == PartyLabel::Governing)
            .max_by_key(|i| i.published_at)
            .unwrap()
            .item_id
            .clone();
        let history: BTreeSet<String> = [newest_governing.clone()].into();
        let list = recommend_epd(&corpus, &pool, "u1", &history, &cfg).unwrap();
        assert!(!list.contains(&newest_governing));
    }
}
