//! Diversity metrics: distributions, JS divergence, Gini, (E)ILD, alpha-nDCG,
//! binomial diversity, the normative divergence suite, and AUC.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Impression, Item, PartyLabel};
use crate::error::{Error, Result};
use crate::ntd::Dimension;
use crate::seeding::user_seed;

/// Empirical class distribution over a fixed, ordered class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub classes: Vec<String>,
    pub mass: Vec<f64>,
    /// Set when no item contributed any mass.
    pub empty: bool,
}

impl Distribution {
    pub fn from_counts(classes: Vec<String>, counts: &[usize]) -> Distribution {
        let total: usize = counts.iter().sum();
        if total == 0 {
            let mass = vec![0.0; counts.len()];
            return Distribution {
                classes,
                mass,
                empty: true,
            };
        }
        let mass = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Distribution {
            classes,
            mass,
            empty: false,
        }
    }
}

/// Class frequencies of `items` over the dimension's full class set;
/// zero-count classes stay in the support.
pub fn build_distribution(items: &[&Item], dimension: &Dimension) -> Result<Distribution> {
    let mut counts = vec![0usize; dimension.class_count()];
    for item in items {
        let class = dimension.assign_class(item)?;
        counts[class] += 1;
    }
    Ok(Distribution::from_counts(dimension.class_names(), &counts))
}

fn kl_base2(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi > 0.0 {
                pi * (pi / qi).log2()
            } else {
                0.0
            }
        })
        .sum()
}

/// Jensen-Shannon divergence, log base 2, bounded by [0, 1].
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.classes != q.classes {
        return Err(Error::ClassMismatch(format!(
            "{:?} vs {:?}",
            p.classes, q.classes
        )));
    }
    Ok(jsd_mass(&p.mass, &q.mass))
}

/// JSD on raw mass vectors of equal length.
pub fn jsd_mass(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| 0.5 * (pi + qi))
        .collect();
    let value = 0.5 * kl_base2(p, &m) + 0.5 * kl_base2(q, &m);
    value.clamp(0.0, 1.0)
}

/// Gini coefficient of a class distribution with the `(n - 1)` denominator,
/// so a uniform distribution scores 0 and a point mass scores 1.
pub fn gini_from_mass(mass: &[f64]) -> f64 {
    let n = mass.len();
    if n < 2 {
        return 0.0;
    }
    let mut sorted = mass.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_f = n as f64;
    let sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| (2.0 * (i + 1) as f64 - n_f - 1.0) * p)
        .sum();
    sum / (n_f - 1.0)
}

pub fn gini(d: &Distribution) -> f64 {
    gini_from_mass(&d.mass)
}

/// Intra-list distance of one-hot class vectors: the fraction of item pairs
/// in different classes. `None` for lists shorter than 2.
pub fn ild_from_counts(counts: &[usize]) -> Option<f64> {
    let n: usize = counts.iter().sum();
    if n < 2 {
        return None;
    }
    let same: usize = counts.iter().map(|&c| c * (c.saturating_sub(1)) / 2).sum();
    let total = n * (n - 1) / 2;
    Some(1.0 - same as f64 / total as f64)
}

pub fn ild(items: &[&Item], dimension: &Dimension) -> Result<Option<f64>> {
    let mut counts = vec![0usize; dimension.class_count()];
    for item in items {
        counts[dimension.assign_class(item)?] += 1;
    }
    Ok(ild_from_counts(&counts))
}

/// Rank-discounted intra-list distance with disc(r) = 1 / log2(r + 1).
pub fn eild(items: &[&Item], dimension: &Dimension) -> Result<Option<f64>> {
    if items.len() < 2 {
        return Ok(None);
    }
    let classes: Vec<usize> = items
        .iter()
        .map(|item| dimension.assign_class(item))
        .collect::<Result<_>>()?;
    let disc: Vec<f64> = (1..=items.len())
        .map(|r| 1.0 / ((r + 1) as f64).log2())
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..items.len() {
        for l in 0..items.len() {
            if k == l {
                continue;
            }
            let w = disc[k] * disc[l];
            den += w;
            if classes[k] != classes[l] {
                num += w;
            }
        }
    }
    Ok(Some(num / den))
}

/// alpha-nDCG over a ranked list with binary relevance and per-item aspect
/// sets; the ideal ranking is the greedy reordering of the same items.
pub fn alpha_ndcg(
    ranked: &[String],
    relevant: &BTreeSet<String>,
    aspects: &BTreeMap<String, BTreeSet<String>>,
    alpha: f64,
) -> f64 {
    if !ranked.iter().any(|id| relevant.contains(id)) {
        return 0.0;
    }
    let dcg = alpha_dcg_order(ranked, relevant, aspects, alpha);
    let ideal = greedy_ideal_dcg(ranked, relevant, aspects, alpha);
    if ideal <= 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

fn item_gain(
    id: &str,
    relevant: &BTreeSet<String>,
    aspects: &BTreeMap<String, BTreeSet<String>>,
    alpha: f64,
    seen: &BTreeMap<String, usize>,
) -> f64 {
    if !relevant.contains(id) {
        return 0.0;
    }
    aspects
        .get(id)
        .map(|set| {
            set.iter()
                .map(|a| (1.0 - alpha).powi(*seen.get(a).unwrap_or(&0) as i32))
                .sum()
        })
        .unwrap_or(0.0)
}

fn credit_aspects(
    id: &str,
    relevant: &BTreeSet<String>,
    aspects: &BTreeMap<String, BTreeSet<String>>,
    seen: &mut BTreeMap<String, usize>,
) {
    if !relevant.contains(id) {
        return;
    }
    if let Some(set) = aspects.get(id) {
        for a in set {
            *seen.entry(a.clone()).or_insert(0) += 1;
        }
    }
}

fn alpha_dcg_order(
    order: &[String],
    relevant: &BTreeSet<String>,
    aspects: &BTreeMap<String, BTreeSet<String>>,
    alpha: f64,
) -> f64 {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut dcg = 0.0;
    for (k, id) in order.iter().enumerate() {
        let gain = item_gain(id, relevant, aspects, alpha, &seen);
        dcg += gain / ((k + 2) as f64).log2();
        credit_aspects(id, relevant, aspects, &mut seen);
    }
    dcg
}

fn greedy_ideal_dcg(
    items: &[String],
    relevant: &BTreeSet<String>,
    aspects: &BTreeMap<String, BTreeSet<String>>,
    alpha: f64,
) -> f64 {
    let mut remaining: Vec<&String> = items.iter().collect();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut dcg = 0.0;
    for k in 0..items.len() {
        let best = remaining
            .iter()
            .enumerate()
            .map(|(pos, id)| (pos, item_gain(id, relevant, aspects, alpha, &seen)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(pos, _)| pos);
        let Some(pos) = best else { break };
        let id = remaining.remove(pos);
        let gain = item_gain(id, relevant, aspects, alpha, &seen);
        dcg += gain / ((k + 2) as f64).log2();
        credit_aspects(id, relevant, aspects, &mut seen);
    }
    dcg
}

fn binom_pmf_table(n: usize, p: f64) -> Vec<f64> {
    // pmf[j] = C(n, j) p^j (1-p)^(n-j), built by recurrence.
    let mut pmf = vec![0.0; n + 1];
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    pmf[0] = (1.0 - p).powi(n as i32);
    for j in 0..n {
        pmf[j + 1] = pmf[j] * (n - j) as f64 / (j + 1) as f64 * p / (1.0 - p);
    }
    pmf
}

/// Binomial diversity: the product of genre Coverage and NonRedundancy terms,
/// with genre priors estimated from the pool.
pub fn binomial_diversity(
    list: &[String],
    genres: &BTreeMap<String, BTreeSet<String>>,
    pool: &[String],
) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Config("empty pool for binomial diversity".into()));
    }
    if list.is_empty() {
        return Ok(0.0);
    }
    let mut genre_pool_counts: BTreeMap<&String, usize> = BTreeMap::new();
    for id in pool {
        if let Some(gs) = genres.get(id) {
            for g in gs {
                *genre_pool_counts.entry(g).or_insert(0) += 1;
            }
        }
    }
    let mut list_counts: BTreeMap<&String, usize> = BTreeMap::new();
    for id in list {
        if let Some(gs) = genres.get(id) {
            for g in gs {
                *list_counts.entry(g).or_insert(0) += 1;
            }
        }
    }
    let all_genres: BTreeSet<&String> = genre_pool_counts
        .keys()
        .copied()
        .chain(list_counts.keys().copied())
        .collect();
    if all_genres.is_empty() {
        return Err(Error::Config("no genres in pool".into()));
    }
    let g_total = all_genres.len() as f64;
    let n = list.len();
    let mut coverage = 1.0;
    let mut non_redundancy = 1.0;
    for genre in all_genres {
        let p = *genre_pool_counts.get(genre).unwrap_or(&0) as f64 / pool.len() as f64;
        let k = *list_counts.get(genre).unwrap_or(&0);
        if k == 0 {
            // P(X_g = 0) ^ (1/|G|)
            coverage *= (1.0 - p).powi(n as i32).powf(1.0 / g_total);
        } else if p == 0.0 {
            // Limit case of a genre unseen in the pool.
            if k > 1 {
                non_redundancy = 0.0;
            }
        } else {
            let pmf = binom_pmf_table(n, p);
            let p_zero = pmf[0];
            let p_below: f64 = pmf[..k].iter().sum();
            let conditional = ((p_below - p_zero) / (1.0 - p_zero)).clamp(0.0, 1.0);
            non_redundancy *= (1.0 - conditional).max(0.0).powf(1.0 / g_total);
        }
    }
    Ok(coverage * non_redundancy)
}

/// AUC over impressions plus bookkeeping for skipped impressions and missing
/// scores (missing scores rank below everything).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub value: Option<f64>,
    pub impressions_used: usize,
    pub impressions_skipped: usize,
    pub missing_scores: usize,
}

/// Per impression: the fraction of (clicked, unclicked) pairs where the
/// clicked item outscores the unclicked one, ties counting one half.
/// Impression values are averaged per user, then across users.
pub fn auc<F>(score_of: F, impressions: &[Impression]) -> AucSummary
where
    F: Fn(&str, &str) -> Option<f64>,
{
    let mut summary = AucSummary::default();
    let mut per_user: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for imp in impressions {
        let mut clicked = Vec::new();
        let mut unclicked = Vec::new();
        for shown in &imp.shown {
            let score = match score_of(&imp.user_id, &shown.item_id) {
                Some(s) => s,
                None => {
                    summary.missing_scores += 1;
                    f64::NEG_INFINITY
                }
            };
            if shown.clicked {
                clicked.push(score);
            } else {
                unclicked.push(score);
            }
        }
        if clicked.is_empty() || unclicked.is_empty() {
            summary.impressions_skipped += 1;
            continue;
        }
        let mut wins = 0.0;
        for &c in &clicked {
            for &u in &unclicked {
                if c > u {
                    wins += 1.0;
                } else if c == u {
                    wins += 0.5;
                }
            }
        }
        let value = wins / (clicked.len() * unclicked.len()) as f64;
        per_user.entry(&imp.user_id).or_default().push(value);
        summary.impressions_used += 1;
    }
    if !per_user.is_empty() {
        let user_means: Vec<f64> = per_user
            .values()
            .map(|vs| vs.iter().sum::<f64>() / vs.len() as f64)
            .collect();
        summary.value = Some(user_means.iter().sum::<f64>() / user_means.len() as f64);
    }
    summary
}

/// Metric values for one list (or one aggregate row).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub activation: Option<f64>,
    pub cat_calibration: Option<f64>,
    pub comp_calibration: Option<f64>,
    pub fragmentation: Option<f64>,
    pub alt_voices: Option<f64>,
    pub representation: Option<f64>,
    pub gini: BTreeMap<String, f64>,
    pub ild: BTreeMap<String, f64>,
    pub eild: BTreeMap<String, f64>,
    pub alpha_ndcg: Option<f64>,
    pub binomial_diversity: Option<f64>,
    pub auc: Option<f64>,
}

/// Per-user metric values plus their mean.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_user: BTreeMap<String, MetricValues>,
    pub aggregate: MetricValues,
}

impl MetricReport {
    pub fn from_per_user(per_user: BTreeMap<String, MetricValues>) -> MetricReport {
        let aggregate = aggregate_values(per_user.values());
        MetricReport {
            per_user,
            aggregate,
        }
    }
}

fn mean_of(values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Mean over users; absent values are excluded from their metric's mean.
pub fn aggregate_values<'a>(rows: impl Iterator<Item = &'a MetricValues>) -> MetricValues {
    let rows: Vec<&MetricValues> = rows.collect();
    let pick =
        |f: fn(&MetricValues) -> Option<f64>| mean_of(rows.iter().filter_map(|r| f(r)).collect());
    let mut out = MetricValues {
        activation: pick(|r| r.activation),
        cat_calibration: pick(|r| r.cat_calibration),
        comp_calibration: pick(|r| r.comp_calibration),
        fragmentation: pick(|r| r.fragmentation),
        alt_voices: pick(|r| r.alt_voices),
        representation: pick(|r| r.representation),
        alpha_ndcg: pick(|r| r.alpha_ndcg),
        binomial_diversity: pick(|r| r.binomial_diversity),
        auc: pick(|r| r.auc),
        ..MetricValues::default()
    };
    let mut keys: BTreeSet<&String> = BTreeSet::new();
    for row in &rows {
        keys.extend(row.gini.keys());
        keys.extend(row.ild.keys());
        keys.extend(row.eild.keys());
    }
    type MapOf = fn(&MetricValues) -> &BTreeMap<String, f64>;
    let projections: [(MapOf, &mut BTreeMap<String, f64>); 3] = [
        (|r| &r.gini, &mut out.gini),
        (|r| &r.ild, &mut out.ild),
        (|r| &r.eild, &mut out.eild),
    ];
    for (field, out_map) in projections {
        for key in &keys {
            let values: Vec<f64> = rows.iter().filter_map(|r| field(r).get(*key).copied()).collect();
            if let Some(mean) = mean_of(values) {
                out_map.insert((*key).clone(), mean);
            }
        }
    }
    out
}

/// Inputs for the normative divergence suite.
pub struct RadioInputs<'a> {
    pub corpus: &'a Corpus,
    /// Per-user recommendation lists (item ids in rank order).
    pub recommendations: &'a BTreeMap<String, Vec<String>>,
    /// Per-user reading history used by the calibration metrics.
    pub histories: &'a BTreeMap<String, BTreeSet<String>>,
    /// Reference pool (test-set impression items).
    pub pool: &'a [String],
    pub seed: u64,
    /// Number of users sampled per user by fragmentation.
    pub fragmentation_samples: usize,
}

/// Per-user divergence values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RadioValues {
    pub activation: Option<f64>,
    pub cat_calibration: Option<f64>,
    pub comp_calibration: Option<f64>,
    pub fragmentation: Option<f64>,
    pub representation: Option<f64>,
    pub alt_voices: Option<f64>,
}

fn items_of<'a>(corpus: &'a Corpus, ids: impl IntoIterator<Item = &'a String>) -> Vec<&'a Item> {
    ids.into_iter()
        .filter_map(|id| corpus.items.get(id))
        .collect()
}

/// Four equal |sentiment| bins over [0, 1].
fn activation_class(item: &Item) -> Option<usize> {
    let s = item.sentiment?.abs().clamp(0.0, 1.0);
    Some(if s >= 0.75 {
        3
    } else {
        (s / 0.25) as usize
    })
}

fn activation_distribution(items: &[&Item]) -> Distribution {
    let mut counts = vec![0usize; 4];
    for item in items {
        if let Some(c) = activation_class(item) {
            counts[c] += 1;
        }
    }
    let classes = vec![
        "[0,0.25)".to_string(),
        "[0.25,0.5)".to_string(),
        "[0.5,0.75)".to_string(),
        "[0.75,1]".to_string(),
    ];
    Distribution::from_counts(classes, &counts)
}

/// Minority (= Other bucket) vs majority (= Governing, Opposition, or Both);
/// items without party mentions carry no voice.
fn voices_distribution(items: &[&Item]) -> Distribution {
    let mut counts = vec![0usize; 2];
    for item in items {
        match item.party_label {
            PartyLabel::Other => counts[0] += 1,
            PartyLabel::Governing | PartyLabel::Opposition | PartyLabel::Both => counts[1] += 1,
            PartyLabel::None => {}
        }
    }
    Distribution::from_counts(vec!["minority".to_string(), "majority".to_string()], &counts)
}

fn classified_distribution(items: &[&Item], dimension: &Dimension) -> Distribution {
    // Items that cannot be classified on the dimension are skipped.
    let mut counts = vec![0usize; dimension.class_count()];
    for item in items {
        if let Ok(c) = dimension.assign_class(item) {
            counts[c] += 1;
        }
    }
    Distribution::from_counts(dimension.class_names(), &counts)
}

fn jsd_opt(p: &Distribution, q: &Distribution) -> Option<f64> {
    if p.empty || q.empty {
        return None;
    }
    jsd(p, q).ok()
}

/// Dimensions derived from the cleaned corpus contents.
pub fn corpus_category_dimension(corpus: &Corpus) -> Dimension {
    let names: BTreeSet<String> = corpus
        .items
        .values()
        .map(|i| i.category.clone())
        .filter(|c| !c.is_empty())
        .collect();
    Dimension::categories(names)
}

pub fn corpus_cluster_dimension(corpus: &Corpus) -> Dimension {
    let ids: BTreeSet<u64> = corpus
        .items
        .values()
        .filter_map(|i| i.story_cluster)
        .collect();
    Dimension::story_clusters(ids)
}

/// Width-10 complexity bins over [0, 100].
pub fn default_complexity_dimension() -> Dimension {
    let edges: Vec<f64> = (0..=10).map(|k| k as f64 * 10.0).collect();
    Dimension::complexity_bins(&edges)
}

/// Activation, calibration, fragmentation, representation, and alternative
/// voices for every user with a recommendation list.
pub fn radio_suite(inputs: &RadioInputs<'_>) -> BTreeMap<String, RadioValues> {
    let corpus = inputs.corpus;
    let category_dim = corpus_category_dimension(corpus);
    let complexity_dim = default_complexity_dimension();
    let cluster_dim = corpus_cluster_dimension(corpus);
    let party_dim = Dimension::party_buckets();

    let pool_items = items_of(corpus, inputs.pool.iter());
    let pool_activation = activation_distribution(&pool_items);
    let pool_party = classified_distribution(&pool_items, &party_dim);
    let pool_voices = voices_distribution(&pool_items);

    let rec_clusters: BTreeMap<&String, Distribution> = inputs
        .recommendations
        .iter()
        .map(|(user, ids)| {
            (
                user,
                classified_distribution(&items_of(corpus, ids.iter()), &cluster_dim),
            )
        })
        .collect();
    let user_ids: Vec<&String> = inputs.recommendations.keys().collect();

    let mut out = BTreeMap::new();
    for (user, ids) in inputs.recommendations {
        let rec_items = items_of(corpus, ids.iter());
        let mut values = RadioValues {
            activation: jsd_opt(&activation_distribution(&rec_items), &pool_activation),
            representation: jsd_opt(
                &classified_distribution(&rec_items, &party_dim),
                &pool_party,
            ),
            alt_voices: jsd_opt(&voices_distribution(&rec_items), &pool_voices),
            ..RadioValues::default()
        };

        if let Some(history) = inputs.histories.get(user).filter(|h| !h.is_empty()) {
            let hist_items = items_of(corpus, history.iter());
            values.cat_calibration = jsd_opt(
                &classified_distribution(&rec_items, &category_dim),
                &classified_distribution(&hist_items, &category_dim),
            );
            values.comp_calibration = jsd_opt(
                &classified_distribution(&rec_items, &complexity_dim),
                &classified_distribution(&hist_items, &complexity_dim),
            );
        }

        let mut others: Vec<&String> = user_ids.iter().filter(|u| **u != user).copied().collect();
        if !others.is_empty() {
            let mut rng = ChaCha12Rng::seed_from_u64(user_seed(inputs.seed, user));
            others.shuffle(&mut rng);
            others.truncate(inputs.fragmentation_samples.max(1));
            let own = &rec_clusters[user];
            let sampled: Vec<f64> = others
                .iter()
                .filter_map(|v| jsd_opt(own, &rec_clusters[*v]))
                .collect();
            values.fragmentation = mean_of(sampled);
        }

        out.insert(user.clone(), values);
    }
    out
}
