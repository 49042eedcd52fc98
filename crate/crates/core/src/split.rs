//! Train/test partitioning: attribute-sorted, skewed-subset, attribute- and
//! diversity-stratified, and PCA/k-means cluster-stratified splits.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PartyLabel, SplitMarker};
use crate::error::{Error, Result};
use crate::ntd::largest_remainder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    AttributeSort,
    DiversitySubset,
    AttributeStratified,
    DiversityStratified,
    ClusterStratified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub method: SplitMethod,
    pub test_fraction: f64,
    #[serde(default)]
    pub attribute: Option<String>,
    #[serde(default)]
    pub skew: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub k_clusters: Option<usize>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_fraction) || self.test_fraction == 0.0 {
            return Err(Error::Config("test_fraction must be in (0, 1)".to_string()));
        }
        let needs_attribute = matches!(
            self.method,
            SplitMethod::AttributeSort
                | SplitMethod::DiversitySubset
                | SplitMethod::AttributeStratified
                | SplitMethod::DiversityStratified
        );
        if needs_attribute && self.attribute.is_none() {
            return Err(Error::Config(format!(
                "split method {:?} requires an attribute",
                self.method
            )));
        }
        if self.method == SplitMethod::DiversitySubset && self.skew.is_none() {
            return Err(Error::Config("diversity_subset requires a skew".to_string()));
        }
        if self.method == SplitMethod::ClusterStratified {
            match self.k_clusters {
                Some(k) if k >= 2 => {}
                _ => {
                    return Err(Error::Config(
                        "cluster_stratified requires k_clusters >= 2".to_string(),
                    ))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_users: BTreeSet<String>,
    pub test_users: BTreeSet<String>,
    pub train_pairs: BTreeSet<(String, String)>,
    pub test_pairs: BTreeSet<(String, String)>,
}

impl Split {
    fn from_pairs(
        train_pairs: BTreeSet<(String, String)>,
        test_pairs: BTreeSet<(String, String)>,
    ) -> Split {
        Split {
            train_users: train_pairs.iter().map(|(u, _)| u.clone()).collect(),
            test_users: test_pairs.iter().map(|(u, _)| u.clone()).collect(),
            train_pairs,
            test_pairs,
        }
    }

    pub fn marker(&self) -> SplitMarker {
        SplitMarker {
            train_users: self.train_users.clone(),
            test_users: self.test_users.clone(),
        }
    }

    /// Persist as `train.csv` / `test.csv` with a `user_id,item_id` header.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, pairs) in [("train.csv", &self.train_pairs), ("test.csv", &self.test_pairs)] {
            let mut writer = csv::Writer::from_path(dir.join(name))?;
            writer.write_record(["user_id", "item_id"])?;
            for (u, i) in pairs {
                writer.write_record([u, i])?;
            }
            writer.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Split> {
        let mut sets = Vec::new();
        for name in ["train.csv", "test.csv"] {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(dir.join(name))?;
            let mut pairs = BTreeSet::new();
            for record in reader.records() {
                let record = record?;
                pairs.insert((record[0].to_string(), record[1].to_string()));
            }
            sets.push(pairs);
        }
        let test = sets.pop().expect("two files");
        let train = sets.pop().expect("two files");
        Ok(Split::from_pairs(train, test))
    }
}

/// Categorical class of an item under a named split attribute.
fn item_class(corpus: &Corpus, item_id: &str, attribute: &str) -> Result<String> {
    let item = corpus
        .items
        .get(item_id)
        .ok_or_else(|| Error::UnknownItem(item_id.to_string()))?;
    match attribute {
        "category" => Ok(item.category.clone()),
        "party_label" => Ok(item.party_label.as_str().to_string()),
        "sentiment" => Ok(if item.sentiment.unwrap_or(0.0) < 0.0 {
            "neg".to_string()
        } else {
            "pos".to_string()
        }),
        "story_cluster" => Ok(item
            .story_cluster
            .map(|c| c.to_string())
            .unwrap_or_else(|| "none".to_string())),
        other => Err(Error::Config(format!(
            "attribute `{other}` is not a categorical split dimension"
        ))),
    }
}

/// Orderable attribute value used by the sorting split.
fn item_sort_key(corpus: &Corpus, item_id: &str, attribute: &str) -> Result<f64> {
    let item = corpus
        .items
        .get(item_id)
        .ok_or_else(|| Error::UnknownItem(item_id.to_string()))?;
    let value = match attribute {
        "sentiment" => item.sentiment,
        "complexity" => item.complexity,
        "published_at" => item.published_at.map(|t| t as f64),
        other => {
            return Err(Error::Config(format!(
                "attribute `{other}` has no total order"
            )))
        }
    };
    Ok(value.unwrap_or(f64::NEG_INFINITY))
}

fn all_pairs(corpus: &Corpus) -> Vec<(String, String)> {
    crate::corpus::history_pairs(corpus).into_iter().collect()
}

fn rounded(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 0.5).floor() as usize
}

/// Dispatch on the configured method.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    match spec.method {
        SplitMethod::AttributeSort => split_attribute_sort(corpus, spec),
        SplitMethod::DiversitySubset => split_diversity_subset(corpus, spec),
        SplitMethod::AttributeStratified => split_attribute_stratified(corpus, spec),
        SplitMethod::DiversityStratified => split_diversity_stratified(corpus, spec),
        SplitMethod::ClusterStratified => split_cluster_stratified(corpus, spec),
    }
}

/// Sort each user's interactions by the attribute; the trailing
/// `test_fraction` of them becomes the test set.
pub fn split_attribute_sort(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    let attribute = spec.attribute.as_deref().expect("validated");
    let mut per_user: BTreeMap<&String, Vec<(f64, &String)>> = BTreeMap::new();
    let pairs = crate::corpus::history_pairs(corpus);
    for (user, item) in &pairs {
        let key = item_sort_key(corpus, item, attribute)?;
        per_user.entry(user).or_default().push((key, item));
    }
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for (user, mut entries) in per_user {
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)));
        let n_test = rounded(spec.test_fraction, entries.len()).min(entries.len());
        let cut = entries.len() - n_test;
        for (idx, (_, item)) in entries.into_iter().enumerate() {
            let pair = (user.clone(), item.clone());
            if idx < cut {
                train.insert(pair);
            } else {
                test.insert(pair);
            }
        }
    }
    Ok(Split::from_pairs(train, test))
}

/// Sample a training subset whose class shares follow the requested skew;
/// everything else becomes the test set.
pub fn split_diversity_subset(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    let attribute = spec.attribute.as_deref().expect("validated");
    let skew = spec.skew.as_ref().expect("validated");
    let total_weight: f64 = skew.values().sum();
    if total_weight <= 0.0 {
        return Err(Error::Config("skew weights must be positive".to_string()));
    }

    let mut by_class: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for pair in all_pairs(corpus) {
        let class = item_class(corpus, &pair.1, attribute)?;
        by_class.entry(class).or_default().push(pair);
    }
    for class in skew.keys() {
        if !by_class.contains_key(class) {
            return Err(Error::UnknownClass(class.clone(), attribute.to_string()));
        }
    }

    let n_pairs: usize = by_class.values().map(Vec::len).sum();
    let mut train_target = rounded(1.0 - spec.test_fraction, n_pairs);
    let classes: Vec<&String> = skew.keys().collect();
    let shares: Vec<f64> = classes.iter().map(|c| skew[*c] / total_weight).collect();
    // Shrink the target until every class quota is satisfiable.
    for (class, share) in classes.iter().zip(&shares) {
        if *share > 0.0 {
            let available = by_class[*class].len();
            let feasible = (available as f64 / share).floor() as usize;
            if feasible < train_target {
                log::warn!(
                    "class `{class}` supports only {feasible} training pairs at its skew share"
                );
                train_target = feasible;
            }
        }
    }
    let quotas = largest_remainder(train_target, &shares);

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for (class, pairs) in &by_class {
        let quota = classes
            .iter()
            .position(|c| *c == class)
            .map(|idx| quotas[idx])
            .unwrap_or(0);
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        for (idx, pair) in shuffled.into_iter().enumerate() {
            if idx < quota {
                train.insert(pair);
            } else {
                test.insert(pair);
            }
        }
    }
    Ok(Split::from_pairs(train, test))
}

/// Hold out `test_fraction` of each attribute class, largest remainders
/// deciding the leftover slots.
pub fn split_attribute_stratified(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    let attribute = spec.attribute.as_deref().expect("validated");
    let mut by_class: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for pair in all_pairs(corpus) {
        let class = item_class(corpus, &pair.1, attribute)?;
        by_class.entry(class).or_default().push(pair);
    }
    let n_pairs: usize = by_class.values().map(Vec::len).sum();
    let shares: Vec<f64> = by_class
        .values()
        .map(|v| v.len() as f64 / n_pairs as f64)
        .collect();
    let total_test = rounded(spec.test_fraction, n_pairs);
    let quotas = largest_remainder(total_test, &shares);

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for ((_, pairs), quota) in by_class.iter().zip(quotas) {
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        let quota = quota.min(shuffled.len());
        for (idx, pair) in shuffled.into_iter().enumerate() {
            if idx < quota {
                test.insert(pair);
            } else {
                train.insert(pair);
            }
        }
    }
    Ok(Split::from_pairs(train, test))
}

/// Shannon entropy (base 2) of the user's party-label history distribution.
pub fn user_viewpoint_entropy(corpus: &Corpus, user: &str) -> f64 {
    let mut counts: BTreeMap<PartyLabel, usize> = BTreeMap::new();
    let mut total = 0usize;
    let items: BTreeSet<&String> = corpus
        .histories
        .get(user)
        .map(|events| events.iter().map(|e| &e.item_id).collect())
        .unwrap_or_default();
    for id in items {
        if let Some(item) = corpus.items.get(id) {
            *counts.entry(item.party_label).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum()
}

/// Rank users by viewpoint entropy, band the range, and hold whole users out
/// of each band.
pub fn split_diversity_stratified(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    let users: Vec<&String> = corpus.histories.keys().collect();
    if users.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let entropies: Vec<f64> = users
        .iter()
        .map(|u| user_viewpoint_entropy(corpus, u))
        .collect();
    let lo = entropies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = entropies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bands = 10usize;
    let width = ((hi - lo) / bands as f64).max(f64::EPSILON);
    let mut banded: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
    for (user, h) in users.iter().zip(&entropies) {
        let band = (((h - lo) / width) as usize).min(bands - 1);
        banded.entry(band).or_default().push(user);
    }
    let test_users = hold_out_users(banded.values(), spec)?;
    Ok(user_level_split(corpus, &test_users))
}

/// k-means over PCA-reduced class-count profiles; `test_fraction` of each
/// cluster is held out.
pub fn split_cluster_stratified(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    let k = spec.k_clusters.expect("validated");
    let attribute = spec.attribute.as_deref().unwrap_or("party_label");
    let users: Vec<&String> = corpus.histories.keys().collect();
    if users.len() < k {
        return Err(Error::Config(format!(
            "{} users cannot form {k} clusters",
            users.len()
        )));
    }

    // Normalized class-count profile per user.
    let mut class_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut raw: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(users.len());
    for user in &users {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        let items: BTreeSet<&String> = corpus.histories[*user].iter().map(|e| &e.item_id).collect();
        for id in items {
            if corpus.items.contains_key(id) {
                let class = item_class(corpus, id, attribute)?;
                let next = class_index.len();
                let idx = *class_index.entry(class).or_insert(next);
                *counts.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        raw.push(counts);
    }
    let dims = class_index.len().max(1);
    let mut profiles: Vec<Vec<f64>> = Vec::with_capacity(users.len());
    for counts in raw {
        let mut row = vec![0.0; dims];
        let total: f64 = counts.values().sum();
        for (idx, c) in counts {
            row[idx] = if total > 0.0 { c / total } else { 0.0 };
        }
        profiles.push(row);
    }

    let reduced = pca_project(&profiles, dims.min(8));
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let assignment = kmeans(&reduced, k, 100, &mut rng);

    let mut clusters: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
    for (user, cluster) in users.iter().zip(&assignment) {
        clusters.entry(*cluster).or_default().push(user);
    }
    let test_users = hold_out_users(clusters.values(), spec)?;
    Ok(user_level_split(corpus, &test_users))
}

/// Hold out `test_fraction` of each user group, seeded, whole users at a time.
fn hold_out_users<'a>(
    groups: impl Iterator<Item = &'a Vec<&'a String>>,
    spec: &SplitSpec,
) -> Result<BTreeSet<String>> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut test_users = BTreeSet::new();
    for group in groups {
        let mut members = group.clone();
        members.sort();
        members.shuffle(&mut rng);
        let n_test = rounded(spec.test_fraction, members.len()).min(members.len());
        for user in members.into_iter().take(n_test) {
            test_users.insert(user.clone());
        }
    }
    Ok(test_users)
}

fn user_level_split(corpus: &Corpus, test_users: &BTreeSet<String>) -> Split {
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for pair in all_pairs(corpus) {
        if test_users.contains(&pair.0) {
            test.insert(pair);
        } else {
            train.insert(pair);
        }
    }
    Split::from_pairs(train, test)
}

/// Project rows onto the top principal components of their covariance.
fn pca_project(data: &[Vec<f64>], components: usize) -> Vec<Vec<f64>> {
    let n = data.len();
    let d = data.first().map(Vec::len).unwrap_or(0);
    if n == 0 || d == 0 || components == 0 {
        return data.to_vec();
    }
    let mut means = vec![0.0; d];
    for row in data {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |r, c| data[r][c] - means[c]);
    let cov = (centered.transpose() * &centered) / (n.max(2) as f64 - 1.0);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(components.min(d));
    let basis = DMatrix::from_fn(d, order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let projected = centered * basis;
    (0..n)
        .map(|r| (0..order.len()).map(|c| projected[(r, c)]).collect())
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with a fixed iteration cap. Ties go to the lowest cluster
/// index; empty clusters are reseeded from the farthest point.
fn kmeans(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let n = points.len();
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let mut centers: Vec<Vec<f64>> = indices[..k].iter().map(|&i| points[i].clone()).collect();
    let mut assignment = vec![0usize; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, point) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = squared_distance(point, center);
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        // Recompute centers; reseed empties from the farthest point.
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, point) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(point) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let farthest = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(&points[a], &centers[assignment[a]]);
                        let db = squared_distance(&points[b], &centers[assignment[b]]);
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .expect("points present");
                centers[c] = points[farthest].clone();
                assignment[farthest] = c;
                changed = true;
            } else {
                for (idx, s) in sums[c].iter().enumerate() {
                    centers[c][idx] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    assignment
}
