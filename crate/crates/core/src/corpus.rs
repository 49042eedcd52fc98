//! Item, history, and impression loading plus corpus cleaning and the
//! user-item interaction matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Political bucket of an article, derived from its party mentions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyLabel {
    Governing,
    Opposition,
    Both,
    Other,
    None,
}

impl PartyLabel {
    pub const ALL: [PartyLabel; 5] = [
        PartyLabel::Governing,
        PartyLabel::Opposition,
        PartyLabel::Both,
        PartyLabel::Other,
        PartyLabel::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PartyLabel::Governing => "governing",
            PartyLabel::Opposition => "opposition",
            PartyLabel::Both => "both",
            PartyLabel::Other => "other",
            PartyLabel::None => "none",
        }
    }
}

/// Role of a single party in the configured party map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyRole {
    Governing,
    Opposition,
    Other,
}

/// An article with its augmented attributes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub sentiment: Option<f64>,
    #[serde(default)]
    pub party_mentions: BTreeSet<String>,
    #[serde(default = "default_party_label")]
    pub party_label: PartyLabel,
    #[serde(default)]
    pub complexity: Option<f64>,
    #[serde(default)]
    pub story_cluster: Option<u64>,
    #[serde(default)]
    pub published_at: Option<i64>,
}

fn default_party_label() -> PartyLabel {
    PartyLabel::None
}

/// One event in a user's reading history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: Option<i64>,
}

/// One entry of an impression's shown list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShownItem {
    pub item_id: String,
    pub clicked: bool,
}

/// A logged display event: which items were shown and which were clicked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Impression {
    pub impression_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub shown: Vec<ShownItem>,
}

/// Items, user histories, impressions, and the party map they were labeled with.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub items: BTreeMap<String, Item>,
    pub histories: BTreeMap<String, Vec<HistoryEvent>>,
    pub impressions: Vec<Impression>,
    pub party_map: BTreeMap<String, PartyRole>,
}

/// Counts of what `clean_corpus` removed, by removal class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub items_removed: usize,
    pub users_removed: usize,
    pub history_events_removed: usize,
    pub impressions_removed: usize,
    pub shown_entries_removed: usize,
    pub test_users_removed: usize,
}

/// Train/test user membership handed to cleaning so that test users unseen in
/// training can be dropped.
#[derive(Debug, Clone)]
pub struct SplitMarker {
    pub train_users: BTreeSet<String>,
    pub test_users: BTreeSet<String>,
}

/// Sparse user-item matrix with lexicographic index order on both axes.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    users: Vec<String>,
    items: Vec<String>,
    user_index: BTreeMap<String, usize>,
    item_index: BTreeMap<String, usize>,
    /// Per user: sorted `(item index, weight)` entries.
    user_entries: Vec<Vec<(usize, f64)>>,
    /// Per item: sorted `(user index, weight)` entries.
    item_entries: Vec<Vec<(usize, f64)>>,
}

impl InteractionMatrix {
    pub fn from_pairs(
        users: BTreeSet<String>,
        items: BTreeSet<String>,
        pairs: &BTreeSet<(String, String)>,
    ) -> Result<InteractionMatrix> {
        if users.is_empty() || items.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let users: Vec<String> = users.into_iter().collect();
        let items: Vec<String> = items.into_iter().collect();
        let user_index: BTreeMap<String, usize> = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        let item_index: BTreeMap<String, usize> = items
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let mut user_entries = vec![Vec::new(); users.len()];
        let mut item_entries = vec![Vec::new(); items.len()];
        for (u, i) in pairs {
            let (ui, ii) = match (user_index.get(u), item_index.get(i)) {
                (Some(&ui), Some(&ii)) => (ui, ii),
                _ => continue,
            };
            user_entries[ui].push((ii, 1.0));
            item_entries[ii].push((ui, 1.0));
        }
        for row in user_entries.iter_mut().chain(item_entries.iter_mut()) {
            row.sort_unstable_by_key(|(idx, _)| *idx);
        }
        Ok(InteractionMatrix {
            users,
            items,
            user_index,
            item_index,
            user_entries,
            item_entries,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn user_idx(&self, user_id: &str) -> Option<usize> {
        self.user_index.get(user_id).copied()
    }

    pub fn item_idx(&self, item_id: &str) -> Option<usize> {
        self.item_index.get(item_id).copied()
    }

    pub fn user_row(&self, user: usize) -> &[(usize, f64)] {
        &self.user_entries[user]
    }

    pub fn item_col(&self, item: usize) -> &[(usize, f64)] {
        &self.item_entries[item]
    }

    /// Number of users that interacted with the item.
    pub fn item_degree(&self, item: usize) -> usize {
        self.item_entries[item].len()
    }

    pub fn entry_count(&self) -> usize {
        self.user_entries.iter().map(Vec::len).sum()
    }

    /// Item ids of a user's interactions.
    pub fn history_items(&self, user_id: &str) -> BTreeSet<String> {
        match self.user_idx(user_id) {
            Some(u) => self.user_entries[u]
                .iter()
                .map(|&(i, _)| self.items[i].clone())
                .collect(),
            None => BTreeSet::new(),
        }
    }

    /// Scale every stored weight by a positive constant (testing hook for the
    /// ranking invariance property).
    pub fn scale_weights(&mut self, factor: f64) {
        assert!(factor > 0.0, "scale factor must be positive");
        for row in self
            .user_entries
            .iter_mut()
            .chain(self.item_entries.iter_mut())
        {
            for (_, w) in row.iter_mut() {
                *w *= factor;
            }
        }
    }
}

/// Derive the political bucket from the mentioned parties.
/// Precedence: Both > Governing > Opposition > Other > None.
pub fn derive_party_label(
    mentions: &BTreeSet<String>,
    party_map: &BTreeMap<String, PartyRole>,
) -> PartyLabel {
    if mentions.is_empty() {
        return PartyLabel::None;
    }
    let mut governing = false;
    let mut opposition = false;
    let mut other = false;
    for party in mentions {
        match party_map.get(party) {
            Some(PartyRole::Governing) => governing = true,
            Some(PartyRole::Opposition) => opposition = true,
            // Unknown parties count as Other.
            Some(PartyRole::Other) | None => other = true,
        }
    }
    if governing && opposition {
        PartyLabel::Both
    } else if governing {
        PartyLabel::Governing
    } else if opposition {
        PartyLabel::Opposition
    } else {
        debug_assert!(other);
        PartyLabel::Other
    }
}

fn parse_error(path: &Path, line: usize, field: &str, message: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// Raw JSONL row for an item; `party_label` is always re-derived.
#[derive(Deserialize)]
struct ItemRow {
    item_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    category: String,
    #[serde(default)]
    sentiment: Option<f64>,
    #[serde(default)]
    party_mentions: BTreeSet<String>,
    #[serde(default)]
    complexity: Option<f64>,
    #[serde(default)]
    story_cluster: Option<u64>,
    #[serde(default)]
    published_at: Option<i64>,
}

pub fn load_party_map(path: &Path) -> Result<BTreeMap<String, PartyRole>> {
    let file = File::open(path)?;
    let map: BTreeMap<String, PartyRole> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| parse_error(path, 1, "party role", e))?;
    Ok(map)
}

pub fn load_items(path: &Path, party_map: &BTreeMap<String, PartyRole>) -> Result<BTreeMap<String, Item>> {
    let file = File::open(path)?;
    let mut items = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ItemRow = serde_json::from_str(&line)
            .map_err(|e| parse_error(path, lineno + 1, "item", e))?;
        if let Some(s) = row.sentiment {
            if !(-1.0..=1.0).contains(&s) {
                return Err(parse_error(
                    path,
                    lineno + 1,
                    "sentiment",
                    format!("{s} outside [-1, 1]"),
                ));
            }
        }
        if let Some(c) = row.complexity {
            if c < 0.0 {
                return Err(parse_error(path, lineno + 1, "complexity", "negative"));
            }
        }
        let item = Item {
            party_label: derive_party_label(&row.party_mentions, party_map),
            item_id: row.item_id,
            title: row.title,
            category: row.category,
            sentiment: row.sentiment,
            party_mentions: row.party_mentions,
            complexity: row.complexity,
            story_cluster: row.story_cluster,
            published_at: row.published_at,
        };
        if items.contains_key(&item.item_id) {
            return Err(Error::DuplicateItem(item.item_id));
        }
        items.insert(item.item_id.clone(), item);
    }
    Ok(items)
}

fn is_header(fields: &csv::StringRecord, first: &str) -> bool {
    fields.get(0).is_some_and(|f| f == first)
}

/// Histories CSV: `user_id,item_id,timestamp` (timestamp may be empty, header
/// row optional). When every event of a user carries a timestamp the history
/// is sorted by it; otherwise file order is kept.
pub fn load_histories(path: &Path) -> Result<BTreeMap<String, Vec<HistoryEvent>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)?;
    let mut histories: BTreeMap<String, Vec<HistoryEvent>> = BTreeMap::new();
    for (lineno, record) in reader.records().enumerate() {
        let record = record?;
        if lineno == 0 && is_header(&record, "user_id") {
            continue;
        }
        if record.len() != 3 {
            return Err(parse_error(
                path,
                lineno + 1,
                "row",
                format!("expected 3 fields, got {}", record.len()),
            ));
        }
        let user_id = record[0].to_string();
        let item_id = record[1].to_string();
        if user_id.is_empty() || item_id.is_empty() {
            return Err(parse_error(path, lineno + 1, "user_id/item_id", "empty"));
        }
        let timestamp = if record[2].is_empty() {
            None
        } else {
            Some(record[2].parse::<i64>().map_err(|e| {
                parse_error(path, lineno + 1, "timestamp", e)
            })?)
        };
        histories.entry(user_id.clone()).or_default().push(HistoryEvent {
            user_id,
            item_id,
            timestamp,
        });
    }
    for events in histories.values_mut() {
        if events.iter().all(|e| e.timestamp.is_some()) {
            events.sort_by_key(|e| e.timestamp);
        }
    }
    Ok(histories)
}

/// Impressions CSV: `impression_id,user_id,timestamp,shown` where shown is a
/// space-separated list of `itemid-1` (clicked) / `itemid-0` tokens.
pub fn load_impressions(path: &Path) -> Result<Vec<Impression>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut impressions = Vec::new();
    for (lineno, record) in reader.records().enumerate() {
        let record = record?;
        if lineno == 0 && is_header(&record, "impression_id") {
            continue;
        }
        if record.len() != 4 {
            return Err(parse_error(
                path,
                lineno + 1,
                "row",
                format!("expected 4 fields, got {}", record.len()),
            ));
        }
        let timestamp: i64 = record[2]
            .parse()
            .map_err(|e| parse_error(path, lineno + 1, "timestamp", e))?;
        let mut shown = Vec::new();
        let mut seen = BTreeSet::new();
        for token in record[3].split_whitespace() {
            let (item_id, flag) = token.rsplit_once('-').ok_or_else(|| {
                parse_error(path, lineno + 1, "shown", format!("bad token `{token}`"))
            })?;
            let clicked = match flag {
                "0" => false,
                "1" => true,
                _ => {
                    return Err(parse_error(
                        path,
                        lineno + 1,
                        "shown",
                        format!("click flag must be 0 or 1 in `{token}`"),
                    ))
                }
            };
            if !seen.insert(item_id.to_string()) {
                return Err(parse_error(
                    path,
                    lineno + 1,
                    "shown",
                    format!("item `{item_id}` listed twice"),
                ));
            }
            shown.push(ShownItem {
                item_id: item_id.to_string(),
                clicked,
            });
        }
        if shown.is_empty() {
            return Err(parse_error(path, lineno + 1, "shown", "empty"));
        }
        impressions.push(Impression {
            impression_id: record[0].to_string(),
            user_id: record[1].to_string(),
            timestamp,
            shown,
        });
    }
    Ok(impressions)
}

/// Load the four input files into a corpus, deriving party labels from the map.
pub fn load_corpus(
    items_path: &Path,
    history_path: &Path,
    impressions_path: &Path,
    party_map_path: &Path,
) -> Result<Corpus> {
    let party_map = load_party_map(party_map_path)?;
    let items = load_items(items_path, &party_map)?;
    let histories = load_histories(history_path)?;
    let impressions = load_impressions(impressions_path)?;
    Ok(Corpus {
        items,
        histories,
        impressions,
        party_map,
    })
}

fn item_is_valid(item: &Item) -> bool {
    !item.category.is_empty() && item.sentiment.is_some()
}

/// Remove invalid items (empty category or missing sentiment), dangling
/// history/impression references, users with empty histories, and (when a
/// split marker is given) test users absent from training. Idempotent.
pub fn clean_corpus(corpus: &Corpus, marker: Option<&SplitMarker>) -> (Corpus, CleanReport) {
    let mut report = CleanReport::default();

    let items: BTreeMap<String, Item> = corpus
        .items
        .iter()
        .filter(|(_, item)| item_is_valid(item))
        .map(|(id, item)| (id.clone(), item.clone()))
        .collect();
    report.items_removed = corpus.items.len() - items.len();

    let dropped_test_users: BTreeSet<&String> = match marker {
        Some(m) => m
            .test_users
            .iter()
            .filter(|u| !m.train_users.contains(*u))
            .collect(),
        None => BTreeSet::new(),
    };

    let mut histories: BTreeMap<String, Vec<HistoryEvent>> = BTreeMap::new();
    for (user, events) in &corpus.histories {
        if dropped_test_users.contains(user) {
            report.test_users_removed += 1;
            report.history_events_removed += events.len();
            continue;
        }
        let kept: Vec<HistoryEvent> = events
            .iter()
            .filter(|e| items.contains_key(&e.item_id))
            .cloned()
            .collect();
        report.history_events_removed += events.len() - kept.len();
        if kept.is_empty() {
            report.users_removed += 1;
        } else {
            histories.insert(user.clone(), kept);
        }
    }

    let mut impressions = Vec::new();
    for imp in &corpus.impressions {
        if dropped_test_users.contains(&imp.user_id) || !histories.contains_key(&imp.user_id) {
            report.impressions_removed += 1;
            continue;
        }
        let shown: Vec<ShownItem> = imp
            .shown
            .iter()
            .filter(|s| items.contains_key(&s.item_id))
            .cloned()
            .collect();
        report.shown_entries_removed += imp.shown.len() - shown.len();
        if shown.is_empty() {
            report.impressions_removed += 1;
        } else {
            impressions.push(Impression {
                shown,
                ..imp.clone()
            });
        }
    }

    let cleaned = Corpus {
        items,
        histories,
        impressions,
        party_map: corpus.party_map.clone(),
    };
    (cleaned, report)
}

/// Distinct `(user, item)` pairs from the histories.
pub fn history_pairs(corpus: &Corpus) -> BTreeSet<(String, String)> {
    let mut pairs = BTreeSet::new();
    for (user, events) in &corpus.histories {
        for e in events {
            pairs.insert((user.clone(), e.item_id.clone()));
        }
    }
    pairs
}

/// Build the binary interaction matrix: one entry of weight 1 per distinct
/// `(user, history item)` pair.
pub fn build_matrix(corpus: &Corpus) -> Result<InteractionMatrix> {
    build_matrix_with(corpus, false)
}

/// Matrix builder with the optional inclusion of impression clicks as
/// interactions (history-only is the default).
pub fn build_matrix_with(
    corpus: &Corpus,
    include_impression_clicks: bool,
) -> Result<InteractionMatrix> {
    let mut pairs = history_pairs(corpus);
    if include_impression_clicks {
        for imp in &corpus.impressions {
            for s in &imp.shown {
                if s.clicked {
                    pairs.insert((imp.user_id.clone(), s.item_id.clone()));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let users: BTreeSet<String> = pairs.iter().map(|(u, _)| u.clone()).collect();
    let items: BTreeSet<String> = pairs.iter().map(|(_, i)| i.clone()).collect();
    InteractionMatrix::from_pairs(users, items, &pairs)
}

/// Resolve the recommendable item pool. An explicit list is returned verbatim
/// (after existence checks); otherwise the pool is every item occurring in
/// impressions, optionally restricted to the given users (the active split).
pub fn resolve_pool(
    corpus: &Corpus,
    explicit: Option<&[String]>,
    restrict_users: Option<&BTreeSet<String>>,
) -> Result<Vec<String>> {
    if let Some(ids) = explicit {
        for id in ids {
            if !corpus.items.contains_key(id) {
                return Err(Error::UnknownItem(id.clone()));
            }
        }
        return Ok(ids.to_vec());
    }
    let mut pool = BTreeSet::new();
    for imp in &corpus.impressions {
        if let Some(users) = restrict_users {
            if !users.contains(&imp.user_id) {
                continue;
            }
        }
        for s in &imp.shown {
            if corpus.items.contains_key(&s.item_id) {
                pool.insert(s.item_id.clone());
            }
        }
    }
    Ok(pool.into_iter().collect())
}
