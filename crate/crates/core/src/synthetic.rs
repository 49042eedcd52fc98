//! Deterministic synthetic news corpus covering every party/sentiment bucket
//! combination. Used by the bundled demo configuration and the test suites.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::corpus::{
    derive_party_label, Corpus, HistoryEvent, Impression, Item, PartyLabel, PartyRole, ShownItem,
};
use crate::error::Result;
use crate::seeding::user_seed;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_items: usize,
    pub n_users: usize,
    pub history_per_user: usize,
    pub impressions_per_user: usize,
    pub shown_per_impression: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_items: 500,
            n_users: 50,
            history_per_user: 25,
            impressions_per_user: 5,
            shown_per_impression: 10,
            seed: 7,
        }
    }
}

const CATEGORIES: [&str; 5] = ["politics", "business", "sports", "tech", "culture"];
const SENTIMENT_CENTERS: [f64; 4] = [-0.75, -0.25, 0.25, 0.75];

fn party_mentions(label: PartyLabel) -> BTreeSet<String> {
    match label {
        PartyLabel::Governing => ["PartyA".to_string()].into(),
        PartyLabel::Opposition => ["PartyB".to_string()].into(),
        PartyLabel::Both => ["PartyA".to_string(), "PartyB".to_string()].into(),
        PartyLabel::Other => ["PartyX".to_string()].into(),
        PartyLabel::None => BTreeSet::new(),
    }
}

pub fn default_party_map() -> BTreeMap<String, PartyRole> {
    [
        ("PartyA".to_string(), PartyRole::Governing),
        ("PartyB".to_string(), PartyRole::Opposition),
        ("PartyX".to_string(), PartyRole::Other),
    ]
    .into()
}

/// Items cycle through the 20 (party, sentiment bin) combinations so every
/// bucket holds `n_items / 20` items; categories, story clusters, complexity,
/// and timestamps cycle on their own periods.
pub fn generate(spec: &SynthSpec) -> Corpus {
    let party_map = default_party_map();
    let mut items = BTreeMap::new();
    for idx in 0..spec.n_items {
        let combo = idx % 20;
        let label = PartyLabel::ALL[combo / 4];
        let sentiment = SENTIMENT_CENTERS[combo % 4];
        let mentions = party_mentions(label);
        let id = format!("i{idx:04}");
        items.insert(
            id.clone(),
            Item {
                item_id: id.clone(),
                title: format!("synthetic article {idx}"),
                category: CATEGORIES[idx % CATEGORIES.len()].to_string(),
                sentiment: Some(sentiment),
                party_label: derive_party_label(&mentions, &party_map),
                party_mentions: mentions,
                complexity: Some(5.0 + (idx % 10) as f64 * 10.0),
                story_cluster: Some((idx % 40) as u64),
                published_at: Some(1_700_000_000 + idx as i64 * 3_600),
            },
        );
    }
    let ids: Vec<String> = items.keys().cloned().collect();

    let mut histories = BTreeMap::new();
    for u in 0..spec.n_users {
        let user = format!("u{u:03}");
        let mut rng = ChaCha12Rng::seed_from_u64(user_seed(spec.seed, &user));
        let picks = rand::seq::index::sample(
            &mut rng,
            ids.len(),
            spec.history_per_user.min(ids.len()),
        );
        let events: Vec<HistoryEvent> = picks
            .iter()
            .enumerate()
            .map(|(k, idx)| HistoryEvent {
                user_id: user.clone(),
                item_id: ids[idx].clone(),
                timestamp: Some(1_700_100_000 + k as i64 * 600),
            })
            .collect();
        histories.insert(user, events);
    }

    // Impressions tile the item list so every item is shown at least once.
    let mut impressions = Vec::new();
    let mut cursor = 0usize;
    for u in 0..spec.n_users {
        let user = format!("u{u:03}");
        let mut rng = ChaCha12Rng::seed_from_u64(user_seed(spec.seed ^ 0x5eed, &user));
        for k in 0..spec.impressions_per_user {
            let mut shown = Vec::with_capacity(spec.shown_per_impression);
            let clicked_slot = rng.random_range(0..spec.shown_per_impression);
            for s in 0..spec.shown_per_impression {
                shown.push(ShownItem {
                    item_id: ids[(cursor + s) % ids.len()].clone(),
                    clicked: s == clicked_slot,
                });
            }
            cursor += spec.shown_per_impression;
            impressions.push(Impression {
                impression_id: format!("imp_{u:03}_{k}"),
                user_id: user.clone(),
                timestamp: 1_700_200_000 + (u * spec.impressions_per_user + k) as i64 * 60,
                shown,
            });
        }
    }

    Corpus {
        items,
        histories,
        impressions,
        party_map,
    }
}

#[derive(Serialize)]
struct ItemRowOut<'a> {
    item_id: &'a str,
    title: &'a str,
    category: &'a str,
    sentiment: Option<f64>,
    party_mentions: &'a BTreeSet<String>,
    complexity: Option<f64>,
    story_cluster: Option<u64>,
    published_at: Option<i64>,
}

/// File paths of a corpus written to disk.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub items: PathBuf,
    pub histories: PathBuf,
    pub impressions: PathBuf,
    pub party_map: PathBuf,
}

/// Write the corpus in the loader's input formats.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<CorpusPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = CorpusPaths {
        items: dir.join("items.jsonl"),
        histories: dir.join("histories.csv"),
        impressions: dir.join("impressions.csv"),
        party_map: dir.join("party_map.json"),
    };

    let mut items_out = std::io::BufWriter::new(std::fs::File::create(&paths.items)?);
    for item in corpus.items.values() {
        let row = ItemRowOut {
            item_id: &item.item_id,
            title: &item.title,
            category: &item.category,
            sentiment: item.sentiment,
            party_mentions: &item.party_mentions,
            complexity: item.complexity,
            story_cluster: item.story_cluster,
            published_at: item.published_at,
        };
        writeln!(items_out, "{}", serde_json::to_string(&row)?)?;
    }
    items_out.flush()?;

    let mut histories_out = csv::Writer::from_path(&paths.histories)?;
    histories_out.write_record(["user_id", "item_id", "timestamp"])?;
    for events in corpus.histories.values() {
        for e in events {
            histories_out.write_record([
                e.user_id.as_str(),
                e.item_id.as_str(),
                &e.timestamp.map(|t| t.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    histories_out.flush()?;

    let mut impressions_out = csv::Writer::from_path(&paths.impressions)?;
    impressions_out.write_record(["impression_id", "user_id", "timestamp", "shown"])?;
    for imp in &corpus.impressions {
        let shown: Vec<String> = imp
            .shown
            .iter()
            .map(|s| format!("{}-{}", s.item_id, if s.clicked { 1 } else { 0 }))
            .collect();
        impressions_out.write_record([
            imp.impression_id.as_str(),
            imp.user_id.as_str(),
            &imp.timestamp.to_string(),
            &shown.join(" "),
        ])?;
    }
    impressions_out.flush()?;

    let map_json = serde_json::to_string_pretty(
        &corpus
            .party_map
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    match v {
                        PartyRole::Governing => "governing",
                        PartyRole::Opposition => "opposition",
                        PartyRole::Other => "other",
                    },
                )
            })
            .collect::<BTreeMap<String, &str>>(),
    )?;
    std::fs::write(&paths.party_map, map_json)?;
    Ok(paths)
}
