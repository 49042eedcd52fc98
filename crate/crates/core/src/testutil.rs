//! Shared fixture builders for unit tests.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{
    Corpus, HistoryEvent, Impression, Item, PartyLabel, PartyRole, ShownItem,
};

pub fn item(id: &str, category: &str, sentiment: Option<f64>, label: PartyLabel) -> Item {
    let party_mentions: BTreeSet<String> = match label {
        PartyLabel::Governing => ["A".to_string()].into(),
        PartyLabel::Opposition => ["B".to_string()].into(),
        PartyLabel::Both => ["A".to_string(), "B".to_string()].into(),
        PartyLabel::Other => ["C".to_string()].into(),
        PartyLabel::None => BTreeSet::new(),
    };
    Item {
        item_id: id.to_string(),
        title: format!("title {id}"),
        category: category.to_string(),
        sentiment,
        party_mentions,
        party_label: label,
        complexity: Some(50.0),
        story_cluster: None,
        published_at: Some(1_700_000_000),
    }
}

pub fn default_party_map() -> BTreeMap<String, PartyRole> {
    [
        ("A".to_string(), PartyRole::Governing),
        ("B".to_string(), PartyRole::Opposition),
        ("C".to_string(), PartyRole::Other),
    ]
    .into()
}

pub fn event(user: &str, item: &str, ts: i64) -> HistoryEvent {
    HistoryEvent {
        user_id: user.to_string(),
        item_id: item.to_string(),
        timestamp: Some(ts),
    }
}

pub fn impression(id: &str, user: &str, ts: i64, shown: &[(&str, bool)]) -> Impression {
    Impression {
        impression_id: id.to_string(),
        user_id: user.to_string(),
        timestamp: ts,
        shown: shown
            .iter()
            .map(|(i, c)| ShownItem {
                item_id: i.to_string(),
                clicked: *c,
            })
            .collect(),
    }
}

/// Two users, three items, one impression each.
pub fn small_corpus() -> Corpus {
    let mut items = BTreeMap::new();
    for (id, cat, s, label) in [
        ("i1", "politics", 0.5, PartyLabel::Governing),
        ("i2", "sports", -0.5, PartyLabel::None),
        ("i3", "politics", 0.0, PartyLabel::Opposition),
    ] {
        items.insert(id.to_string(), item(id, cat, Some(s), label));
    }
    let mut histories = BTreeMap::new();
    histories.insert("u1".to_string(), vec![event("u1", "i1", 1)]);
    histories.insert(
        "u2".to_string(),
        vec![event("u2", "i1", 1), event("u2", "i2", 2)],
    );
    Corpus {
        items,
        histories,
        impressions: vec![
            impression("imp1", "u1", 10, &[("i2", true), ("i3", false)]),
            impression("imp2", "u2", 11, &[("i3", true), ("i1", false)]),
        ],
        party_map: default_party_map(),
    }
}

/// Fixed 5-user / 6-item bipartite graph used by the random-walk oracles.
///
/// Histories: u1 {i1,i2}, u2 {i2,i3}, u3 {i3,i4,i5}, u4 {i5}, u5 {i5,i6}.
pub fn toy_graph_corpus() -> Corpus {
    let cats = ["politics", "sports", "tech", "culture", "health", "politics"];
    let sentiments = [-0.75, -0.25, 0.25, 0.75, -0.25, 0.25];
    let labels = [
        PartyLabel::Governing,
        PartyLabel::Opposition,
        PartyLabel::Both,
        PartyLabel::Other,
        PartyLabel::None,
        PartyLabel::Governing,
    ];
    let mut items = BTreeMap::new();
    for idx in 0..6 {
        let id = format!("i{}", idx + 1);
        items.insert(
            id.clone(),
            item(&id, cats[idx], Some(sentiments[idx]), labels[idx]),
        );
    }
    let history_sets: [(&str, &[&str]); 5] = [
        ("u1", &["i1", "i2"]),
        ("u2", &["i2", "i3"]),
        ("u3", &["i3", "i4", "i5"]),
        ("u4", &["i5"]),
        ("u5", &["i5", "i6"]),
    ];
    let mut histories = BTreeMap::new();
    for (user, its) in history_sets {
        histories.insert(
            user.to_string(),
            its.iter()
                .enumerate()
                .map(|(k, i)| event(user, i, k as i64))
                .collect(),
        );
    }
    let impressions = vec![
        impression("imp1", "u1", 10, &[("i3", true), ("i4", false), ("i5", false)]),
        impression("imp2", "u2", 11, &[("i1", false), ("i5", true)]),
        impression("imp3", "u3", 12, &[("i6", true), ("i1", false)]),
        impression("imp4", "u4", 13, &[("i2", true), ("i6", false)]),
        impression("imp5", "u5", 14, &[("i4", true), ("i1", false)]),
    ];
    Corpus {
        items,
        histories,
        impressions,
        party_map: default_party_map(),
    }
}
