//! JSON recommender exchange format for handing lists to display front ends.

use serde::{Deserialize, Serialize};

use crate::models::{RankedList, ScoredItem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JrexItem {
    #[serde(rename = "itemId")]
    pub item_id: String,
    /// 1-based, contiguous.
    pub rank: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JrexUser {
    #[serde(rename = "userId")]
    pub user_id: String,
    pub items: Vec<JrexItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JrexDoc {
    #[serde(rename = "experimentId")]
    pub experiment_id: String,
    pub style: String,
    pub users: Vec<JrexUser>,
}

pub fn export_jrex(lists: &[RankedList], experiment_id: &str, style: &str) -> JrexDoc {
    JrexDoc {
        experiment_id: experiment_id.to_string(),
        style: style.to_string(),
        users: lists
            .iter()
            .map(|list| JrexUser {
                user_id: list.user_id.clone(),
                items: list
                    .items
                    .iter()
                    .enumerate()
                    .map(|(idx, entry)| JrexItem {
                        item_id: entry.id.clone(),
                        rank: idx + 1,
                        score: entry.score,
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn jrex_to_ranked_lists(doc: &JrexDoc) -> Vec<RankedList> {
    doc.users
        .iter()
        .map(|user| RankedList {
            user_id: user.user_id.clone(),
            items: user
                .items
                .iter()
                .map(|item| ScoredItem {
                    id: item.item_id.clone(),
                    score: item.score,
                })
                .collect(),
        })
        .collect()
}
