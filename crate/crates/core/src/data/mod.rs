//! Interaction data model, loading, k-core filtering and train/test splitting.
//!
//! Users and items are dense 0-based indices. The original string tokens are
//! kept alongside so reports can be mapped back to source ids.

mod editing_split;
mod kcore;
mod snapshot;
mod split;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use editing_split::{build_editing_split, EditingSplit};
pub use kcore::apply_k_core;
pub use snapshot::{rank_of, snapshot_topk, RecSnapshot, UserMask};
pub use split::{split_train_test, TrainTestSplit};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate {polarity} pair (user {user}, item {item})")]
    DuplicatePair {
        user: String,
        item: String,
        polarity: Feedback,
    },
    #[error("dataset has no interactions")]
    EmptyDataset,
    #[error("dataset is empty after {k}-core filtering")]
    EmptyAfterFiltering { k: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("only {available} candidate pairs in the top-k, {requested} explicit pairs requested")]
    InsufficientCandidates { available: usize, requested: usize },
    #[error("rank requested for masked pair (user {user}, item {item})")]
    MaskedPairRankQuery { user: usize, item: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Positive,
    Negative,
}

impl Feedback {
    pub fn token(self) -> &'static str {
        match self {
            Feedback::Positive => "pos",
            Feedback::Negative => "neg",
        }
    }

    fn parse(token: &str) -> Option<Self> {
        match token {
            "pos" => Some(Feedback::Positive),
            "neg" => Some(Feedback::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feedback::Positive => "positive",
            Feedback::Negative => "negative",
        })
    }
}

/// A (user, item) index pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub user: usize,
    pub item: usize,
}

impl Pair {
    pub fn new(user: usize, item: usize) -> Self {
        Self { user, item }
    }
}

/// Mapping from dense indices back to source tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    pub users: Vec<String>,
    pub items: Vec<String>,
}

impl IdMap {
    /// Synthetic tokens `u0, u1, ...` / `i0, i1, ...`.
    pub fn sequential(n_users: usize, n_items: usize) -> Self {
        Self {
            users: (0..n_users).map(|u| format!("u{u}")).collect(),
            items: (0..n_items).map(|i| format!("i{i}")).collect(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

/// Users, items and their positive/negative feedback with per-user indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_users: usize,
    n_items: usize,
    positives: Vec<Pair>,
    negatives: Vec<Pair>,
    pos_by_user: Vec<Vec<usize>>,
    neg_by_user: Vec<Vec<usize>>,
    ids: IdMap,
}

impl Dataset {
    /// Builds a dataset from index pairs, rejecting duplicates within a polarity.
    pub fn from_pairs(
        n_users: usize,
        n_items: usize,
        positives: Vec<Pair>,
        negatives: Vec<Pair>,
        ids: IdMap,
    ) -> Result<Self> {
        if positives.is_empty() && negatives.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        for (list, polarity) in [(&positives, Feedback::Positive), (&negatives, Feedback::Negative)] {
            let mut seen = HashSet::with_capacity(list.len());
            for p in list.iter() {
                if p.user >= n_users || p.item >= n_items {
                    return Err(DataError::InvalidArgument(format!(
                        "pair ({}, {}) out of range for {n_users} users / {n_items} items",
                        p.user, p.item
                    )));
                }
                if !seen.insert(*p) {
                    return Err(DataError::DuplicatePair {
                        user: ids.users.get(p.user).cloned().unwrap_or_else(|| p.user.to_string()),
                        item: ids.items.get(p.item).cloned().unwrap_or_else(|| p.item.to_string()),
                        polarity,
                    });
                }
            }
        }
        let pos_by_user = index_by_user(n_users, &positives);
        let neg_by_user = index_by_user(n_users, &negatives);
        Ok(Self {
            n_users,
            n_items,
            positives,
            negatives,
            pos_by_user,
            neg_by_user,
            ids,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn positives(&self) -> &[Pair] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Pair] {
        &self.negatives
    }

    /// Sorted positive items of `user`.
    pub fn user_positives(&self, user: usize) -> &[usize] {
        &self.pos_by_user[user]
    }

    /// Sorted negative items of `user`.
    pub fn user_negatives(&self, user: usize) -> &[usize] {
        &self.neg_by_user[user]
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    /// Writes the `user,item,feedback` CSV consumed by [`load_dataset`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["user", "item", "feedback"])?;
        for (list, fb) in [(&self.positives, Feedback::Positive), (&self.negatives, Feedback::Negative)] {
            for p in list.iter() {
                w.write_record([&self.ids.users[p.user], &self.ids.items[p.item], fb.token()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn index_by_user(n_users: usize, pairs: &[Pair]) -> Vec<Vec<usize>> {
    let mut index = vec![Vec::new(); n_users];
    for p in pairs {
        index[p.user].push(p.item);
    }
    for items in &mut index {
        items.sort_unstable();
    }
    index
}

/// Loads a `user,item,feedback` CSV; tokens are densified in order of first appearance.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    load_dataset_from_reader(file)
}

pub fn load_dataset_from_reader<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let mut users: HashMap<String, usize> = HashMap::new();
    let mut items: HashMap<String, usize> = HashMap::new();
    let mut ids = IdMap::default();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        // header is line 1
        let line = row + 2;
        let record = record?;
        if record.len() != 3 {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let (user_tok, item_tok, fb_tok) = (&record[0], &record[1], &record[2]);
        if user_tok.is_empty() || item_tok.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "empty user or item token".into(),
            });
        }
        let feedback = Feedback::parse(fb_tok).ok_or_else(|| DataError::MalformedRow {
            line,
            reason: format!("unknown feedback token {fb_tok:?}"),
        })?;
        let user = *users.entry(user_tok.to_string()).or_insert_with(|| {
            ids.users.push(user_tok.to_string());
            ids.users.len() - 1
        });
        let item = *items.entry(item_tok.to_string()).or_insert_with(|| {
            ids.items.push(item_tok.to_string());
            ids.items.len() - 1
        });
        match feedback {
            Feedback::Positive => positives.push(Pair::new(user, item)),
            Feedback::Negative => negatives.push(Pair::new(user, item)),
        }
    }

    if positives.is_empty() && negatives.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Dataset::from_pairs(ids.users.len(), ids.items.len(), positives, negatives, ids)
}
