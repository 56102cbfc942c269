use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::{DataError, Pair, Result};
use crate::backbone::{EmbeddingTable, ModelState};

/// Per-user sorted item sets excluded from ranking (the training positives).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserMask(Arc<Vec<Vec<usize>>>);

impl UserMask {
    pub fn new(mut per_user: Vec<Vec<usize>>) -> Self {
        for items in &mut per_user {
            items.sort_unstable();
            items.dedup();
        }
        Self(Arc::new(per_user))
    }

    pub fn empty(n_users: usize) -> Self {
        Self(Arc::new(vec![Vec::new(); n_users]))
    }

    pub fn n_users(&self) -> usize {
        self.0.len()
    }

    pub fn items(&self, user: usize) -> &[usize] {
        &self.0[user]
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.0[user].binary_search(&item).is_ok()
    }
}

/// `true` when item `j` with score `sj` is ordered ahead of item `i` with score `si`.
#[inline]
fn ahead(sj: f64, j: usize, si: f64, i: usize) -> bool {
    sj > si || (sj == si && j < i)
}

fn order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// 1-based rank of `item` for `user` given a full score row, ignoring masked items.
fn rank_in_scores(scores: &[f64], masked: &[usize], item: usize) -> usize {
    let si = scores[item];
    let mut rank = 1;
    let mut mask_iter = masked.iter().peekable();
    for (j, &sj) in scores.iter().enumerate() {
        if mask_iter.peek() == Some(&&j) {
            mask_iter.next();
            continue;
        }
        if ahead(sj, j, si, item) {
            rank += 1;
        }
    }
    rank
}

/// Rank of `item` for `user` under `table`, excluding the sorted `masked` items.
///
/// The caller guarantees `item` is not itself masked.
pub fn rank_of(table: &EmbeddingTable, masked: &[usize], user: usize, item: usize) -> usize {
    let scores = table.user_scores(user);
    rank_in_scores(&scores, masked, item)
}

fn top_k_from_scores(scores: &[f64], masked: &[usize], k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(scores.len());
    let mut mask_iter = masked.iter().peekable();
    for (j, &s) in scores.iter().enumerate() {
        if mask_iter.peek() == Some(&&j) {
            mask_iter.next();
            continue;
        }
        cand.push((s, j));
    }
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, order);
        cand.truncate(k);
    }
    cand.sort_unstable_by(order);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Deterministic per-user top-k lists plus rank queries for arbitrary pairs.
///
/// Items are ordered by score descending, then by ascending item index. The
/// user's masked items never appear and cannot be ranked.
#[derive(Debug, Clone)]
pub struct RecSnapshot {
    k: usize,
    lists: Vec<Vec<usize>>,
    embeddings: Arc<EmbeddingTable>,
    mask: UserMask,
}

impl RecSnapshot {
    pub fn from_embeddings(embeddings: EmbeddingTable, k: usize, mask: UserMask) -> Result<Self> {
        if k == 0 {
            return Err(DataError::InvalidArgument("snapshot cutoff k must be >= 1".into()));
        }
        if mask.n_users() != embeddings.n_users() {
            return Err(DataError::InvalidArgument(format!(
                "mask covers {} users, model has {}",
                mask.n_users(),
                embeddings.n_users()
            )));
        }
        let lists = (0..embeddings.n_users())
            .into_par_iter()
            .map(|u| top_k_from_scores(&embeddings.user_scores(u), mask.items(u), k))
            .collect();
        Ok(Self {
            k,
            lists,
            embeddings: Arc::new(embeddings),
            mask,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_users(&self) -> usize {
        self.lists.len()
    }

    pub fn n_items(&self) -> usize {
        self.embeddings.n_items()
    }

    pub fn mask(&self) -> &UserMask {
        &self.mask
    }

    pub fn embeddings(&self) -> &EmbeddingTable {
        &self.embeddings
    }

    /// The user's ordered top-k list.
    pub fn topk(&self, user: usize) -> &[usize] {
        &self.lists[user]
    }

    /// The first `k` entries of the user's list (`k` may be smaller than the snapshot's).
    pub fn topk_at(&self, user: usize, k: usize) -> &[usize] {
        let list = &self.lists[user];
        &list[..k.min(list.len())]
    }

    pub fn is_masked(&self, user: usize, item: usize) -> bool {
        self.mask.contains(user, item)
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        self.embeddings.score(user, item)
    }

    pub fn rank(&self, user: usize, item: usize) -> Result<usize> {
        if self.mask.contains(user, item) {
            return Err(DataError::MaskedPairRankQuery { user, item });
        }
        Ok(rank_of(&self.embeddings, self.mask.items(user), user, item))
    }

    /// Ranks for many pairs, scoring each user once. Output follows input order.
    pub fn ranks(&self, pairs: &[Pair]) -> Result<Vec<usize>> {
        let mut by_user: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (pos, p) in pairs.iter().enumerate() {
            if self.mask.contains(p.user, p.item) {
                return Err(DataError::MaskedPairRankQuery {
                    user: p.user,
                    item: p.item,
                });
            }
            by_user.entry(p.user).or_default().push((pos, p.item));
        }
        let groups: Vec<_> = by_user.into_iter().collect();
        let ranked: Vec<Vec<(usize, usize)>> = groups
            .par_iter()
            .map(|(user, queries)| {
                let scores = self.embeddings.user_scores(*user);
                let masked = self.mask.items(*user);
                queries
                    .iter()
                    .map(|&(pos, item)| (pos, rank_in_scores(&scores, masked, item)))
                    .collect()
            })
            .collect();
        let mut out = vec![0; pairs.len()];
        for (pos, rank) in ranked.into_iter().flatten() {
            out[pos] = rank;
        }
        Ok(out)
    }
}

/// Ranks every user's unmasked items by the model's final embeddings.
pub fn snapshot_topk(model: &ModelState, k: usize, mask: UserMask) -> Result<RecSnapshot> {
    RecSnapshot::from_embeddings(model.output().clone(), k, mask)
}
