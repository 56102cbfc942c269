//! Editing metrics (EA, EC, EP, ES) and top-k accuracy (Recall, NDCG).
//!
//! "Recommended" always means rank <= k, with 1-based ranks from
//! [`RecSnapshot`]. Editing metrics compare a pre-edit and a post-edit
//! snapshot built over the same user masks.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, EditingSplit, Pair, RecSnapshot};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("explicit editing set is empty")]
    EmptyExplicitSet,
    #[error("implicit editing set has no rankable pairs")]
    EmptyImplicitSet,
    #[error("pre/post recommendation sets are both empty outside the editing pairs")]
    DegenerateUnion,
    #[error("no user has a non-empty test set")]
    NoEligibleUsers,
    #[error("cutoff {k} exceeds the snapshot cutoff {snapshot_k}")]
    CutoffExceedsSnapshot { k: usize, snapshot_k: usize },
    #[error("pre- and post-edit snapshots cover different users or masks")]
    SnapshotMismatch,
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

fn check_cutoff(s: &RecSnapshot, k: usize) -> Result<()> {
    if k > s.k() {
        return Err(MetricError::CutoffExceedsSnapshot { k, snapshot_k: s.k() });
    }
    Ok(())
}

fn check_pair(pre: &RecSnapshot, post: &RecSnapshot) -> Result<()> {
    if pre.n_users() != post.n_users() || pre.n_items() != post.n_items() || pre.mask() != post.mask() {
        return Err(MetricError::SnapshotMismatch);
    }
    Ok(())
}

/// Fraction of explicit pairs ranked below `k` after editing.
pub fn editing_accuracy(post: &RecSnapshot, explicit: &[Pair], k: usize) -> Result<f64> {
    if explicit.is_empty() {
        return Err(MetricError::EmptyExplicitSet);
    }
    let ranks = post.ranks(explicit)?;
    let edited = ranks.iter().filter(|&&r| r > k).count();
    Ok(edited as f64 / explicit.len() as f64)
}

/// Fraction of implicit pairs edited collaboratively.
///
/// A pair recommended before editing succeeds when it leaves the top-`k`; a pair
/// outside the top-`k` succeeds when its rank number grows. Pairs masked as
/// training positives cannot be ranked and are left out.
pub fn editing_collaboration(pre: &RecSnapshot, post: &RecSnapshot, implicit: &[Pair], k: usize) -> Result<f64> {
    check_pair(pre, post)?;
    let rankable: Vec<Pair> = implicit
        .iter()
        .filter(|p| !pre.is_masked(p.user, p.item))
        .copied()
        .collect();
    if rankable.is_empty() {
        return Err(MetricError::EmptyImplicitSet);
    }
    let before = pre.ranks(&rankable)?;
    let after = post.ranks(&rankable)?;
    let success = before
        .iter()
        .zip(&after)
        .filter(|(&r, &r_post)| if r <= k { r_post > k } else { r_post > r })
        .count();
    Ok(success as f64 / rankable.len() as f64)
}

/// Micro-averaged Jaccard overlap of pre/post top-`k` lists with all editing pairs removed.
pub fn editing_prudence(pre: &RecSnapshot, post: &RecSnapshot, all_edit_pairs: &[Pair], k: usize) -> Result<f64> {
    check_pair(pre, post)?;
    check_cutoff(pre, k)?;
    check_cutoff(post, k)?;
    let mut edit_items: HashMap<usize, HashSet<usize>> = HashMap::new();
    for p in all_edit_pairs {
        edit_items.entry(p.user).or_default().insert(p.item);
    }
    let empty = HashSet::new();
    let (mut inter, mut union) = (0usize, 0usize);
    for u in 0..pre.n_users() {
        let excluded = edit_items.get(&u).unwrap_or(&empty);
        let a: HashSet<usize> = pre.topk_at(u, k).iter().filter(|i| !excluded.contains(i)).copied().collect();
        let b: HashSet<usize> = post.topk_at(u, k).iter().filter(|i| !excluded.contains(i)).copied().collect();
        inter += a.intersection(&b).count();
        union += a.union(&b).count();
    }
    if union == 0 {
        return Err(MetricError::DegenerateUnion);
    }
    Ok(inter as f64 / union as f64)
}

/// Harmonic mean of EC and EP, 0 when both are 0.
pub fn editing_score(ec: f64, ep: f64) -> f64 {
    if ec + ep == 0.0 {
        0.0
    } else {
        2.0 * ec * ep / (ec + ep)
    }
}

fn per_user_mean(
    post: &RecSnapshot,
    test_by_user: &[Vec<usize>],
    k: usize,
    f: impl Fn(&[usize], &HashSet<usize>) -> f64,
) -> Result<f64> {
    check_cutoff(post, k)?;
    let mut total = 0.0;
    let mut eligible = 0usize;
    for (u, test) in test_by_user.iter().enumerate().take(post.n_users()) {
        if test.is_empty() {
            continue;
        }
        let relevant: HashSet<usize> = test.iter().copied().collect();
        total += f(post.topk_at(u, k), &relevant);
        eligible += 1;
    }
    if eligible == 0 {
        return Err(MetricError::NoEligibleUsers);
    }
    Ok(total / eligible as f64)
}

/// Macro-averaged Recall@k over users with a non-empty test set.
pub fn recall_at_k(post: &RecSnapshot, test_by_user: &[Vec<usize>], k: usize) -> Result<f64> {
    per_user_mean(post, test_by_user, k, |list, relevant| {
        let hits = list.iter().filter(|i| relevant.contains(i)).count();
        hits as f64 / relevant.len() as f64
    })
}

/// Macro-averaged binary-relevance NDCG@k over users with a non-empty test set.
pub fn ndcg_at_k(post: &RecSnapshot, test_by_user: &[Vec<usize>], k: usize) -> Result<f64> {
    per_user_mean(post, test_by_user, k, |list, relevant| {
        let dcg: f64 = list
            .iter()
            .enumerate()
            .filter(|(_, i)| relevant.contains(i))
            .map(|(pos, _)| 1.0 / ((pos + 2) as f64).log2())
            .sum();
        let ideal: f64 = (0..k.min(relevant.len())).map(|pos| 1.0 / ((pos + 2) as f64).log2()).sum();
        dcg / ideal
    })
}

/// Every metric for one edit, with Recall/NDCG at both cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ea: f64,
    pub ec: f64,
    pub ep: f64,
    pub es: f64,
    /// Recall@k_eval.
    pub recall: f64,
    /// NDCG@k_eval.
    pub ndcg: f64,
    pub recall_at_k_edit: f64,
    pub ndcg_at_k_edit: f64,
    pub k_edit: usize,
    pub k_eval: usize,
}

/// Recall/NDCG of one snapshot at both cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub recall: f64,
    pub ndcg: f64,
    pub recall_at_k_edit: f64,
    pub ndcg_at_k_edit: f64,
}

pub fn accuracy(snapshot: &RecSnapshot, test_by_user: &[Vec<usize>], k_edit: usize, k_eval: usize) -> Result<AccuracyReport> {
    Ok(AccuracyReport {
        recall: recall_at_k(snapshot, test_by_user, k_eval)?,
        ndcg: ndcg_at_k(snapshot, test_by_user, k_eval)?,
        recall_at_k_edit: recall_at_k(snapshot, test_by_user, k_edit)?,
        ndcg_at_k_edit: ndcg_at_k(snapshot, test_by_user, k_edit)?,
    })
}

/// Scores a post-edit snapshot against the split's pre-edit snapshot.
pub fn evaluate(split: &EditingSplit, post: &RecSnapshot, test_by_user: &[Vec<usize>], k_eval: usize) -> Result<MetricReport> {
    let pre = &split.pre_snapshot;
    let k = split.k_edit;
    let ea = editing_accuracy(post, &split.explicit, k)?;
    let ec = editing_collaboration(pre, post, &split.implicit, k)?;
    let ep = editing_prudence(pre, post, &split.all_pairs(), k)?;
    let acc = accuracy(post, test_by_user, k, k_eval)?;
    Ok(MetricReport {
        ea,
        ec,
        ep,
        es: editing_score(ec, ep),
        recall: acc.recall,
        ndcg: acc.ndcg,
        recall_at_k_edit: acc.recall_at_k_edit,
        ndcg_at_k_edit: acc.ndcg_at_k_edit,
        k_edit: k,
        k_eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::EmbeddingTable;
    use crate::data::UserMask;

    /// Snapshot where `scores[u][i]` is the score, realised with one-hot user rows.
    fn snap(scores: &[Vec<f64>], k: usize) -> RecSnapshot {
        let n_users = scores.len();
        let n_items = scores[0].len();
        let mut t = EmbeddingTable::zeros(n_users, n_items, n_users);
        for (u, row) in scores.iter().enumerate() {
            t.user_mut(u)[u] = 1.0;
            for (i, s) in row.iter().enumerate() {
                t.item_mut(i)[u] = *s;
            }
        }
        RecSnapshot::from_embeddings(t, k, UserMask::empty(n_users)).unwrap()
    }

    /// Scores that place item `i` at the given rank (1-based) for user 0.
    fn from_ranks(ranks: &[usize]) -> Vec<f64> {
        ranks.iter().map(|&r| -(r as f64)).collect()
    }

    #[test]
    fn accuracy_counts_pairs_beyond_k() {
        // items 0, 1, 2 at post ranks 5, 2, 4
        let post = snap(&[from_ranks(&[5, 2, 4, 1, 3])], 5);
        let explicit = [Pair::new(0, 0), Pair::new(0, 1), Pair::new(0, 2)];
        let ea = editing_accuracy(&post, &explicit, 3).unwrap();
        assert!((ea - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(editing_accuracy(&post, &explicit, 1).unwrap(), 1.0);
        assert!(matches!(editing_accuracy(&post, &[], 3), Err(MetricError::EmptyExplicitSet)));
    }

    #[test]
    fn collaboration_by_hand() {
        // (pre, post) ranks: item0 (1,5) ok, item1 (4,6) ok, item2 (4..) handled below
        let pre = snap(&[from_ranks(&[1, 4, 5, 2, 3, 6])], 6);
        let post = snap(&[from_ranks(&[5, 6, 3, 1, 2, 4])], 6);
        // item2: pre 5 -> post 3, a fail
        let implicit = [Pair::new(0, 0), Pair::new(0, 1), Pair::new(0, 2)];
        let ec = editing_collaboration(&pre, &post, &implicit, 2).unwrap();
        assert!((ec - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(editing_collaboration(&pre, &pre, &implicit, 2).unwrap(), 0.0);
    }

    #[test]
    fn prudence_jaccard() {
        // items a=0 b=1 c=2 d=3 e=4 (e is an editing pair and is ignored)
        let pre = snap(&[vec![5.0, 4.0, 3.0, 0.0, 10.0]], 4);
        let post = snap(&[vec![5.0, 4.0, 0.0, 3.0, 10.0]], 4);
        let ep = editing_prudence(&pre, &post, &[Pair::new(0, 4)], 4).unwrap();
        // A = {a,b,c}, B = {a,b,d}
        assert!((ep - 0.5).abs() < 1e-15);
        assert_eq!(editing_prudence(&pre, &pre, &[Pair::new(0, 4)], 4).unwrap(), 1.0);
        assert_eq!(
            editing_prudence(&post, &pre, &[Pair::new(0, 4)], 4).unwrap(),
            ep,
            "symmetric"
        );
    }

    #[test]
    fn prudence_degenerate() {
        let pre = snap(&[vec![1.0, 0.0]], 1);
        assert!(matches!(
            editing_prudence(&pre, &pre, &[Pair::new(0, 0), Pair::new(0, 1)], 1),
            Err(MetricError::DegenerateUnion)
        ));
    }

    #[test]
    fn score_examples() {
        assert_eq!(editing_score(0.37, 0.37), 0.37);
        assert_eq!(editing_score(0.0, 0.8), 0.0);
        assert_eq!(editing_score(0.0, 0.0), 0.0);
        assert!((editing_score(0.6920, 0.8296) - 0.7546).abs() < 1e-4);
    }

    #[test]
    fn recall_and_ndcg() {
        // user 0 list [0,1,2,...]; user 1 list [3,2,1,0]
        let s = snap(&[vec![4.0, 3.0, 2.0, 1.0], vec![1.0, 2.0, 3.0, 4.0]], 4);
        let test = vec![vec![0, 3], vec![3]];
        // user0: top-2 {0,1} hits {0} -> 0.5; user1: top-2 {3,2} -> 1.0
        assert!((recall_at_k(&s, &test, 2).unwrap() - 0.75).abs() < 1e-15);
        // single test item at position 1
        assert_eq!(ndcg_at_k(&s, &[vec![], vec![3]], 2).unwrap(), 1.0);
        // single test item at position 2
        let n = ndcg_at_k(&s, &[vec![1], vec![]], 2).unwrap();
        assert!((n - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&s, &[vec![3], vec![]], 2).unwrap(), 0.0);
        assert!(matches!(recall_at_k(&s, &[vec![], vec![]], 2), Err(MetricError::NoEligibleUsers)));
        assert!(matches!(
            recall_at_k(&s, &test, 5),
            Err(MetricError::CutoffExceedsSnapshot { .. })
        ));
    }
}
