use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset, Pair, RecSnapshot, Result};

/// Explicit / implicit partition of the negative feedback, anchored to a pre-edit snapshot.
#[derive(Debug, Clone)]
pub struct EditingSplit {
    /// Pairs handed to the editor. Each sits in its user's pre-edit top-`k_edit`.
    pub explicit: Vec<Pair>,
    /// Remaining negative pairs, never shown to the editor.
    pub implicit: Vec<Pair>,
    pub pre_snapshot: RecSnapshot,
    pub k_edit: usize,
    pub seed: u64,
}

impl EditingSplit {
    /// All negative pairs (explicit first, then implicit).
    pub fn all_pairs(&self) -> Vec<Pair> {
        self.explicit.iter().chain(&self.implicit).copied().collect()
    }

    /// Re-attaches pair sets to a snapshot, checking the explicit pairs are still eligible.
    pub fn from_parts(
        explicit: Vec<Pair>,
        implicit: Vec<Pair>,
        pre_snapshot: RecSnapshot,
        k_edit: usize,
        seed: u64,
    ) -> Result<Self> {
        if k_edit > pre_snapshot.k() {
            return Err(DataError::InvalidArgument(format!(
                "k_edit {k_edit} exceeds snapshot cutoff {}",
                pre_snapshot.k()
            )));
        }
        for p in &explicit {
            if !pre_snapshot.topk_at(p.user, k_edit).contains(&p.item) {
                return Err(DataError::InvalidArgument(format!(
                    "explicit pair ({}, {}) is not in the pre-edit top-{k_edit}",
                    p.user, p.item
                )));
            }
        }
        Ok(Self {
            explicit,
            implicit,
            pre_snapshot,
            k_edit,
            seed,
        })
    }
}

/// Samples `n_explicit` negative pairs that the pre-edit model recommends in its top-`k_edit`.
///
/// Every other negative pair becomes implicit.
pub fn build_editing_split(
    pre: &RecSnapshot,
    d: &Dataset,
    k_edit: usize,
    n_explicit: usize,
    seed: u64,
) -> Result<EditingSplit> {
    if k_edit == 0 || k_edit > pre.k() {
        return Err(DataError::InvalidArgument(format!(
            "k_edit must lie in 1..={}, got {k_edit}",
            pre.k()
        )));
    }
    if n_explicit == 0 {
        return Err(DataError::InvalidArgument("n_explicit must be >= 1".into()));
    }
    let candidates: Vec<Pair> = d
        .negatives()
        .iter()
        .filter(|p| pre.topk_at(p.user, k_edit).contains(&p.item))
        .copied()
        .collect();
    if candidates.len() < n_explicit {
        return Err(DataError::InsufficientCandidates {
            available: candidates.len(),
            requested: n_explicit,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut explicit: Vec<Pair> = rand::seq::index::sample(&mut rng, candidates.len(), n_explicit)
        .into_iter()
        .map(|idx| candidates[idx])
        .collect();
    explicit.sort_unstable();

    let chosen: HashSet<Pair> = explicit.iter().copied().collect();
    let implicit = d
        .negatives()
        .iter()
        .filter(|p| !chosen.contains(p))
        .copied()
        .collect();
    Ok(EditingSplit {
        explicit,
        implicit,
        pre_snapshot: pre.clone(),
        k_edit,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::EmbeddingTable;
    use crate::data::{IdMap, UserMask};

    /// Users 0 and 1 over items 0..4 with 1-d embeddings: user 0 prefers items 1, 2;
    /// user 1 prefers item 3.
    fn fixture() -> (RecSnapshot, Dataset) {
        let mut t = EmbeddingTable::zeros(2, 4, 2);
        t.user_mut(0).copy_from_slice(&[1.0, 0.0]);
        t.user_mut(1).copy_from_slice(&[0.0, 1.0]);
        t.item_mut(0).copy_from_slice(&[-1.0, 0.0]);
        t.item_mut(1).copy_from_slice(&[2.0, 0.0]);
        t.item_mut(2).copy_from_slice(&[1.0, -1.0]);
        t.item_mut(3).copy_from_slice(&[0.0, 3.0]);
        let snap = RecSnapshot::from_embeddings(t, 2, UserMask::empty(2)).unwrap();
        // top-2: user 0 -> [1, 2], user 1 -> [3, 0]
        let d = Dataset::from_pairs(
            2,
            4,
            vec![Pair::new(0, 3), Pair::new(1, 1)],
            vec![Pair::new(0, 1), Pair::new(0, 0), Pair::new(1, 3)],
            IdMap::sequential(2, 4),
        )
        .unwrap();
        (snap, d)
    }

    #[test]
    fn takes_all_candidates_when_exactly_enough() {
        let (snap, d) = fixture();
        let s = build_editing_split(&snap, &d, 2, 2, 7).unwrap();
        assert_eq!(s.explicit, vec![Pair::new(0, 1), Pair::new(1, 3)]);
        assert_eq!(s.implicit, vec![Pair::new(0, 0)]);
    }

    #[test]
    fn insufficient_candidates() {
        let (snap, d) = fixture();
        let err = build_editing_split(&snap, &d, 2, 3, 7).unwrap_err();
        assert!(matches!(
            err,
            DataError::InsufficientCandidates { available: 2, requested: 3 }
        ));
    }

    #[test]
    fn partitions_negatives() {
        let (snap, d) = fixture();
        for seed in 0..5 {
            let s = build_editing_split(&snap, &d, 2, 1, seed).unwrap();
            let mut all = s.all_pairs();
            all.sort();
            let mut neg = d.negatives().to_vec();
            neg.sort();
            assert_eq!(all, neg);
            assert!(s.explicit.iter().all(|p| !s.implicit.contains(p)));
            let again = build_editing_split(&snap, &d, 2, 1, seed).unwrap();
            assert_eq!((s.explicit, s.implicit), (again.explicit, again.implicit));
        }
    }
}
