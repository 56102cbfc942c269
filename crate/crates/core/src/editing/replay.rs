use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;

use crate::backbone::{sample_negative, EmbeddingTable};
use crate::data::{Pair, UserMask};
use crate::math::softmax;

use super::objective::Term;
use super::{EditError, Result};

/// Uniformly sampled training positives, without replacement.
pub fn rsr_sample<R: Rng + ?Sized>(rng: &mut R, train_positives: &[Pair], n: usize) -> Result<Vec<Pair>> {
    if n == 0 || n > train_positives.len() {
        return Err(EditError::NotEnoughTrainingData {
            available: train_positives.len(),
            requested: n,
        });
    }
    Ok(index::sample(rng, train_positives.len(), n)
        .into_iter()
        .map(|i| train_positives[i])
        .collect())
}

/// BPR replay terms for one round, with fresh negatives.
pub fn rsr_terms<R: Rng + ?Sized>(
    rng: &mut R,
    replay: &[Pair],
    mask: &UserMask,
    n_items: usize,
) -> Result<Vec<Term>> {
    replay
        .iter()
        .map(|p| {
            let neg = sample_negative(rng, p.user, mask.items(p.user), n_items)?;
            Ok(Term::Pairwise {
                user: p.user,
                pos: p.item,
                neg,
                weight: 1.0,
            })
        })
        .collect()
}

/// Sampling distribution over training positives: softmax of their original scores.
pub fn spmf_probabilities(original_scores: &[f64]) -> Vec<f64> {
    softmax(original_scores)
}

/// `n` score-weighted positives (with replacement) and `n` uniform unobserved pairs.
///
/// Unobserved means neither a training positive nor one of `excluded`.
pub fn spmf_sample<R: Rng + ?Sized>(
    rng: &mut R,
    original: &EmbeddingTable,
    train_positives: &[Pair],
    mask: &UserMask,
    excluded: &[Pair],
    n: usize,
) -> Result<(Vec<Pair>, Vec<Pair>)> {
    let not_enough = || EditError::NotEnoughTrainingData {
        available: train_positives.len(),
        requested: n,
    };
    if n == 0 || train_positives.is_empty() {
        return Err(not_enough());
    }
    let scores: Vec<f64> = train_positives
        .iter()
        .map(|p| original.score(p.user, p.item))
        .collect();
    let dist = WeightedIndex::new(spmf_probabilities(&scores)).map_err(|_| not_enough())?;
    let positives = (0..n).map(|_| train_positives[dist.sample(rng)]).collect();

    let (n_users, n_items) = (original.n_users(), original.n_items());
    let excluded: HashSet<Pair> = excluded.iter().copied().collect();
    let observed = (0..n_users).map(|u| mask.items(u).len()).sum::<usize>()
        + excluded.iter().filter(|p| !mask.contains(p.user, p.item)).count();
    if observed >= n_users * n_items {
        return Err(not_enough());
    }
    let mut negatives = Vec::with_capacity(n);
    while negatives.len() < n {
        let p = Pair::new(rng.random_range(0..n_users), rng.random_range(0..n_items));
        if !mask.contains(p.user, p.item) && !excluded.contains(&p) {
            negatives.push(p);
        }
    }
    Ok((positives, negatives))
}

/// BCE replay terms: label 1 on positives, label 0 on negatives.
pub fn spmf_terms(positives: &[Pair], negatives: &[Pair]) -> Vec<Term> {
    let label = |positive: bool| {
        move |p: &Pair| Term::Pointwise {
            user: p.user,
            item: p.item,
            positive,
            weight: 1.0,
        }
    };
    positives
        .iter()
        .map(label(true))
        .chain(negatives.iter().map(label(false)))
        .collect()
}
