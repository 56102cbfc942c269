use crate::backbone::EmbeddingTable;
use crate::data::Pair;
use crate::math::{sigmoid, softmax, softplus};

use super::{EditError, EditSet, Result};

/// One summand of an edit objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    /// `-w ln σ(x_{u,pos} - x_{u,neg})`.
    Pairwise {
        user: usize,
        pos: usize,
        neg: usize,
        weight: f64,
    },
    /// `-w ln σ(x_{u,i})` for a positive label, `-w ln(1 - σ(x_{u,i}))` otherwise.
    Pointwise {
        user: usize,
        item: usize,
        positive: bool,
        weight: f64,
    },
}

/// Loss value and its gradient with respect to one embedding table.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: EmbeddingTable,
}

fn add_score_grad(table: &EmbeddingTable, grad: &mut EmbeddingTable, user: usize, item: usize, g: f64) {
    if g == 0.0 {
        return;
    }
    let dim = table.dim();
    for k in 0..dim {
        grad.user_mut(user)[k] += g * table.item(item)[k];
    }
    for k in 0..dim {
        grad.item_mut(item)[k] += g * table.user(user)[k];
    }
}

/// Sums `terms` on `table` and returns the gradient w.r.t. `table`.
pub fn terms_objective(table: &EmbeddingTable, terms: &[Term]) -> LossGrad {
    let mut grad = EmbeddingTable::zeros(table.n_users(), table.n_items(), table.dim());
    let mut loss = 0.0;
    for t in terms {
        match *t {
            Term::Pairwise { user, pos, neg, weight } => {
                let diff = table.score(user, pos) - table.score(user, neg);
                loss += weight * softplus(-diff);
                let g = weight * sigmoid(-diff);
                add_score_grad(table, &mut grad, user, pos, -g);
                add_score_grad(table, &mut grad, user, neg, g);
            }
            Term::Pointwise {
                user,
                item,
                positive,
                weight,
            } => {
                let x = table.score(user, item);
                if positive {
                    loss += weight * softplus(-x);
                    add_score_grad(table, &mut grad, user, item, -weight * sigmoid(-x));
                } else {
                    loss += weight * softplus(x);
                    add_score_grad(table, &mut grad, user, item, weight * sigmoid(x));
                }
            }
        }
    }
    LossGrad { loss, grad }
}

/// E-BPR terms: each explicit item is pushed below every other item of its pre-edit list.
pub fn ebpr_terms(edits: &EditSet, weights: Option<&[f64]>) -> Result<Vec<Term>> {
    let mut terms = Vec::new();
    for (e, (p, list)) in edits.pairs().iter().zip(edits.pre_topk()).enumerate() {
        let weight = weights.map_or(1.0, |w| w[e]);
        let before = terms.len();
        terms.extend(list.iter().filter(|&&j| j != p.item).map(|&j| Term::Pairwise {
            user: p.user,
            pos: j,
            neg: p.item,
            weight,
        }));
        if terms.len() == before {
            return Err(EditError::DegenerateRecommendationList {
                user: p.user,
                item: p.item,
            });
        }
    }
    Ok(terms)
}

/// E-BCE terms: each explicit pair is labelled 0.
pub fn ebce_terms(edits: &EditSet, weights: Option<&[f64]>) -> Vec<Term> {
    edits
        .pairs()
        .iter()
        .enumerate()
        .map(|(e, p)| Term::Pointwise {
            user: p.user,
            item: p.item,
            positive: false,
            weight: weights.map_or(1.0, |w| w[e]),
        })
        .collect()
}

/// E-BPR loss and its gradient w.r.t. the scoring embeddings.
pub fn ebpr_loss(table: &EmbeddingTable, edits: &EditSet) -> Result<LossGrad> {
    Ok(terms_objective(table, &ebpr_terms(edits, None)?))
}

/// E-BCE loss and its gradient w.r.t. the scoring embeddings.
pub fn ebce_loss(table: &EmbeddingTable, edits: &EditSet) -> LossGrad {
    terms_objective(table, &ebce_terms(edits, None))
}

/// `λ · mean_e (x_e - x⁰_e)²` over the given pairs; adds its gradient into `grad`.
pub fn lwf_penalty(
    table: &EmbeddingTable,
    pairs: &[Pair],
    original_scores: &[f64],
    lambda: f64,
    grad: &mut EmbeddingTable,
) -> f64 {
    if pairs.is_empty() || lambda == 0.0 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mut total = 0.0;
    for (p, x0) in pairs.iter().zip(original_scores) {
        let diff = table.score(p.user, p.item) - x0;
        total += diff * diff;
        add_score_grad(table, grad, p.user, p.item, 2.0 * lambda * diff / n);
    }
    lambda * total / n
}

/// `λ · mean (θ - θ⁰)²` over all parameters; adds its gradient into `grad`.
pub fn l2_penalty(params: &[f64], original: &[f64], lambda: f64, grad: &mut [f64]) -> f64 {
    if params.is_empty() || lambda == 0.0 {
        return 0.0;
    }
    let n = params.len() as f64;
    let mut total = 0.0;
    for ((g, p), p0) in grad.iter_mut().zip(params).zip(original) {
        let diff = p - p0;
        total += diff * diff;
        *g += 2.0 * lambda * diff / n;
    }
    lambda * total / n
}

/// Softmax of z-normalised original scores; equal weights when the scores do not vary.
pub fn sriu_weights(original_scores: &[f64]) -> Vec<f64> {
    let n = original_scores.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = original_scores.iter().sum::<f64>() / n as f64;
    let var = original_scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var.is_nan() || var <= 0.0 {
        return vec![1.0 / n as f64; n];
    }
    let sd = var.sqrt();
    let z: Vec<f64> = original_scores.iter().map(|x| (x - mean) / sd).collect();
    softmax(&z)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1 user, 2 items, 1-d; item 0 is edited, item 1 is the anchor.
    fn one_pair(x_edit: f64, x_anchor: f64) -> (EmbeddingTable, EditSet) {
        let t = EmbeddingTable::from_data(1, 2, 1, vec![1.0, x_edit, x_anchor]).unwrap();
        let edits = EditSet::new(vec![Pair::new(0, 0)], vec![vec![0, 1]]).unwrap();
        (t, edits)
    }

    #[test]
    fn ebpr_examples() {
        let (t, e) = one_pair(0.3, 0.3);
        let lg = ebpr_loss(&t, &e).unwrap();
        assert!((lg.loss - std::f64::consts::LN_2).abs() < 1e-15);
        // p = 1, so the item gradient equals the score gradient
        assert!((lg.grad.item(0)[0] - 0.5).abs() < 1e-15);
        assert!((lg.grad.item(1)[0] + 0.5).abs() < 1e-15);

        let (t, e) = one_pair(0.0, 2.0);
        let lg = ebpr_loss(&t, &e).unwrap();
        assert!((lg.loss - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
        assert!((lg.loss - 0.1269).abs() < 1e-4);
    }

    #[test]
    fn ebpr_degenerate_list() {
        let t = EmbeddingTable::from_data(1, 2, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let e = EditSet::new(vec![Pair::new(0, 0)], vec![vec![0]]).unwrap();
        assert!(matches!(
            ebpr_loss(&t, &e),
            Err(EditError::DegenerateRecommendationList { user: 0, item: 0 })
        ));
        assert_eq!(ebce_loss(&t, &e).loss, std::f64::consts::LN_2);
    }

    #[test]
    fn ebce_examples() {
        let (t, e) = one_pair(0.0, 5.0);
        let lg = ebce_loss(&t, &e);
        assert!((lg.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((lg.grad.item(0)[0] - 0.5).abs() < 1e-15);
        assert_eq!(lg.grad.item(1)[0], 0.0);

        let (t, e) = one_pair(2.0, 0.0);
        let lg = ebce_loss(&t, &e);
        assert!((lg.loss - (1.0 + 2f64.exp()).ln()).abs() < 1e-15);
        assert!((lg.loss - 2.1269).abs() < 1e-4);
    }

    #[test]
    fn sriu_examples() {
        assert_eq!(sriu_weights(&[0.7, 0.7]), vec![0.5, 0.5]);
        assert_eq!(sriu_weights(&[-3.0]), vec![1.0]);
        // mean 2, population sd 1 -> z = (1, -1)
        let w = sriu_weights(&[3.0, 1.0]);
        assert!((w[0] - 0.8808).abs() < 1e-4);
        assert!((w[1] - 0.1192).abs() < 1e-4);
        assert!((w[0] - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn penalties_vanish_at_origin() {
        let (t, _) = one_pair(0.4, 0.1);
        let mut g = EmbeddingTable::zeros(1, 2, 1);
        let pairs = [Pair::new(0, 0)];
        assert_eq!(lwf_penalty(&t, &pairs, &[0.4], 3.0, &mut g), 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));
        let mut g2 = vec![0.0; 3];
        assert_eq!(l2_penalty(t.data(), t.data(), 5.0, &mut g2), 0.0);
        assert!(g2.iter().all(|&x| x == 0.0));
        // one shifted parameter: λ · 0.5² / 3
        let moved = [1.5, 0.4, 0.1];
        assert!((l2_penalty(&moved, t.data(), 6.0, &mut g2) - 0.5).abs() < 1e-15);
        assert!((g2[0] - 2.0).abs() < 1e-15);
    }
}
