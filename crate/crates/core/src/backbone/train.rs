use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    init_embeddings, Adam, BackboneError, BackboneKind, BipartiteAdjacency, EmbeddingTable, ModelState, Result,
};
use crate::data::{Pair, UserMask};
use crate::math::{neg_log_sigmoid, sigmoid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Propagation depth for LightGCN; ignored by MF.
    pub n_layers: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a loss improvement of at least `min_delta`.
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            lr: 0.001,
            batch_size: 2048,
            weight_decay: 1e-4,
            n_layers: 3,
            max_epochs: 400,
            patience: 5,
            min_delta: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(BackboneError::InvalidConfig(msg.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        Ok(())
    }
}

/// A user with one positive and one sampled negative item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

/// Mean BPR loss of a batch and its gradients.
///
/// `grad_output` is the ranking term's gradient w.r.t. output embeddings;
/// `grad_decay` is the L2 term's gradient w.r.t. base embeddings.
#[derive(Debug, Clone)]
pub struct BatchObjective {
    pub loss: f64,
    pub grad_output: EmbeddingTable,
    pub grad_decay: EmbeddingTable,
}

/// `mean_t [ -ln σ(x_ut,it - x_ut,jt) + λ (‖b_u‖² + ‖b_i‖² + ‖b_j‖²) ]`.
pub fn bpr_batch_objective(
    output: &EmbeddingTable,
    base: &EmbeddingTable,
    triples: &[Triple],
    weight_decay: f64,
) -> BatchObjective {
    let (n_users, n_items, dim) = (output.n_users(), output.n_items(), output.dim());
    let mut grad_output = EmbeddingTable::zeros(n_users, n_items, dim);
    let mut grad_decay = EmbeddingTable::zeros(n_users, n_items, dim);
    if triples.is_empty() {
        return BatchObjective {
            loss: 0.0,
            grad_output,
            grad_decay,
        };
    }
    let scale = 1.0 / triples.len() as f64;
    let mut loss = 0.0;
    for t in triples {
        let diff = output.score(t.user, t.pos) - output.score(t.user, t.neg);
        loss += neg_log_sigmoid(diff);
        // d/d(diff) of -ln σ(diff)
        let g = -sigmoid(-diff) * scale;
        for k in 0..dim {
            let p = output.user(t.user)[k];
            let qi = output.item(t.pos)[k];
            let qj = output.item(t.neg)[k];
            grad_output.user_mut(t.user)[k] += g * (qi - qj);
            grad_output.item_mut(t.pos)[k] += g * p;
            grad_output.item_mut(t.neg)[k] -= g * p;
        }

        if weight_decay > 0.0 {
            let rows = [t.user, n_users + t.pos, n_users + t.neg];
            for n in rows {
                let row = base.node(n);
                loss += weight_decay * row.iter().map(|x| x * x).sum::<f64>();
                let grad = grad_decay.node_mut(n);
                for k in 0..dim {
                    grad[k] += 2.0 * weight_decay * scale * row[k];
                }
            }
        }
    }
    BatchObjective {
        loss: loss * scale,
        grad_output,
        grad_decay,
    }
}

/// Uniform item outside the user's sorted positive list.
pub fn sample_negative<R: Rng + ?Sized>(
    rng: &mut R,
    user: usize,
    positives: &[usize],
    n_items: usize,
) -> Result<usize> {
    if positives.len() >= n_items {
        return Err(BackboneError::NoNegativeCandidates(user));
    }
    loop {
        let j = rng.random_range(0..n_items);
        if positives.binary_search(&j).is_err() {
            return Ok(j);
        }
    }
}

/// One shuffled pass over the training positives. Returns the mean triple loss.
pub fn bpr_train_epoch<R: Rng + ?Sized>(
    model: &mut ModelState,
    train_positives: &[Pair],
    mask: &UserMask,
    cfg: &TrainConfig,
    adam: &mut Adam,
    rng: &mut R,
) -> Result<f64> {
    if train_positives.is_empty() {
        return Err(BackboneError::EmptyTrainingSet);
    }
    let n_items = model.n_items();
    let mut order: Vec<usize> = (0..train_positives.len()).collect();
    order.shuffle(rng);

    let mut total = 0.0;
    for chunk in order.chunks(cfg.batch_size) {
        let mut triples = Vec::with_capacity(chunk.len());
        for &idx in chunk {
            let p = train_positives[idx];
            let neg = sample_negative(rng, p.user, mask.items(p.user), n_items)?;
            triples.push(Triple {
                user: p.user,
                pos: p.item,
                neg,
            });
        }
        let obj = bpr_batch_objective(model.output(), model.base(), &triples, cfg.weight_decay);
        let grad_base = model.backbone().backward(&obj.grad_output);
        adam.step(model.base_mut().data_mut(), grad_base.data())?;
        // decoupled weight decay
        model.base_mut().axpy(-adam.lr, &obj.grad_decay);
        model.refresh();
        total += obj.loss * triples.len() as f64;
    }
    Ok(total / train_positives.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub losses: Vec<f64>,
    pub stopped_early: bool,
}

/// Initialises and trains a backbone on the training positives.
pub fn train_model(
    kind: BackboneKind,
    n_users: usize,
    n_items: usize,
    train_positives: &[Pair],
    cfg: &TrainConfig,
) -> Result<(ModelState, TrainReport)> {
    cfg.validate()?;
    if train_positives.is_empty() {
        return Err(BackboneError::EmptyTrainingSet);
    }
    let base = init_embeddings(n_users, n_items, cfg.dim, cfg.seed);
    let mut model = match kind {
        BackboneKind::Mf => ModelState::mf(base),
        BackboneKind::LightGcn => {
            let adj = BipartiteAdjacency::from_pairs(n_users, n_items, train_positives);
            ModelState::lightgcn(base, cfg.n_layers, Arc::new(adj))
        }
    };
    let mut per_user = vec![Vec::new(); n_users];
    for p in train_positives {
        per_user[p.user].push(p.item);
    }
    let mask = UserMask::new(per_user);
    let mut adam = Adam::new(model.base().data().len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut losses = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;
    for _ in 0..cfg.max_epochs {
        let loss = bpr_train_epoch(&mut model, train_positives, &mask, cfg, &mut adam, &mut rng)?;
        losses.push(loss);
        if loss < best - cfg.min_delta {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok((
        model,
        TrainReport {
            epochs: losses.len(),
            losses,
            stopped_early,
        },
    ))
}
