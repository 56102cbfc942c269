//! Desk-scale datasets with planted low-rank preferences.
//!
//! Each user's positives are their top items under a latent score. Most
//! negatives come from the bottom of the ranking; a configurable fraction is
//! planted just below the positives so a fitted model still recommends some of
//! them.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::ModelState;
use crate::data::{DataError, Dataset, IdMap, Pair};

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("infeasible synthetic spec: {0}")]
    SpecInfeasible(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub d_true: usize,
    pub pos_per_user: usize,
    pub neg_per_user: usize,
    /// Standard deviation of the per-pair score noise.
    pub noise: f64,
    /// Share of each user's negatives planted right below the positives.
    pub adversarial_neg_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 300,
            d_true: 8,
            pos_per_user: 20,
            neg_per_user: 6,
            noise: 0.1,
            adversarial_neg_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |msg: String| Err(SyntheticError::SpecInfeasible(msg));
        if self.n_users == 0 || self.n_items == 0 {
            return bad("n_users and n_items must be positive".into());
        }
        if self.d_true == 0 {
            return bad("d_true must be at least 1".into());
        }
        if self.pos_per_user == 0 {
            return bad("pos_per_user must be at least 1".into());
        }
        if self.pos_per_user + self.neg_per_user > self.n_items {
            return bad(format!(
                "pos_per_user + neg_per_user = {} exceeds n_items = {}",
                self.pos_per_user + self.neg_per_user,
                self.n_items
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be a non-negative number".into());
        }
        if !(0.0..=1.0).contains(&self.adversarial_neg_fraction) {
            return bad("adversarial_neg_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }

    fn n_adversarial(&self) -> usize {
        (self.adversarial_neg_fraction * self.neg_per_user as f64).round() as usize
    }
}

/// Latent factors and noisy true scores behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    /// `n_users × d_true`, row-major.
    pub users: Vec<f64>,
    /// `n_items × d_true`, row-major.
    pub items: Vec<f64>,
    /// `n_users × n_items`, row-major.
    pub scores: Vec<f64>,
}

impl Latent {
    pub fn score(&self, n_items: usize, user: usize, item: usize) -> f64 {
        self.scores[user * n_items + item]
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<Dataset, SyntheticError> {
    generate_with_latent(spec).map(|(d, _)| d)
}

pub fn generate_with_latent(spec: &SyntheticSpec) -> Result<(Dataset, Latent), SyntheticError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n_users, n_items, d) = (spec.n_users, spec.n_items, spec.d_true);
    let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    let users = normal(n_users * d);
    let items = normal(n_items * d);
    let eps = normal(n_users * n_items);
    let mut scores = vec![0.0; n_users * n_items];
    for u in 0..n_users {
        for i in 0..n_items {
            let dot: f64 = (0..d).map(|k| users[u * d + k] * items[i * d + k]).sum();
            scores[u * n_items + i] = dot + spec.noise * eps[u * n_items + i];
        }
    }
    let rows: Vec<&[f64]> = scores.chunks(n_items).collect();
    let dataset = plant_feedback(&rows, spec, &mut rng)?;
    Ok((dataset, Latent { users, items, scores }))
}

/// Items ordered by descending score, ties to the lower index.
fn by_score(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Picks positives and negatives per user from a score matrix.
fn plant_feedback<R: Rng + ?Sized>(rows: &[&[f64]], spec: &SyntheticSpec, rng: &mut R) -> Result<Dataset, SyntheticError> {
    let n_items = spec.n_items;
    let (n_pos, n_neg) = (spec.pos_per_user, spec.neg_per_user);
    let n_adv = spec.n_adversarial();
    let n_bottom = n_neg - n_adv;
    let window = n_pos.max(n_adv).min(n_items - n_pos - n_bottom);

    let mut positives = Vec::with_capacity(rows.len() * n_pos);
    let mut negatives = Vec::with_capacity(rows.len() * n_neg);
    for (u, row) in rows.iter().enumerate() {
        let order = by_score(row);
        positives.extend(order[..n_pos].iter().map(|&i| Pair::new(u, i)));
        let mut picks: Vec<usize> = index::sample(rng, window, n_adv).into_iter().collect();
        picks.sort_unstable();
        negatives.extend(picks.iter().map(|&p| Pair::new(u, order[n_pos + p])));
        negatives.extend(order[n_items - n_bottom..].iter().map(|&i| Pair::new(u, i)));
    }
    Ok(Dataset::from_pairs(
        rows.len(),
        n_items,
        positives,
        negatives,
        IdMap::sequential(rows.len(), n_items),
    )?)
}

/// Share of same-user (positive, negative) pairs the model orders correctly.
///
/// Equal scores count as correct when the positive has the lower item index,
/// matching the ranking tie-break. NaN when no user has both kinds of feedback.
pub fn planted_auc(d: &Dataset, model: &ModelState) -> f64 {
    let (mut correct, mut total) = (0usize, 0usize);
    for u in 0..d.n_users() {
        let negs = d.user_negatives(u);
        for &i in d.user_positives(u) {
            let si = model.score(u, i);
            for &j in negs {
                let sj = model.score(u, j);
                if si > sj || (si == sj && i < j) {
                    correct += 1;
                }
                total += 1;
            }
        }
    }
    correct as f64 / total as f64
}
