//! Editing objectives and the editor family.
//!
//! Every editor runs the same capped loop: one round is a shuffled pass over the
//! objective's terms with Adam, after which the explicit pairs are re-ranked.
//! Editing stops once every explicit pair has left the top-`k_edit`.

mod objective;
mod replay;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::{Adam, BackboneError, EmbeddingTable, ModelState};
use crate::data::{rank_of, DataError, EditingSplit, Pair, UserMask};

pub use objective::{
    ebce_loss, ebce_terms, ebpr_loss, ebpr_terms, l2_penalty, lwf_penalty, sriu_weights, terms_objective, LossGrad,
    Term,
};
pub use replay::{rsr_sample, rsr_terms, spmf_probabilities, spmf_sample, spmf_terms};

#[derive(Debug, Error)]
pub enum EditError {
    #[error("the explicit edit set is empty")]
    EmptyEditSet,
    #[error("pair ({user}, {item}) has no other items in its pre-edit list")]
    DegenerateRecommendationList { user: usize, item: usize },
    #[error("replay needs {requested} training pairs but only {available} are available")]
    NotEnoughTrainingData { available: usize, requested: usize },
    #[error("invalid edit set: {0}")]
    InvalidEditSet(String),
    #[error("invalid editor config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T, E = EditError> = std::result::Result<T, E>;

/// Explicit pairs with their users' pre-edit top-`k_edit` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct EditSet {
    pairs: Vec<Pair>,
    pre_topk: Vec<Vec<usize>>,
}

impl EditSet {
    pub fn new(pairs: Vec<Pair>, pre_topk: Vec<Vec<usize>>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(EditError::EmptyEditSet);
        }
        if pairs.len() != pre_topk.len() {
            return Err(EditError::InvalidEditSet("one list per pair is required".into()));
        }
        for (p, list) in pairs.iter().zip(&pre_topk) {
            if !list.contains(&p.item) {
                return Err(EditError::InvalidEditSet(format!(
                    "item {} is not in user {}'s pre-edit list",
                    p.item, p.user
                )));
            }
        }
        Ok(Self { pairs, pre_topk })
    }

    /// Explicit pairs with lists frozen from the split's pre-edit snapshot.
    pub fn from_split(split: &EditingSplit) -> Result<Self> {
        let lists = split
            .explicit
            .iter()
            .map(|p| split.pre_snapshot.topk_at(p.user, split.k_edit).to_vec())
            .collect();
        Self::new(split.explicit.clone(), lists)
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn pre_topk(&self) -> &[Vec<usize>] {
        &self.pre_topk
    }
}

/// Editor family. Tags match the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Ft,
    Eft,
    Lwf {
        #[serde(default = "default_lwf_lambda")]
        lambda: f64,
    },
    L2 {
        #[serde(default = "default_l2_lambda")]
        lambda: f64,
    },
    Sriu,
    Rsr {
        #[serde(default = "default_replay_n")]
        n: usize,
    },
    Spmf {
        #[serde(default = "default_replay_n")]
        n: usize,
    },
}

fn default_lwf_lambda() -> f64 {
    1.0
}

fn default_l2_lambda() -> f64 {
    3e3
}

fn default_replay_n() -> usize {
    100
}

pub const METHOD_TAGS: [&str; 7] = ["ft", "eft", "lwf", "l2", "sriu", "rsr", "spmf"];

impl Method {
    /// Method with default hyperparameters for a tag.
    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "ft" => Method::Ft,
            "eft" => Method::Eft,
            "lwf" => Method::Lwf {
                lambda: default_lwf_lambda(),
            },
            "l2" => Method::L2 {
                lambda: default_l2_lambda(),
            },
            "sriu" => Method::Sriu,
            "rsr" => Method::Rsr { n: default_replay_n() },
            "spmf" => Method::Spmf { n: default_replay_n() },
            _ => return None,
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Ft => "ft",
            Method::Eft => "eft",
            Method::Lwf { .. } => "lwf",
            Method::L2 { .. } => "l2",
            Method::Sriu => "sriu",
            Method::Rsr { .. } => "rsr",
            Method::Spmf { .. } => "spmf",
        }
    }

    /// Output-space editing for EFT, base-parameter editing for the rest.
    pub fn default_routing(&self) -> Routing {
        match self {
            Method::Eft => Routing::Output,
            _ => Routing::Base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditObjective {
    #[default]
    Ebpr,
    Ebce,
}

impl EditObjective {
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "ebpr" => Some(Self::Ebpr),
            "ebce" => Some(Self::Ebce),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Ebpr => "ebpr",
            Self::Ebce => "ebce",
        }
    }
}

/// Which parameters receive the edit gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routing {
    /// Base embeddings, through the backbone's adjoint; outputs are recomputed after each step.
    Base,
    /// Output embeddings, detached from the backbone.
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditorConfig {
    #[serde(flatten)]
    pub method: Method,
    #[serde(default)]
    pub objective: EditObjective,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    /// Terms per Adam step.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the method's default routing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<Routing>,
}

fn default_lr() -> f64 {
    0.01
}

fn default_max_rounds() -> usize {
    20
}

fn default_batch_size() -> usize {
    64
}

impl EditorConfig {
    pub fn new(method: Method, objective: EditObjective) -> Self {
        Self {
            method,
            objective,
            lr: default_lr(),
            max_rounds: default_max_rounds(),
            batch_size: default_batch_size(),
            seed: 0,
            routing: None,
        }
    }

    pub fn routing(&self) -> Routing {
        self.routing.unwrap_or_else(|| self.method.default_routing())
    }

    /// `method,objective` label used in reports.
    pub fn label(&self) -> String {
        format!("{},{}", self.method.tag(), self.objective.tag())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(EditError::InvalidConfig(msg.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a non-negative number");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        match self.method {
            Method::Lwf { lambda } | Method::L2 { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                bad("lambda must be a non-negative number")
            }
            Method::Rsr { n } | Method::Spmf { n } if n == 0 => bad("n must be at least 1"),
            _ => Ok(()),
        }
    }
}

/// Result of one edit run.
#[derive(Debug, Clone)]
pub struct EditOutcome {
    pub model: ModelState,
    pub rounds: usize,
    /// Seconds spent in the round loop.
    pub wall_time_s: f64,
    pub converged: bool,
    /// Explicit-pair ranks after the last round.
    pub final_ranks: Vec<usize>,
    pub round_losses: Vec<f64>,
    /// Graph propagations (forward or adjoint) performed inside the loop.
    pub propagation_calls: usize,
}

fn explicit_ranks(table: &EmbeddingTable, pairs: &[Pair], mask: &UserMask) -> Vec<usize> {
    pairs
        .iter()
        .map(|p| rank_of(table, mask.items(p.user), p.user, p.item))
        .collect()
}

/// Edits a copy of `model` so the split's explicit pairs leave the top-`k_edit`.
///
/// `model` must be the model the split's pre-edit snapshot was taken from.
pub fn run_edit(
    model: &ModelState,
    split: &EditingSplit,
    train_positives: &[Pair],
    cfg: &EditorConfig,
) -> Result<EditOutcome> {
    cfg.validate()?;
    let edits = EditSet::from_split(split)?;
    let mask = split.pre_snapshot.mask();
    let k = split.k_edit;
    let routing = cfg.routing();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let original = model.output().clone();
    let original_scores: Vec<f64> = edits.pairs().iter().map(|p| original.score(p.user, p.item)).collect();
    let weights: Option<Vec<f64>> = match cfg.method {
        Method::Sriu => {
            let n = edits.pairs().len() as f64;
            Some(sriu_weights(&original_scores).into_iter().map(|w| w * n).collect())
        }
        _ => None,
    };
    let edit_terms = match cfg.objective {
        EditObjective::Ebpr => ebpr_terms(&edits, weights.as_deref())?,
        EditObjective::Ebce => ebce_terms(&edits, weights.as_deref()),
    };
    let rsr_replay = match cfg.method {
        Method::Rsr { n } => Some(rsr_sample(&mut rng, train_positives, n)?),
        _ => None,
    };
    let spmf_replay = match cfg.method {
        Method::Spmf { n } => {
            let (pos, neg) = spmf_sample(&mut rng, &original, train_positives, mask, &split.all_pairs(), n)?;
            spmf_terms(&pos, &neg)
        }
        _ => Vec::new(),
    };

    let mut edited = model.clone();
    if routing == Routing::Output {
        edited.detach();
    }
    let params_of = |m: &ModelState| match routing {
        Routing::Base => m.base().data().to_vec(),
        Routing::Output => m.output().data().to_vec(),
    };
    let theta0 = params_of(&edited);
    let mut adam = Adam::new(theta0.len(), cfg.lr);
    let propagates = routing == Routing::Base && edited.backbone().propagates();

    let mut ranks = explicit_ranks(edited.output(), edits.pairs(), mask);
    if ranks.iter().all(|&r| r > k) {
        return Ok(EditOutcome {
            model: edited,
            rounds: 0,
            wall_time_s: 0.0,
            converged: true,
            final_ranks: ranks,
            round_losses: Vec::new(),
            propagation_calls: 0,
        });
    }

    let mut rounds = 0;
    let mut converged = false;
    let mut round_losses = Vec::new();
    let mut propagation_calls = 0;
    let start = Instant::now();
    while rounds < cfg.max_rounds {
        let mut terms = edit_terms.clone();
        if let Some(replay) = &rsr_replay {
            terms.extend(rsr_terms(&mut rng, replay, mask, edited.n_items())?);
        }
        terms.extend_from_slice(&spmf_replay);
        terms.shuffle(&mut rng);

        let mut round_loss = 0.0;
        for batch in terms.chunks(cfg.batch_size) {
            let LossGrad { mut loss, mut grad } = terms_objective(edited.output(), batch);
            if let Method::Lwf { lambda } = cfg.method {
                loss += lwf_penalty(edited.output(), edits.pairs(), &original_scores, lambda, &mut grad);
            }
            let mut grad = match routing {
                Routing::Base => {
                    if propagates {
                        propagation_calls += 1;
                    }
                    edited.backbone().backward(&grad)
                }
                Routing::Output => grad,
            };
            let params = match routing {
                Routing::Base => edited.base_mut().data_mut(),
                Routing::Output => edited.output_mut().data_mut(),
            };
            if let Method::L2 { lambda } = cfg.method {
                loss += l2_penalty(params, &theta0, lambda, grad.data_mut());
            }
            adam.step(params, grad.data())?;
            if routing == Routing::Base {
                edited.refresh();
                if propagates {
                    propagation_calls += 1;
                }
            }
            round_loss += loss;
        }
        rounds += 1;
        round_losses.push(round_loss);
        ranks = explicit_ranks(edited.output(), edits.pairs(), mask);
        if ranks.iter().all(|&r| r > k) {
            converged = true;
            break;
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    Ok(EditOutcome {
        model: edited,
        rounds,
        wall_time_s,
        converged,
        final_ranks: ranks,
        round_losses,
        propagation_calls,
    })
}
