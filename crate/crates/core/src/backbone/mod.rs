//! Embedding backbones (MF and LightGCN-style propagation) with BPR training.
//!
//! Parameters live in an [`EmbeddingTable`]: one row per node, users first and
//! items after. A [`ModelState`] pairs the trainable base table with the
//! output table used for scoring. For MF the two coincide; for LightGCN the
//! output is the layer mean of the propagated base embeddings.

mod adam;
mod checkpoint;
mod lightgcn;
mod train;

use std::sync::Arc;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use lightgcn::{lightgcn_propagate, lightgcn_propagate_adjoint, BipartiteAdjacency};
pub use train::{
    bpr_batch_objective, bpr_train_epoch, sample_negative, train_model, BatchObjective, TrainConfig,
    TrainReport, Triple,
};

#[derive(Debug, Error)]
pub enum BackboneError {
    #[error("non-finite gradient encountered")]
    NonFiniteGradient,
    #[error("user {0} has interacted with every item; no negative can be sampled")]
    NoNegativeCandidates(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BackboneError> = std::result::Result<T, E>;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// User rows followed by item rows, each `dim` wide, stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    n_users: usize,
    n_items: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(n_users: usize, n_items: usize, dim: usize) -> Self {
        Self {
            n_users,
            n_items,
            dim,
            data: vec![0.0; (n_users + n_items) * dim],
        }
    }

    pub fn from_data(n_users: usize, n_items: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (n_users + n_items) * dim {
            return Err(BackboneError::ShapeMismatch(format!(
                "expected {} values for {n_users}+{n_items} rows of width {dim}, got {}",
                (n_users + n_items) * dim,
                data.len()
            )));
        }
        Ok(Self {
            n_users,
            n_items,
            dim,
            data,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_nodes(&self) -> usize {
        self.n_users + self.n_items
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_users == other.n_users && self.n_items == other.n_items && self.dim == other.dim
    }

    #[inline]
    pub fn node(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.dim..(n + 1) * self.dim]
    }

    #[inline]
    pub fn user(&self, u: usize) -> &[f64] {
        self.node(u)
    }

    #[inline]
    pub fn item(&self, i: usize) -> &[f64] {
        self.node(self.n_users + i)
    }

    #[inline]
    pub fn user_mut(&mut self, u: usize) -> &mut [f64] {
        self.node_mut(u)
    }

    #[inline]
    pub fn item_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.n_users + i;
        self.node_mut(n)
    }

    /// Inner product of the user and item rows.
    #[inline]
    pub fn score(&self, u: usize, i: usize) -> f64 {
        dot(self.user(u), self.item(i))
    }

    /// Scores of `u` against every item.
    pub fn user_scores(&self, u: usize) -> Vec<f64> {
        let p = self.user(u);
        (0..self.n_items).map(|i| dot(p, self.item(i))).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Squared Euclidean norm of `self - other`.
    pub fn sq_dist(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Xavier-uniform initialisation with `fan_in = fan_out = dim`.
pub fn init_embeddings(n_users: usize, n_items: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let bound = xavier_bound(dim);
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = EmbeddingTable::zeros(n_users, n_items, dim);
    for x in t.data_mut() {
        *x = dist.sample(&mut rng);
    }
    t
}

pub fn xavier_bound(dim: usize) -> f64 {
    (6.0 / (2 * dim) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Mf,
    #[serde(rename = "lightgcn")]
    LightGcn,
}

impl BackboneKind {
    pub fn tag(self) -> &'static str {
        match self {
            BackboneKind::Mf => "mf",
            BackboneKind::LightGcn => "lightgcn",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Backbone {
    Mf,
    LightGcn {
        n_layers: usize,
        adjacency: Arc<BipartiteAdjacency>,
    },
}

impl Backbone {
    pub fn kind(&self) -> BackboneKind {
        match self {
            Backbone::Mf => BackboneKind::Mf,
            Backbone::LightGcn { .. } => BackboneKind::LightGcn,
        }
    }

    pub fn n_layers(&self) -> usize {
        match self {
            Backbone::Mf => 0,
            Backbone::LightGcn { n_layers, .. } => *n_layers,
        }
    }

    /// Maps base embeddings to output embeddings.
    pub fn forward(&self, base: &EmbeddingTable) -> EmbeddingTable {
        match self {
            Backbone::Mf => base.clone(),
            Backbone::LightGcn { n_layers, adjacency } => lightgcn_propagate(base, adjacency, *n_layers),
        }
    }

    /// Pulls a gradient on output embeddings back to the base embeddings.
    pub fn backward(&self, grad_output: &EmbeddingTable) -> EmbeddingTable {
        match self {
            Backbone::Mf => grad_output.clone(),
            Backbone::LightGcn { n_layers, adjacency } => {
                lightgcn_propagate_adjoint(grad_output, adjacency, *n_layers)
            }
        }
    }

    /// Whether `forward` does graph work (used by edit-loop instrumentation).
    pub fn propagates(&self) -> bool {
        matches!(self, Backbone::LightGcn { .. })
    }
}

/// Base embeddings, backbone, and the output embeddings used for scoring.
///
/// A *detached* model has output embeddings that were edited directly and no
/// longer follow from the base table.
#[derive(Debug, Clone)]
pub struct ModelState {
    backbone: Backbone,
    base: EmbeddingTable,
    output: EmbeddingTable,
    detached: bool,
}

impl ModelState {
    pub fn new(backbone: Backbone, base: EmbeddingTable) -> Self {
        let output = backbone.forward(&base);
        Self {
            backbone,
            base,
            output,
            detached: false,
        }
    }

    pub fn mf(base: EmbeddingTable) -> Self {
        Self::new(Backbone::Mf, base)
    }

    pub fn lightgcn(base: EmbeddingTable, n_layers: usize, adjacency: Arc<BipartiteAdjacency>) -> Self {
        Self::new(Backbone::LightGcn { n_layers, adjacency }, base)
    }

    /// A model whose output table is given explicitly.
    pub fn with_detached_output(backbone: Backbone, base: EmbeddingTable, output: EmbeddingTable) -> Result<Self> {
        if !base.same_shape(&output) {
            return Err(BackboneError::ShapeMismatch("base and output tables differ in shape".into()));
        }
        Ok(Self {
            backbone,
            base,
            output,
            detached: true,
        })
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn base(&self) -> &EmbeddingTable {
        &self.base
    }

    pub fn output(&self) -> &EmbeddingTable {
        &self.output
    }

    pub fn is_detached(&self) -> bool {
        self.detached
    }

    pub fn n_users(&self) -> usize {
        self.base.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.base.n_items()
    }

    pub fn score(&self, u: usize, i: usize) -> f64 {
        self.output.score(u, i)
    }

    /// Mutable base parameters. Call [`ModelState::refresh`] afterwards.
    pub fn base_mut(&mut self) -> &mut EmbeddingTable {
        &mut self.base
    }

    /// Recomputes output embeddings from the base table. Detached models keep their output.
    pub fn refresh(&mut self) {
        if self.detached {
            return;
        }
        match &self.backbone {
            Backbone::Mf => self.output.clone_from(&self.base),
            b => self.output = b.forward(&self.base),
        }
    }

    /// Freezes the current output embeddings as free parameters.
    pub fn detach(&mut self) {
        self.detached = true;
    }

    /// Mutable output parameters. Only meaningful for detached models.
    pub fn output_mut(&mut self) -> &mut EmbeddingTable {
        debug_assert!(self.detached, "editing output of an attached model");
        &mut self.output
    }
}
