use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    Backbone, BackboneError, BackboneKind, BipartiteAdjacency, EmbeddingTable, ModelState, Result, TrainConfig,
};
use crate::data::Pair;
use crate::io::write_atomic;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Serialisable model parameters.
///
/// The LightGCN adjacency is not stored; it is rebuilt from the training
/// positives on load. Detached output embeddings (produced by output-space
/// editing) are stored verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub backbone: BackboneKind,
    pub dim: usize,
    pub n_layers: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub seed: u64,
    pub config: TrainConfig,
    pub base: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detached_output: Option<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_model(model: &ModelState, config: &TrainConfig) -> Self {
        let base = model.base();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            backbone: model.backbone().kind(),
            dim: base.dim(),
            n_layers: model.backbone().n_layers(),
            n_users: base.n_users(),
            n_items: base.n_items(),
            seed: config.seed,
            config: config.clone(),
            base: base.data().to_vec(),
            detached_output: model.is_detached().then(|| model.output().data().to_vec()),
        }
    }

    /// Rebuilds the model; LightGCN needs the training positives for its adjacency.
    pub fn to_model(&self, train_positives: &[Pair]) -> Result<ModelState> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(BackboneError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        let base = EmbeddingTable::from_data(self.n_users, self.n_items, self.dim, self.base.clone())?;
        let backbone = match self.backbone {
            BackboneKind::Mf => Backbone::Mf,
            BackboneKind::LightGcn => Backbone::LightGcn {
                n_layers: self.n_layers,
                adjacency: Arc::new(BipartiteAdjacency::from_pairs(
                    self.n_users,
                    self.n_items,
                    train_positives,
                )),
            },
        };
        match &self.detached_output {
            Some(out) => {
                let output = EmbeddingTable::from_data(self.n_users, self.n_items, self.dim, out.clone())?;
                ModelState::with_detached_output(backbone, base, output)
            }
            None => Ok(ModelState::new(backbone, base)),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("checkpoint serialises")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| BackboneError::Checkpoint(e.to_string()))
    }
}
