use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::{Checkpoint, ModelState};
use crate::data::{snapshot_topk, EditingSplit, Pair, TrainTestSplit, UserMask};
use crate::io::write_atomic;

use super::BenchError;

pub const SPLIT_FORMAT_VERSION: u32 = 1;

/// Train/test and editing partitions tied to the checkpoint they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub format_version: u32,
    /// Content hash of the source checkpoint.
    pub checkpoint_hash: String,
    pub n_users: usize,
    pub n_items: usize,
    pub k_edit: usize,
    pub k_eval: usize,
    pub seed: u64,
    pub train_positives: Vec<Pair>,
    pub test_positives: Vec<Pair>,
    pub explicit: Vec<Pair>,
    pub implicit: Vec<Pair>,
}

impl SplitFile {
    pub fn new(checkpoint: &Checkpoint, data: &TrainTestSplit, split: &EditingSplit, k_eval: usize) -> Self {
        Self {
            format_version: SPLIT_FORMAT_VERSION,
            checkpoint_hash: checkpoint.content_hash(),
            n_users: checkpoint.n_users,
            n_items: checkpoint.n_items,
            k_edit: split.k_edit,
            k_eval,
            seed: split.seed,
            train_positives: data.train_positives.clone(),
            test_positives: data.test_positives.clone(),
            explicit: split.explicit.clone(),
            implicit: split.implicit.clone(),
        }
    }

    /// Fails unless `checkpoint` is the model this split was built against.
    pub fn check_checkpoint(&self, checkpoint: &Checkpoint) -> Result<(), BenchError> {
        let found = checkpoint.content_hash();
        if found != self.checkpoint_hash {
            return Err(BenchError::SplitModelMismatch {
                expected: self.checkpoint_hash.clone(),
                found,
            });
        }
        Ok(())
    }

    fn per_user(&self, pairs: &[Pair]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_users];
        for p in pairs {
            out[p.user].push(p.item);
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }

    pub fn train_mask(&self) -> UserMask {
        UserMask::new(self.per_user(&self.train_positives))
    }

    pub fn test_by_user(&self) -> Vec<Vec<usize>> {
        self.per_user(&self.test_positives)
    }

    /// Rebuilds the model and the editing split against it.
    pub fn restore(&self, checkpoint: &Checkpoint) -> Result<(ModelState, EditingSplit), BenchError> {
        self.check_checkpoint(checkpoint)?;
        let model = checkpoint.to_model(&self.train_positives)?;
        let snap = snapshot_topk(&model, self.k_edit.max(self.k_eval), self.train_mask())?;
        let split = EditingSplit::from_parts(
            self.explicit.clone(),
            self.implicit.clone(),
            snap,
            self.k_edit,
            self.seed,
        )?;
        Ok((model, split))
    }

    pub fn write(&self, path: &Path) -> Result<(), BenchError> {
        let bytes = serde_json::to_vec(self).map_err(|e| BenchError::Config(e.to_string()))?;
        write_atomic(path, &bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, BenchError> {
        let bytes = std::fs::read(path)?;
        let file: Self = serde_json::from_slice(&bytes).map_err(|e| BenchError::Config(e.to_string()))?;
        if file.format_version != SPLIT_FORMAT_VERSION {
            return Err(BenchError::Config(format!(
                "unsupported split file version {}",
                file.format_version
            )));
        }
        Ok(file)
    }
}
