use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Pair, Result};

/// Global random split of the positive interactions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTestSplit {
    pub train_positives: Vec<Pair>,
    pub test_positives: Vec<Pair>,
    pub seed: u64,
}

impl TrainTestSplit {
    /// Sorted training items per user.
    pub fn train_by_user(&self, n_users: usize) -> Vec<Vec<usize>> {
        group(n_users, &self.train_positives)
    }

    /// Sorted test items per user.
    pub fn test_by_user(&self, n_users: usize) -> Vec<Vec<usize>> {
        group(n_users, &self.test_positives)
    }
}

fn group(n_users: usize, pairs: &[Pair]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_users];
    for p in pairs {
        out[p.user].push(p.item);
    }
    for v in &mut out {
        v.sort_unstable();
    }
    out
}

/// Seeded permutation of all positives; the first `floor(ratio * n)` become training data.
pub fn split_train_test(d: &Dataset, ratio: f64, seed: u64) -> Result<TrainTestSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = d.positives().len();
    if n < 2 {
        return Err(DataError::InvalidArgument(format!(
            "need at least 2 positives to split, found {n}"
        )));
    }
    let mut shuffled = d.positives().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let n_train = (ratio * n as f64).floor() as usize;
    let test_positives = shuffled.split_off(n_train);
    Ok(TrainTestSplit {
        train_positives: shuffled,
        test_positives,
        seed,
    })
}
