//! Recommendation editing benchmark.
//!
//! Trains MF and LightGCN backbones with BPR, edits them so chosen
//! recommendations disappear, and scores the edit with editing accuracy,
//! collaboration, prudence and top-k accuracy.

pub mod backbone;
pub mod bench;
pub mod data;
pub mod editing;
pub mod math;
pub mod metrics;
pub mod synthetic;

mod io;
