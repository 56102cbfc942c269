use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::backbone::{BackboneKind, TrainConfig};
use crate::editing::{EditObjective, EditorConfig, Method};
use crate::synthetic::SyntheticSpec;

use super::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    /// `user,item,feedback` file.
    Csv { path: PathBuf },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

/// Everything needed to reproduce one benchmark run.
///
/// `seed` drives the train/test split and training; repeat `r` builds its
/// editing split and seeds its editors with `seed + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Optional k-core filter on positives before splitting.
    pub k_core: Option<usize>,
    /// Share of positives used for training.
    pub split_ratio: f64,
    pub backbone: BackboneKind,
    pub train: TrainConfig,
    pub editors: Vec<EditorConfig>,
    pub k_edit: usize,
    pub k_eval: usize,
    pub n_explicit: usize,
    pub repeats: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            k_core: None,
            split_ratio: 0.8,
            backbone: BackboneKind::LightGcn,
            train: TrainConfig::default(),
            editors: vec![
                EditorConfig::new(Method::Eft, EditObjective::Ebpr),
                EditorConfig::new(Method::Ft, EditObjective::Ebpr),
            ],
            k_edit: 50,
            k_eval: 20,
            n_explicit: 10,
            repeats: 10,
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Copy with derived values filled in, as echoed into reports.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.train.seed = cfg.seed;
        cfg
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.editors.is_empty() {
            return bad("at least one editor is required".into());
        }
        if self.k_edit == 0 || self.k_eval == 0 {
            return bad("k_edit and k_eval must be positive".into());
        }
        if self.n_explicit == 0 {
            return bad("n_explicit must be positive".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must lie in (0, 1)".into());
        }
        if self.k_core == Some(0) {
            return bad("k_core must be positive".into());
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        self.train.validate()?;
        for e in &self.editors {
            e.validate()?;
        }
        Ok(())
    }

    /// Snapshot depth covering both cutoffs.
    pub fn snapshot_k(&self) -> usize {
        self.k_edit.max(self.k_eval)
    }
}

/// Editor configs for comma-separated tags, all with one objective.
pub fn editors_from_tags(tags: &str, objective: EditObjective) -> Result<Vec<EditorConfig>, BenchError> {
    tags.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            Method::from_tag(t)
                .map(|m| EditorConfig::new(m, objective))
                .ok_or_else(|| BenchError::UnknownTag(t.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_nested_sections() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "dataset": {"synthetic": {"n_users": 30, "seed": 4}},
                "backbone": "mf",
                "train": {"dim": 8, "max_epochs": 3},
                "editors": [{"method": "l2", "lambda": 10.0}, {"method": "spmf", "n": 5, "objective": "ebce"}],
                "repeats": 2
            }"#,
        )
        .unwrap();
        let DatasetSource::Synthetic(spec) = &cfg.dataset else { panic!() };
        assert_eq!((spec.n_users, spec.n_items, spec.seed), (30, 300, 4));
        assert_eq!(cfg.backbone, BackboneKind::Mf);
        assert_eq!((cfg.train.dim, cfg.train.lr), (8, 0.001));
        assert_eq!(cfg.editors[0].method, Method::L2 { lambda: 10.0 });
        assert_eq!(cfg.editors[1].objective, EditObjective::Ebce);
        cfg.validate().unwrap();
        let csv = ExperimentConfig::from_json(r#"{"dataset": {"csv": {"path": "d.csv"}}}"#).unwrap();
        assert_eq!(csv.dataset, DatasetSource::Csv { path: "d.csv".into() });
    }

    #[test]
    fn rejects_unknown_fields_and_tags() {
        assert!(ExperimentConfig::from_json(r#"{"repeat": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"editors": [{"method": "memit"}]}"#).is_err());
        assert!(matches!(
            editors_from_tags("eft,rome", EditObjective::Ebpr),
            Err(BenchError::UnknownTag(t)) if t == "rome"
        ));
        let eds = editors_from_tags("eft, ft", EditObjective::Ebce).unwrap();
        assert_eq!(eds.iter().map(|e| e.label()).collect::<Vec<_>>(), ["eft,ebce", "ft,ebce"]);
    }

    #[test]
    fn validation() {
        for cfg in [
            ExperimentConfig { repeats: 0, ..Default::default() },
            ExperimentConfig { editors: vec![], ..Default::default() },
            ExperimentConfig { split_ratio: 1.0, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(BenchError::Config(_))));
        }
    }
}
