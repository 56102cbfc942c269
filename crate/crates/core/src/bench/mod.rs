//! Experiment orchestration: data → backbone → repeated edits → reports.

mod config;
mod report;
mod split_file;

use thiserror::Error;

use crate::backbone::{train_model, BackboneError, ModelState, TrainReport};
use crate::data::{
    apply_k_core, build_editing_split, load_dataset, snapshot_topk, split_train_test, DataError, Dataset, RecSnapshot,
    TrainTestSplit, UserMask,
};
use crate::editing::{run_edit, EditError};
use crate::metrics::{accuracy, evaluate, MetricError};
use crate::synthetic::{generate, SyntheticError};

pub use config::{editors_from_tags, DatasetSource, ExperimentConfig};
pub use report::{
    emit_report, mean_std, read_report_json, report_csv, summarize, summary_csv, timing_csv, AggregateReport,
    DatasetSummary, RepeatRow, Stat, SummaryRow, METRIC_COLUMNS, REPORT_FILES, REPORT_SCHEMA_VERSION,
};
pub use split_file::{SplitFile, SPLIT_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown editor tag `{0}`")]
    UnknownTag(String),
    #[error("SplitModelMismatch: split was built against checkpoint {expected}, but the given checkpoint hashes to {found}")]
    SplitModelMismatch { expected: String, found: String },
    #[error("run aborted after {} rows: {source}", report.rows.len())]
    Partial {
        report: Box<AggregateReport>,
        source: Box<BenchError>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// The trained backbone and everything derived from it before editing.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub data_split: TrainTestSplit,
    pub model: ModelState,
    pub training: TrainReport,
    pub mask: UserMask,
    pub test_by_user: Vec<Vec<usize>>,
    pub pre_snapshot: RecSnapshot,
}

pub fn load_source(source: &DatasetSource) -> Result<Dataset, BenchError> {
    Ok(match source {
        DatasetSource::Synthetic(spec) => generate(spec)?,
        DatasetSource::Csv { path } => load_dataset(path)?,
    })
}

/// Loads, filters, splits and trains according to a resolved config.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, BenchError> {
    let mut dataset = load_source(&cfg.dataset)?;
    if let Some(k) = cfg.k_core {
        dataset = apply_k_core(&dataset, k)?;
    }
    let data_split = split_train_test(&dataset, cfg.split_ratio, cfg.seed)?;
    let (model, training) = train_model(
        cfg.backbone,
        dataset.n_users(),
        dataset.n_items(),
        &data_split.train_positives,
        &cfg.train,
    )?;
    let mask = UserMask::new(data_split.train_by_user(dataset.n_users()));
    let test_by_user = data_split.test_by_user(dataset.n_users());
    let pre_snapshot = snapshot_topk(&model, cfg.snapshot_k(), mask.clone())?;
    Ok(Prepared {
        dataset,
        data_split,
        model,
        training,
        mask,
        test_by_user,
        pre_snapshot,
    })
}

fn edit_rows(cfg: &ExperimentConfig, prep: &Prepared, rows: &mut Vec<RepeatRow>) -> Result<(), BenchError> {
    for repeat in 0..cfg.repeats {
        let split_seed = cfg.seed.wrapping_add(repeat as u64);
        let split = build_editing_split(&prep.pre_snapshot, &prep.dataset, cfg.k_edit, cfg.n_explicit, split_seed)?;
        for editor in &cfg.editors {
            let mut editor = editor.clone();
            editor.seed = split_seed;
            let outcome = run_edit(&prep.model, &split, &prep.data_split.train_positives, &editor)?;
            let post = snapshot_topk(&outcome.model, cfg.snapshot_k(), prep.mask.clone())?;
            let metrics = evaluate(&split, &post, &prep.test_by_user, cfg.k_eval)?;
            rows.push(RepeatRow {
                editor: editor.method.tag().to_string(),
                objective: editor.objective.tag().to_string(),
                repeat,
                split_seed,
                metrics,
                rounds: outcome.rounds,
                converged: outcome.converged,
                wall_time_s: outcome.wall_time_s,
            });
        }
    }
    Ok(())
}

/// Trains once, then runs every editor on every repeat against copies of that model.
///
/// A failure after training returns [`BenchError::Partial`] carrying the rows
/// finished so far.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateReport, BenchError> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let prep = prepare(&cfg)?;
    let pre_edit = accuracy(&prep.pre_snapshot, &prep.test_by_user, cfg.k_edit, cfg.k_eval)?;
    let mut report = AggregateReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: DatasetSummary {
            n_users: prep.dataset.n_users(),
            n_items: prep.dataset.n_items(),
            n_positives: prep.dataset.positives().len(),
            n_negatives: prep.dataset.negatives().len(),
            n_train: prep.data_split.train_positives.len(),
            n_test: prep.data_split.test_positives.len(),
        },
        config: cfg.clone(),
        training: prep.training.clone(),
        pre_edit,
        rows: Vec::new(),
        summary: Vec::new(),
        partial: None,
    };
    let result = edit_rows(&cfg, &prep, &mut report.rows);
    report.summary = summarize(&report.rows);
    match result {
        Ok(()) => Ok(report),
        Err(e) => {
            report.partial = Some(e.to_string());
            Err(BenchError::Partial {
                report: Box::new(report),
                source: Box::new(e),
            })
        }
    }
}

#[cfg(test)]
mod tests;
