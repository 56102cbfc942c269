use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::TrainReport;
use crate::io::write_atomic;
use crate::metrics::{AccuracyReport, MetricReport};

use super::{BenchError, ExperimentConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One editor on one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRow {
    pub editor: String,
    pub objective: String,
    pub repeat: usize,
    pub split_seed: u64,
    pub metrics: MetricReport,
    pub rounds: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Mean and population std, with the mean clamped to the sample range.
pub fn mean_std(xs: &[f64]) -> Stat {
    let n = xs.len() as f64;
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (xs.iter().sum::<f64>() / n).clamp(min, max);
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Stat { mean, std: var.sqrt() }
}

/// Column names shared by `report.csv` and `summary.csv`.
pub const METRIC_COLUMNS: [&str; 8] = [
    "ea",
    "ec",
    "ep",
    "es",
    "recall",
    "ndcg",
    "recall_at_k_edit",
    "ndcg_at_k_edit",
];

fn metric_values(m: &MetricReport) -> [f64; 8] {
    [
        m.ea,
        m.ec,
        m.ep,
        m.es,
        m.recall,
        m.ndcg,
        m.recall_at_k_edit,
        m.ndcg_at_k_edit,
    ]
}

/// Mean ± std of every reported quantity for one (editor, objective).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub editor: String,
    pub objective: String,
    pub repeats: usize,
    pub ea: Stat,
    pub ec: Stat,
    pub ep: Stat,
    pub es: Stat,
    pub recall: Stat,
    pub ndcg: Stat,
    pub recall_at_k_edit: Stat,
    pub ndcg_at_k_edit: Stat,
    pub rounds: Stat,
    pub wall_time_s: Stat,
}

impl SummaryRow {
    /// Aggregates rows that all belong to one (editor, objective).
    pub fn from_rows(rows: &[&RepeatRow]) -> Self {
        let col = |f: &dyn Fn(&RepeatRow) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        let metric = |i: usize| col(&|r: &RepeatRow| metric_values(&r.metrics)[i]);
        Self {
            editor: rows[0].editor.clone(),
            objective: rows[0].objective.clone(),
            repeats: rows.len(),
            ea: metric(0),
            ec: metric(1),
            ep: metric(2),
            es: metric(3),
            recall: metric(4),
            ndcg: metric(5),
            recall_at_k_edit: metric(6),
            ndcg_at_k_edit: metric(7),
            rounds: col(&|r: &RepeatRow| r.rounds as f64),
            wall_time_s: col(&|r: &RepeatRow| r.wall_time_s),
        }
    }

    pub fn stats(&self) -> [(&'static str, Stat); 10] {
        [
            ("ea", self.ea),
            ("ec", self.ec),
            ("ep", self.ep),
            ("es", self.es),
            ("recall", self.recall),
            ("ndcg", self.ndcg),
            ("recall_at_k_edit", self.recall_at_k_edit),
            ("ndcg_at_k_edit", self.ndcg_at_k_edit),
            ("rounds", self.rounds),
            ("wall_time_s", self.wall_time_s),
        ]
    }
}

/// Per-editor summaries in first-appearance order.
pub fn summarize(rows: &[RepeatRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let key = (r.editor.as_str(), r.objective.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(e, o)| {
            let group: Vec<&RepeatRow> = rows.iter().filter(|r| r.editor == e && r.objective == o).collect();
            SummaryRow::from_rows(&group)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_users: usize,
    pub n_items: usize,
    pub n_positives: usize,
    pub n_negatives: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Full benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub training: TrainReport,
    pub pre_edit: AccuracyReport,
    pub rows: Vec<RepeatRow>,
    pub summary: Vec<SummaryRow>,
    /// Set when the run aborted; `rows` then holds what finished.
    pub partial: Option<String>,
}

pub const REPORT_FILES: [&str; 4] = ["report.csv", "summary.csv", "report.json", "timing.csv"];

fn header(out: &mut String, note: Option<&str>) {
    writeln!(out, "# schema_version={REPORT_SCHEMA_VERSION}").unwrap();
    if let Some(note) = note {
        writeln!(out, "# {note}").unwrap();
    }
}

fn to_csv(preamble: String, records: Vec<Vec<String>>) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(preamble.into_bytes());
    for rec in records {
        w.write_record(rec)?;
    }
    w.into_inner().map_err(|e| BenchError::Io(e.into_error()))
}

/// `report.csv`: one row per editor and repeat. Wall time lives in `timing.csv`.
pub fn report_csv(report: &AggregateReport) -> Result<Vec<u8>, BenchError> {
    let mut pre = String::new();
    header(&mut pre, report.partial.as_deref().map(|_| "partial"));
    let mut records = vec![["editor", "objective", "repeat", "split_seed"]
        .into_iter()
        .chain(METRIC_COLUMNS)
        .chain(["rounds", "converged"])
        .map(String::from)
        .collect()];
    for r in &report.rows {
        let mut rec = vec![
            r.editor.clone(),
            r.objective.clone(),
            r.repeat.to_string(),
            r.split_seed.to_string(),
        ];
        rec.extend(metric_values(&r.metrics).iter().map(|v| v.to_string()));
        rec.push(r.rounds.to_string());
        rec.push(r.converged.to_string());
        records.push(rec);
    }
    to_csv(pre, records)
}

pub fn timing_csv(report: &AggregateReport) -> Result<Vec<u8>, BenchError> {
    let mut pre = String::new();
    header(&mut pre, None);
    let mut records = vec![["editor", "objective", "repeat", "rounds", "wall_time_s"]
        .map(String::from)
        .to_vec()];
    for r in &report.rows {
        records.push(vec![
            r.editor.clone(),
            r.objective.clone(),
            r.repeat.to_string(),
            r.rounds.to_string(),
            r.wall_time_s.to_string(),
        ]);
    }
    to_csv(pre, records)
}

pub fn summary_csv(report: &AggregateReport) -> Result<Vec<u8>, BenchError> {
    let mut pre = String::new();
    header(&mut pre, Some("std is the population standard deviation over repeats"));
    let mut head: Vec<String> = ["editor", "objective", "repeats"].map(String::from).to_vec();
    if let Some(first) = report.summary.first() {
        for (name, _) in first.stats() {
            head.push(format!("{name}_mean"));
            head.push(format!("{name}_std"));
        }
    }
    let mut records = vec![head];
    for s in &report.summary {
        let mut rec = vec![s.editor.clone(), s.objective.clone(), s.repeats.to_string()];
        for (_, st) in s.stats() {
            rec.push(st.mean.to_string());
            rec.push(st.std.to_string());
        }
        records.push(rec);
    }
    to_csv(pre, records)
}

/// Writes the four report files into `dir`, each atomically.
pub fn emit_report(report: &AggregateReport, dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_vec_pretty(report).map_err(|e| BenchError::Config(e.to_string()))?;
    let files = [
        ("report.csv", report_csv(report)?),
        ("summary.csv", summary_csv(report)?),
        ("report.json", json),
        ("timing.csv", timing_csv(report)?),
    ];
    for (name, bytes) in files {
        write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<AggregateReport, BenchError> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| BenchError::Config(e.to_string()))
}
