use super::*;
use crate::backbone::{BackboneKind, Checkpoint, TrainConfig};
use crate::editing::{EditObjective, EditorConfig, Method};
use crate::synthetic::SyntheticSpec;

fn tiny() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Synthetic(SyntheticSpec {
            n_users: 40,
            n_items: 60,
            d_true: 4,
            pos_per_user: 8,
            neg_per_user: 4,
            ..SyntheticSpec::default()
        }),
        backbone: BackboneKind::LightGcn,
        train: TrainConfig {
            dim: 8,
            lr: 0.01,
            batch_size: 64,
            max_epochs: 30,
            ..TrainConfig::default()
        },
        k_edit: 10,
        k_eval: 5,
        n_explicit: 3,
        repeats: 2,
        ..ExperimentConfig::default()
    }
}

#[test]
fn default_editors_give_two_summary_rows() {
    let report = run_experiment(&tiny()).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert_eq!(report.summary.len(), 2);
    assert_eq!(
        report.summary.iter().map(|s| (s.editor.as_str(), s.objective.as_str())).collect::<Vec<_>>(),
        [("eft", "ebpr"), ("ft", "ebpr")]
    );
    // six metrics, rounds and time per editor row
    for s in &report.summary {
        let names: Vec<&str> = s.stats().iter().map(|(n, _)| *n).collect();
        for want in ["ea", "ec", "ep", "es", "recall", "ndcg", "rounds", "wall_time_s"] {
            assert!(names.contains(&want));
        }
    }
    assert_eq!(report.config.train.seed, report.config.seed);
    assert!(report.partial.is_none());
}

#[test]
fn single_repeat_has_zero_std() {
    let cfg = ExperimentConfig { repeats: 1, ..tiny() };
    let report = run_experiment(&cfg).unwrap();
    for s in &report.summary {
        assert!(s.stats().iter().all(|(_, st)| st.std == 0.0));
    }
}

#[test]
fn report_files_are_deterministic_and_consistent() {
    let cfg = ExperimentConfig {
        editors: vec![
            EditorConfig::new(Method::Eft, EditObjective::Ebpr),
            EditorConfig::new(Method::Rsr { n: 20 }, EditObjective::Ebce),
            EditorConfig::new(Method::Lwf { lambda: 0.5 }, EditObjective::Ebpr),
        ],
        repeats: 3,
        ..tiny()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_experiment(&cfg).unwrap();
    emit_report(&first, a.path()).unwrap();
    emit_report(&run_experiment(&cfg).unwrap(), b.path()).unwrap();
    for name in REPORT_FILES {
        assert!(a.path().join(name).exists(), "{name}");
    }
    let bytes = |dir: &tempfile::TempDir, name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(bytes(&a, "report.csv"), bytes(&b, "report.csv"));

    // JSON round trip
    assert_eq!(read_report_json(&a.path().join("report.json")).unwrap(), first);

    // timing rows = editors × repeats
    let timing = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(a.path().join("timing.csv"))
        .unwrap()
        .into_records()
        .count();
    assert_eq!(timing, 9);

    // summary recomputed from report.csv + timing.csv matches
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(a.path().join("report.csv"))
        .unwrap();
    let head = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let mut srdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(a.path().join("summary.csv"))
        .unwrap();
    let shead = srdr.headers().unwrap().clone();
    for srow in srdr.records().map(|r| r.unwrap()) {
        let mine: Vec<&csv::StringRecord> = rows.iter().filter(|r| r[0] == srow[0] && r[1] == srow[1]).collect();
        assert_eq!(mine.len(), 3);
        for col in METRIC_COLUMNS.iter().chain(&["rounds"]) {
            let idx = head.iter().position(|h| h == *col).unwrap();
            let xs: Vec<f64> = mine.iter().map(|r| r[idx].parse().unwrap()).collect();
            let st = mean_std(&xs);
            let m = shead.iter().position(|h| h == format!("{col}_mean")).unwrap();
            let s = shead.iter().position(|h| h == format!("{col}_std")).unwrap();
            assert_eq!(srow[m].parse::<f64>().unwrap(), st.mean, "{col}");
            assert_eq!(srow[s].parse::<f64>().unwrap(), st.std, "{col}");
        }
    }
}

#[test]
fn partial_results_survive_a_failure() {
    // replay size larger than the training set fails on the second editor
    let cfg = ExperimentConfig {
        editors: vec![
            EditorConfig::new(Method::Eft, EditObjective::Ebpr),
            EditorConfig::new(Method::Rsr { n: 100_000 }, EditObjective::Ebpr),
        ],
        ..tiny()
    };
    match run_experiment(&cfg) {
        Err(BenchError::Partial { report, source }) => {
            assert_eq!(report.rows.len(), 1);
            assert!(report.partial.is_some());
            assert!(matches!(*source, BenchError::Edit(_)));
            let dir = tempfile::tempdir().unwrap();
            emit_report(&report, dir.path()).unwrap();
            let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
            assert!(text.contains("# partial"));
        }
        other => panic!("expected partial failure, got {other:?}"),
    }
}

#[test]
fn split_file_detects_foreign_checkpoint() {
    let cfg = tiny().resolved();
    let prep = prepare(&cfg).unwrap();
    let split = build_editing_split(&prep.pre_snapshot, &prep.dataset, cfg.k_edit, cfg.n_explicit, 0).unwrap();
    let ck = Checkpoint::from_model(&prep.model, &cfg.train);
    let file = SplitFile::new(&ck, &prep.data_split, &split, cfg.k_eval);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split.json");
    file.write(&path).unwrap();
    let back = SplitFile::read(&path).unwrap();
    assert_eq!(back, file);
    let (model, restored) = back.restore(&ck).unwrap();
    assert_eq!(model.output(), prep.model.output());
    assert_eq!(restored.explicit, split.explicit);

    let other_cfg = TrainConfig { seed: 99, ..cfg.train.clone() };
    let (other, _) = train_model(
        cfg.backbone,
        prep.dataset.n_users(),
        prep.dataset.n_items(),
        &prep.data_split.train_positives,
        &other_cfg,
    )
    .unwrap();
    let foreign = Checkpoint::from_model(&other, &other_cfg);
    assert!(matches!(back.restore(&foreign), Err(BenchError::SplitModelMismatch { .. })));
}
