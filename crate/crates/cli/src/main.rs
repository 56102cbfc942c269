use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use recedit::backbone::Checkpoint;
use recedit::bench::{
    editors_from_tags, emit_report, load_source, prepare, run_experiment, BenchError, DatasetSource, ExperimentConfig,
    SplitFile,
};
use recedit::data::{build_editing_split, snapshot_topk, DataError};
use recedit::editing::{run_edit, EditObjective, EditorConfig};
use recedit::metrics::{evaluate, MetricReport};

const CONFIG_HELP: &str = "\
Config file (JSON, every field optional):
  dataset      {\"synthetic\": {n_users, n_items, d_true, pos_per_user, neg_per_user,
                               noise, adversarial_neg_fraction, seed}}
               or {\"csv\": {\"path\": \"feedback.csv\"}}  (user,item,feedback with pos/neg)
  k_core       integer or null
  split_ratio  0.8
  backbone     \"mf\" | \"lightgcn\"
  train        {dim, lr, batch_size, weight_decay, n_layers, max_epochs, patience, min_delta}
  editors      [{\"method\": ft|eft|lwf|l2|sriu|rsr|spmf, \"objective\": ebpr|ebce,
                 \"lambda\": .., \"n\": .., \"lr\": .., \"max_rounds\": .., \"batch_size\": ..}]
  k_edit 50, k_eval 20, n_explicit 10, repeats 10, seed 0, output_dir";

#[derive(Parser)]
#[command(name = "recedit", version, about = "Recommendation editing benchmark", after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Ebpr,
    Ebce,
}

impl From<ObjectiveArg> for EditObjective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Ebpr => EditObjective::Ebpr,
            ObjectiveArg::Ebce => EditObjective::Ebce,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EditorArgs {
    /// Comma-separated editor tags: ft, eft, lwf, l2, sriu, rsr, spmf.
    #[arg(long)]
    editors: Option<String>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(Common),
    /// Train a backbone; writes a checkpoint and an editing split.
    Train(Common),
    /// Run one editor against a checkpoint and split.
    Edit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        editor: EditorArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        split: PathBuf,
    },
    /// Run the full benchmark and write report files.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        editor: EditorArgs,
    },
    /// Recompute metrics from a pre-edit checkpoint, an edited checkpoint and a split.
    Metrics {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        edited: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A usage problem: bad flags, config or tags.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    Usage(e.to_string()).into()
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text).map_err(usage)?;
            if let DatasetSource::Csv { path: data } = &mut cfg.dataset {
                if data.is_relative() {
                    let base = path.parent().unwrap_or(Path::new("."));
                    *data = base.join(&*data);
                }
            }
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_editor_args(cfg: &mut ExperimentConfig, args: &EditorArgs) -> Result<()> {
    let objective = args.objective.map(EditObjective::from);
    match (&args.editors, objective) {
        (Some(tags), obj) => cfg.editors = editors_from_tags(tags, obj.unwrap_or_default()).map_err(usage)?,
        (None, Some(obj)) => cfg.editors.iter_mut().for_each(|e| e.objective = obj),
        (None, None) => {}
    }
    cfg.validate().map_err(|e| match e {
        BenchError::Config(_) | BenchError::UnknownTag(_) => usage(e),
        other => other.into(),
    })
}

fn out_dir(common: &Common, cfg: &ExperimentConfig, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(common: Common) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let (DatasetSource::Synthetic(spec), Some(seed)) = (&mut cfg.dataset, common.seed) {
        spec.seed = seed;
    }
    let DatasetSource::Synthetic(_) = &cfg.dataset else {
        return Err(usage("generate needs a synthetic dataset section"));
    };
    let dataset = load_source(&cfg.dataset).map_err(|e| match e {
        BenchError::Synthetic(e) => usage(e),
        other => other.into(),
    })?;
    let dir = out_dir(&common, &cfg, ".");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("dataset.csv");
    dataset.write_csv(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_train(common: Common) -> Result<()> {
    let cfg = load_config(&common)?;
    cfg.validate().map_err(usage)?;
    let cfg = cfg.resolved();
    let prep = prepare(&cfg)?;
    let split = build_editing_split(&prep.pre_snapshot, &prep.dataset, cfg.k_edit, cfg.n_explicit, cfg.seed)?;
    let checkpoint = Checkpoint::from_model(&prep.model, &cfg.train);
    let file = SplitFile::new(&checkpoint, &prep.data_split, &split, cfg.k_eval);

    let dir = out_dir(&common, &cfg, ".");
    std::fs::create_dir_all(&dir)?;
    checkpoint.write(&dir.join("checkpoint.json"))?;
    file.write(&dir.join("editing_split.json"))?;
    prep.dataset.ids().write_json(&dir.join("ids.json"))?;
    write_json(&dir.join("train_report.json"), &prep.training)?;
    println!("{}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct EditReport<'a> {
    editor: &'a EditorConfig,
    rounds: usize,
    converged: bool,
    wall_time_s: f64,
    final_ranks: &'a [usize],
    propagation_calls: usize,
    metrics: MetricReport,
}

fn cmd_edit(common: Common, editor: EditorArgs, checkpoint: PathBuf, split: PathBuf) -> Result<()> {
    let mut cfg = load_config(&common)?;
    apply_editor_args(&mut cfg, &editor)?;
    if cfg.editors.len() != 1 {
        return Err(usage("edit runs exactly one editor; pass a single tag to --editors"));
    }
    let mut editor = cfg.editors[0].clone();
    editor.seed = cfg.seed;

    let ck = Checkpoint::read(&checkpoint)?;
    let file = SplitFile::read(&split)?;
    let (model, split) = file.restore(&ck)?;
    let outcome = run_edit(&model, &split, &file.train_positives, &editor)?;
    let post = snapshot_topk(&outcome.model, file.k_edit.max(file.k_eval), file.train_mask())?;
    let metrics = evaluate(&split, &post, &file.test_by_user(), file.k_eval)?;

    let dir = out_dir(&common, &cfg, ".");
    std::fs::create_dir_all(&dir)?;
    Checkpoint::from_model(&outcome.model, &ck.config).write(&dir.join("edited_checkpoint.json"))?;
    let report = EditReport {
        editor: &editor,
        rounds: outcome.rounds,
        converged: outcome.converged,
        wall_time_s: outcome.wall_time_s,
        final_ranks: &outcome.final_ranks,
        propagation_calls: outcome.propagation_calls,
        metrics,
    };
    write_json(&dir.join("edit_report.json"), &report)?;
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

fn cmd_bench(common: Common, editor: EditorArgs) -> Result<()> {
    let mut cfg = load_config(&common)?;
    apply_editor_args(&mut cfg, &editor)?;
    let dir = out_dir(&common, &cfg, "report");
    match run_experiment(&cfg) {
        Ok(report) => {
            emit_report(&report, &dir)?;
            println!("{}", dir.display());
            Ok(())
        }
        Err(BenchError::Partial { report, source }) => {
            emit_report(&report, &dir)?;
            Err(anyhow::Error::from(*source).context(format!("partial results written to {}", dir.display())))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_metrics(checkpoint: PathBuf, edited: PathBuf, split: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let ck = Checkpoint::read(&checkpoint)?;
    let file = SplitFile::read(&split)?;
    let (_, split) = file.restore(&ck)?;
    let post_model = Checkpoint::read(&edited)?.to_model(&file.train_positives)?;
    let post = snapshot_topk(&post_model, file.k_edit.max(file.k_eval), file.train_mask()).map_err(|e| match e {
        DataError::InvalidArgument(_) => anyhow::anyhow!("edited checkpoint does not match the split: {e}"),
        other => other.into(),
    })?;
    let metrics = evaluate(&split, &post, &file.test_by_user(), file.k_eval)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join("metrics.json"), &metrics)?;
    }
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(common) => cmd_generate(common),
        Command::Train(common) => cmd_train(common),
        Command::Edit {
            common,
            editor,
            checkpoint,
            split,
        } => cmd_edit(common, editor, checkpoint, split),
        Command::Bench { common, editor } => cmd_bench(common, editor),
        Command::Metrics {
            checkpoint,
            edited,
            split,
            out,
        } => cmd_metrics(checkpoint, edited, split, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}\n\n{CONFIG_HELP}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
