//! kga — a pipeline for knowledge-graph embedding experiments with
//! discretized numeric literals: build bin dictionaries, augment the graph
//! with bin entities, train TransE/DistMult/ComplEx, evaluate link
//! prediction and numeric prediction, and sweep the binning-variant grid.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 training divergence.

mod config;
mod grid;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kga::{Error, Result};

use config::ExperimentConfig;
use pipeline::Ctx;

#[derive(Parser)]
#[command(
    name = "kga",
    version,
    about = "Knowledge graph augmentation: bin numeric literals, train embeddings, evaluate",
    after_long_help = config::KEY_HELP,
    arg_required_else_help = true
)]
struct Cli {
    /// Config file of key=value lines ('#' comments); see --help for keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Set any config key, e.g. --set l2=1e-5. Repeatable.
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(flatten)]
    flags: Flags,

    #[command(subcommand)]
    cmd: Cmd,
}

/// Dedicated flags for the common keys. Each one simply overrides its
/// config key, after the config file and --set pairs are applied.
#[derive(Args)]
struct Flags {
    /// Training entity triples (TSV: subject, relation, object).
    #[arg(long, global = true, help_heading = "Dataset", value_name = "TSV")]
    train: Option<PathBuf>,
    /// Validation entity triples.
    #[arg(long, global = true, help_heading = "Dataset", value_name = "TSV")]
    valid: Option<PathBuf>,
    /// Test entity triples.
    #[arg(long, global = true, help_heading = "Dataset", value_name = "TSV")]
    test: Option<PathBuf>,
    /// Training numeric triples (TSV: entity, attribute, value).
    #[arg(long, global = true, help_heading = "Dataset", value_name = "TSV")]
    numeric_train: Option<PathBuf>,
    /// Validation numeric triples.
    #[arg(long, global = true, help_heading = "Dataset", value_name = "TSV")]
    numeric_valid: Option<PathBuf>,
    /// Held-out numeric triples for value-prediction MAE.
    #[arg(long, global = true, help_heading = "Dataset", value_name = "TSV")]
    numeric_test: Option<PathBuf>,
    /// The train TSV was written by `kga augment`.
    #[arg(long, global = true, help_heading = "Dataset")]
    augmented_train: bool,

    /// Binning method: fixed | quantile.
    #[arg(long, global = true, help_heading = "Binning", value_name = "METHOD")]
    strategy: Option<String>,
    /// Bin structure: single | overlapping | hierarchy.
    #[arg(long, global = true, help_heading = "Binning", value_name = "STRUCTURE")]
    levels: Option<String>,
    /// Bin count (hierarchy: leaf count, rounded down to a branching power).
    #[arg(long, global = true, help_heading = "Binning")]
    bins: Option<usize>,
    /// Link adjacent bins with kga:next edges.
    #[arg(long, global = true, help_heading = "Binning", conflicts_with = "no_chaining")]
    chaining: bool,
    /// Disable kga:next edges.
    #[arg(long, global = true, help_heading = "Binning")]
    no_chaining: bool,
    /// Which literal kinds to bin: all | quantity | year.
    #[arg(long, global = true, help_heading = "Binning", value_name = "KINDS")]
    literals: Option<String>,

    /// Embedding model: transe | distmult | complex.
    #[arg(long, global = true, help_heading = "Model", value_name = "MODEL")]
    model: Option<String>,
    /// Embedding dimension.
    #[arg(long, global = true, help_heading = "Model")]
    dim: Option<usize>,
    /// Training epochs.
    #[arg(long, global = true, help_heading = "Training")]
    epochs: Option<usize>,
    /// SGD step size.
    #[arg(long, global = true, help_heading = "Training", value_name = "LR")]
    learning_rate: Option<f64>,
    /// Triples per parameter update.
    #[arg(long, global = true, help_heading = "Training")]
    batch_size: Option<usize>,
    /// RNG seed for init, negative sampling, and shuffling.
    #[arg(long, global = true, help_heading = "Training")]
    seed: Option<u64>,
    /// Checkpoint cadence in epochs (0 = final epoch only).
    #[arg(long, global = true, help_heading = "Training", value_name = "N")]
    checkpoint_every: Option<usize>,

    /// Ranking mode: filtered | unfiltered | sampled.
    #[arg(long, global = true, help_heading = "Evaluation", value_name = "MODE")]
    eval_mode: Option<String>,
    /// Corruption count for sampled mode.
    #[arg(long = "sampled-C", global = true, help_heading = "Evaluation", value_name = "C")]
    sampled_c: Option<usize>,

    /// Where bins/, augmented/, checkpoints/, and reports/ are written.
    #[arg(long, global = true, help_heading = "Output", value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build bin dictionaries from training numeric triples.
    Bin,
    /// Rewrite numeric triples as bin assignments plus structural edges.
    Augment,
    /// Train an embedding model, tracking validation MRR per checkpoint.
    Train,
    /// Rank held-out triples; report MRR/Hits and numeric-prediction MAE.
    Eval(EvalArgs),
    /// Run every binning variant x bin count as its own experiment.
    Grid,
    /// Print dataset statistics as JSON.
    Stats,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate; default: the best one recorded by `train`.
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Earlier eval report (JSON) to show side by side with this one.
    #[arg(long, value_name = "FILE")]
    compare: Option<PathBuf>,
}

/// Merge precedence: defaults, then the config file, then --set pairs in
/// order, then dedicated flags.
fn merge_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for pair in &cli.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            Error::config(format!("--set expects KEY=VALUE, got {pair:?}"))
        })?;
        cfg.apply(key.trim(), value.trim())?;
    }

    let f = &cli.flags;
    let path_str = |p: &PathBuf| p.display().to_string();
    let mut sets: Vec<(&str, String)> = Vec::new();
    if let Some(p) = &f.train {
        sets.push(("train", path_str(p)));
    }
    if let Some(p) = &f.valid {
        sets.push(("valid", path_str(p)));
    }
    if let Some(p) = &f.test {
        sets.push(("test", path_str(p)));
    }
    if let Some(p) = &f.numeric_train {
        sets.push(("numeric_train", path_str(p)));
    }
    if let Some(p) = &f.numeric_valid {
        sets.push(("numeric_valid", path_str(p)));
    }
    if let Some(p) = &f.numeric_test {
        sets.push(("numeric_test", path_str(p)));
    }
    if f.augmented_train {
        sets.push(("train_is_augmented", "true".to_string()));
    }
    if let Some(v) = &f.strategy {
        sets.push(("strategy", v.clone()));
    }
    if let Some(v) = &f.levels {
        sets.push(("levels", v.clone()));
    }
    if let Some(v) = f.bins {
        sets.push(("bins", v.to_string()));
    }
    if f.chaining {
        sets.push(("chaining", "true".to_string()));
    }
    if f.no_chaining {
        sets.push(("chaining", "false".to_string()));
    }
    if let Some(v) = &f.literals {
        sets.push(("literals", v.clone()));
    }
    if let Some(v) = &f.model {
        sets.push(("model", v.clone()));
    }
    if let Some(v) = f.dim {
        sets.push(("dim", v.to_string()));
    }
    if let Some(v) = f.epochs {
        sets.push(("epochs", v.to_string()));
    }
    if let Some(v) = f.learning_rate {
        sets.push(("learning_rate", v.to_string()));
    }
    if let Some(v) = f.batch_size {
        sets.push(("batch_size", v.to_string()));
    }
    if let Some(v) = f.seed {
        sets.push(("seed", v.to_string()));
    }
    if let Some(v) = f.checkpoint_every {
        sets.push(("checkpoint_every", v.to_string()));
    }
    if let Some(v) = &f.eval_mode {
        sets.push(("eval_mode", v.clone()));
    }
    if let Some(v) = f.sampled_c {
        sets.push(("sampled_c", v.to_string()));
    }
    if let Some(p) = &f.out_dir {
        sets.push(("out_dir", path_str(p)));
    }
    for (key, value) in sets {
        cfg.apply(key, &value)?;
    }
    Ok(cfg)
}

/// Worker threads for training, from KGA_THREADS — the only environment
/// variable the tool reads. Unset means 1, which is also the mode whose
/// reruns are byte-for-byte reproducible.
fn thread_count() -> Result<usize> {
    match std::env::var("KGA_THREADS") {
        Ok(s) => match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::config(format!(
                "KGA_THREADS must be a positive integer, got {s:?}"
            ))),
        },
        Err(_) => Ok(1),
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx { cfg: merge_config(&cli)?, threads: thread_count()? };
    match &cli.cmd {
        Cmd::Bin => pipeline::cmd_bin(&ctx).map(|_| ()),
        Cmd::Augment => pipeline::cmd_augment(&ctx),
        Cmd::Train => pipeline::cmd_train(&ctx),
        Cmd::Eval(args) => pipeline::cmd_eval(
            &ctx,
            args.checkpoint.as_deref(),
            args.compare.as_deref(),
        )
        .map(|_| ()),
        Cmd::Grid => grid::cmd_grid(&ctx),
        Cmd::Stats => pipeline::cmd_stats(&ctx),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Divergence { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_timestamp(None)
        .format_target(false)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is
            // a usage error and must exit 1.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
