//! Subcommand bodies. Each command is a pure function of (config, input
//! files, seed): identical reruns produce byte-identical artifacts in
//! single-threaded mode, which is what makes experiment directories
//! diffable and the grid resumable.

use std::fs;
use std::path::{Path, PathBuf};

use kga::augment::{augment, NEXT_RELATION, PARENT_RELATION};
use kga::discretize::BinSet;
use kga::embed::{init_embeddings, load_checkpoint, save_checkpoint, vocab_hash, Trainer};
use kga::eval::{
    evaluate_numeric, original_candidates, EntityRanker, EvalMode, EvalReport, RankingResult,
};
use kga::graph::{graph_stats, write_entity_triples, DatasetSplit, KnowledgeGraph, LoadReport};
use kga::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// A resolved invocation: the merged config plus the worker-thread count
/// from the environment.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub threads: usize,
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Top-level run manifest: enough to tell two experiment directories apart
/// (or confirm they came from the same config and binary) without any
/// timestamps that would break byte-for-byte reproducibility.
pub(crate) fn write_manifest(cfg: &ExperimentConfig) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    let manifest = serde_json::json!({
        "config_hash": cfg.config_hash(),
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialize");
    write_text(&cfg.out_dir.join("manifest.json"), &format!("{text}\n"))
}

fn warn_on_drops(report: &LoadReport) {
    for (name, log) in
        [("train", report.train), ("valid", report.valid), ("test", report.test)]
    {
        if log.duplicates > 0 {
            log::warn!("{name}: dropped {} duplicate triples", log.duplicates);
        }
        if log.unseen_dropped > 0 {
            log::warn!("{name}: dropped {} triples with out-of-vocabulary parts", log.unseen_dropped);
        }
        if log.value_dropped > 0 {
            log::warn!("{name}: dropped {} numeric triples with unusable values", log.value_dropped);
        }
    }
    if report.cross_split_dropped > 0 {
        log::warn!("dropped {} valid/test triples duplicating earlier splits", report.cross_split_dropped);
    }
}

fn load_bins(cfg: &ExperimentConfig) -> Result<Option<BinSet>> {
    let path = cfg.bins_path();
    if path.exists() {
        Ok(Some(BinSet::from_json(&read_text(&path)?)?))
    } else {
        Ok(None)
    }
}

/// Load the dataset and, when the train file is an augmented one, restore
/// what the TSV round trip loses: bin entities are re-marked synthetic (so
/// they never become ranking candidates), dictionary bins that never
/// appear in a triple are re-added, and the structural relations are
/// flagged. Training and evaluation both come through here, so the two
/// always agree on the vocabulary and hence the checkpoint hash.
fn load_split(cfg: &ExperimentConfig) -> Result<(DatasetSplit, Option<BinSet>)> {
    let (mut split, report) = DatasetSplit::load(&cfg.split_paths()?)?;
    warn_on_drops(&report);
    let bins = load_bins(cfg)?;
    if cfg.train_is_augmented {
        let Some(bins) = &bins else {
            return Err(Error::config(format!(
                "train_is_augmented is set but there is no bin dictionary at {} \
                 (run `kga bin`/`kga augment` first, or set bins_file)",
                cfg.bins_path().display()
            )));
        };
        let entities = &mut split.train.entities;
        for dict in bins.attributes.values() {
            for bin in &dict.bins {
                if !entities.mark_synthetic(&bin.name) {
                    entities.intern_synthetic(&bin.name)?;
                }
            }
        }
        split.train.relations.mark_synthetic(NEXT_RELATION);
        split.train.relations.mark_synthetic(PARENT_RELATION);
    }
    Ok((split, bins))
}

/// bin/augment read raw data; running them on an already-augmented file
/// would bin the assignment edges' source values a second time.
fn require_raw(cfg: &ExperimentConfig, cmd: &str) -> Result<()> {
    if cfg.train_is_augmented {
        return Err(Error::config(format!(
            "`{cmd}` reads raw training data; unset train_is_augmented"
        )));
    }
    Ok(())
}

fn retain_literals(graph: &mut KnowledgeGraph, cfg: &ExperimentConfig) {
    let before = graph.numeric_triples.len();
    graph.numeric_triples.retain(|t| cfg.literals.keeps(t.kind));
    let dropped = before - graph.numeric_triples.len();
    if dropped > 0 {
        println!("literals={}: ignoring {dropped} numeric triples of other kinds", cfg.literals);
    }
}

/// Build bin dictionaries from the training numeric triples and write them
/// to `<out_dir>/bins/bins.json`.
pub fn cmd_bin(ctx: &Ctx) -> Result<BinSet> {
    let cfg = &ctx.cfg;
    require_raw(cfg, "bin")?;
    let (split, report) = DatasetSplit::load(&cfg.split_paths()?)?;
    warn_on_drops(&report);
    let mut graph = split.train;
    retain_literals(&mut graph, cfg);

    let bins = BinSet::build(&graph, &cfg.bin_spec())?;
    let path = cfg.bins_path();
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    write_text(&path, &format!("{}\n", bins.to_json()))?;

    if bins.attributes.is_empty() {
        println!("no numeric attributes found; wrote an empty dictionary");
    }
    for (attr, dict) in &bins.attributes {
        // Occupancy over the finest disjoint level: leaves for hierarchy,
        // every bin otherwise.
        let finest = dict.level_range(dict.n_levels() - 1);
        let mut counts = vec![0usize; dict.n_bins()];
        for t in graph.numeric_triples.iter().filter(|t| graph.relations.resolve(t.attribute.0) == attr)
        {
            for g in dict.assign(t.value) {
                counts[g] += 1;
            }
        }
        let occ = &counts[finest.clone()];
        let (lo, hi) = (occ.iter().min().unwrap(), occ.iter().max().unwrap());
        println!(
            "{attr} ({}): {} {} bins over {} values ({} distinct), effective b={}, \
             occupancy {lo}..{hi}",
            dict.kind,
            dict.n_bins(),
            dict.structure,
            dict.n_values,
            dict.distinct,
            finest.len(),
        );
    }
    println!("wrote {}", path.display());
    write_manifest(cfg)?;
    Ok(bins)
}

#[derive(Serialize)]
struct AugmentManifest {
    original_entity_triples: usize,
    bin_entities: usize,
    assignment_triples: usize,
    duplicate_assignments: usize,
    chain_triples: usize,
    parent_triples: usize,
    total_entity_triples: usize,
}

/// Rewrite the training graph's numeric triples as bin assignments plus
/// structural edges, and write the result as a plain TSV that `train` and
/// `eval` can consume like any other dataset.
pub fn cmd_augment(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    require_raw(cfg, "augment")?;
    let (split, report) = DatasetSplit::load(&cfg.split_paths()?)?;
    warn_on_drops(&report);
    let mut graph = split.train;
    retain_literals(&mut graph, cfg);

    // Reuse a dictionary from an earlier `bin` run when present so the
    // pipeline stays two decoupled stages; build one in place otherwise.
    let bins = match load_bins(cfg)? {
        Some(bins) => bins,
        None => {
            let bins = BinSet::build(&graph, &cfg.bin_spec())?;
            let path = cfg.bins_path();
            if let Some(dir) = path.parent() {
                ensure_dir(dir)?;
            }
            write_text(&path, &format!("{}\n", bins.to_json()))?;
            bins
        }
    };

    let original = graph.entity_triples.len();
    let aug = augment(graph, &bins, cfg.chaining)?;

    let dir = cfg.out_dir.join("augmented");
    ensure_dir(&dir)?;
    write_entity_triples(
        &dir.join("train.tsv"),
        &aug.graph.entity_triples,
        &aug.graph.entities,
        &aug.graph.relations,
    )?;
    let manifest = AugmentManifest {
        original_entity_triples: original,
        bin_entities: aug.summary.bin_entities,
        assignment_triples: aug.summary.assignment_triples,
        duplicate_assignments: aug.summary.duplicate_assignments,
        chain_triples: aug.summary.chain_triples,
        parent_triples: aug.summary.parent_triples,
        total_entity_triples: aug.graph.entity_triples.len(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialize");
    write_text(&dir.join("manifest.json"), &format!("{text}\n"))?;

    println!(
        "augmented: {original} original + {} assignment + {} chain + {} parent triples \
         over {} bin entities -> {}",
        manifest.assignment_triples,
        manifest.chain_triples,
        manifest.parent_triples,
        manifest.bin_entities,
        dir.join("train.tsv").display(),
    );
    write_manifest(cfg)
}

#[derive(Serialize, Deserialize)]
struct EpochRecord {
    epoch: usize,
    loss: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    epoch: usize,
    file: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    valid_mrr: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrainingLog {
    epochs: Vec<EpochRecord>,
    checkpoints: Vec<CheckpointRecord>,
    /// Checkpoint with the highest validation MRR (earliest on ties), or
    /// simply the last one when there is no validation split.
    best: String,
}

/// Train the configured model, checkpointing on the configured cadence and
/// recording validation MRR per checkpoint so `eval` can pick the best.
pub fn cmd_train(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let (split, _) = load_split(cfg)?;
    let mc = cfg.model_config();
    let hash = vocab_hash(&split.train.entities, &split.train.relations);
    let model =
        init_embeddings(split.train.entities.len(), split.train.relations.len(), hash, &mc)?;
    let mut trainer = Trainer::new(model, &split.train.entity_triples);

    let dir = cfg.out_dir.join("checkpoints");
    ensure_dir(&dir)?;

    // Validation ranking reuses the evaluator with train+valid as the
    // filter set; the test split stays out of model selection.
    let valid_ctx = if split.valid.entity.is_empty() {
        None
    } else {
        let mut known = split.train.entity_triples.clone();
        known.extend_from_slice(&split.valid.entity);
        Some((original_candidates(&split.train.entities), known))
    };
    let valid_mrr_of = |trainer: &Trainer| {
        valid_ctx.as_ref().map(|(candidates, known)| {
            EntityRanker::new(&trainer.model, candidates.clone(), known.iter(), cfg.seed)
                .entity_lp_metrics(&split.valid.entity, EvalMode::Filtered)
                .mrr
        })
    };

    let mut log = TrainingLog { epochs: Vec::new(), checkpoints: Vec::new(), best: String::new() };
    let save = |trainer: &Trainer, epoch: usize, log: &mut TrainingLog| -> Result<()> {
        let file = format!("epoch_{epoch:04}.ckpt");
        save_checkpoint(&trainer.model, &dir.join(&file))?;
        let valid_mrr = valid_mrr_of(trainer);
        match valid_mrr {
            Some(mrr) => println!("epoch {epoch:>4}: checkpoint {file}, valid MRR {mrr:.4}"),
            None => println!("epoch {epoch:>4}: checkpoint {file}"),
        }
        log.checkpoints.push(CheckpointRecord { epoch, file, valid_mrr });
        Ok(())
    };

    if cfg.epochs == 0 {
        save(&trainer, 0, &mut log)?;
    }
    for epoch in 1..=cfg.epochs {
        let loss = trainer.epoch(&split.train.entity_triples, ctx.threads)?;
        log.epochs.push(EpochRecord { epoch, loss });
        let due = (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
            || epoch == cfg.epochs;
        if due {
            println!("epoch {epoch:>4}: mean loss {loss:.4}");
            save(&trainer, epoch, &mut log)?;
        }
    }

    let best = log
        .checkpoints
        .iter()
        .max_by(|a, b| {
            // max_by keeps the LAST maximum; compare epochs downward so the
            // earliest checkpoint wins MRR ties.
            let mrr = a.valid_mrr.unwrap_or(0.0).total_cmp(&b.valid_mrr.unwrap_or(0.0));
            mrr.then(b.epoch.cmp(&a.epoch))
        })
        .filter(|c| c.valid_mrr.is_some())
        .or_else(|| log.checkpoints.last())
        .expect("at least one checkpoint");
    log.best = best.file.clone();
    match best.valid_mrr {
        Some(mrr) => println!("best checkpoint: {} (valid MRR {mrr:.4})", log.best),
        None => println!("best checkpoint: {} (no validation split)", log.best),
    }

    let text = serde_json::to_string_pretty(&log).expect("log serialize");
    write_text(&dir.join("training.json"), &format!("{text}\n"))?;
    write_manifest(cfg)
}

/// The checkpoint `eval` uses when none is given explicitly: whatever
/// `train` marked as best in this output directory.
fn best_checkpoint(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.join("checkpoints");
    let log_path = dir.join("training.json");
    if !log_path.exists() {
        return Err(Error::config(format!(
            "no checkpoint given and no training log at {} (run `kga train` first \
             or pass --checkpoint)",
            log_path.display()
        )));
    }
    let log: TrainingLog = serde_json::from_str(&read_text(&log_path)?)
        .map_err(|e| Error::data(format!("{}: {e}", log_path.display())))?;
    Ok(dir.join(log.best))
}

fn render_comparison(current: &EvalReport, other: &EvalReport) -> String {
    use std::fmt::Write;
    let mut rows = vec![
        ("mrr".to_string(), current.mrr, other.mrr),
        ("hits1".to_string(), current.hits1, other.hits1),
        ("hits10".to_string(), current.hits10, other.hits10),
    ];
    for (attr, rep) in &current.numeric {
        if let Some(o) = other.numeric.get(attr) {
            rows.push((format!("mae[{attr}]"), rep.mae, o.mae));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:>12} {:>12} {:>12}", "metric", "current", "compare", "delta");
    for (name, a, b) in rows {
        let _ = writeln!(s, "{name:<14} {a:>12.4} {b:>12.4} {:>+12.4}", a - b);
    }
    let _ = writeln!(s, "{:<14} {:>12} {:>12}", "triples", current.n_triples, other.n_triples);
    s
}

/// Rank the held-out triples with the chosen checkpoint and, when a bin
/// dictionary is available, score numeric prediction against the median
/// baseline. Writes both the JSON and table renderings.
pub fn cmd_eval(
    ctx: &Ctx,
    checkpoint: Option<&Path>,
    compare: Option<&Path>,
) -> Result<EvalReport> {
    let cfg = &ctx.cfg;
    let (split, bins) = load_split(cfg)?;
    let ckpt = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => best_checkpoint(cfg)?,
    };
    let hash = vocab_hash(&split.train.entities, &split.train.relations);
    let model = load_checkpoint(&ckpt, Some(hash))?;

    if split.test.entity.is_empty() && split.test.numeric.is_empty() {
        return Err(Error::data(
            "nothing to evaluate: the test split has no entity or numeric triples \
             (set `test` and/or `numeric_test`)"
            .to_string(),
        ));
    }

    let mode = cfg.eval_mode();
    let ranking = if split.test.entity.is_empty() {
        RankingResult { mrr: 0.0, hits1: 0.0, hits10: 0.0, n_triples: 0 }
    } else {
        let mut known = split.train.entity_triples.clone();
        known.extend_from_slice(&split.valid.entity);
        known.extend_from_slice(&split.test.entity);
        let ranker = EntityRanker::new(
            &model,
            original_candidates(&split.train.entities),
            known.iter(),
            cfg.seed,
        );
        ranker.entity_lp_metrics(&split.test.entity, mode)
    };

    let numeric = match &bins {
        Some(bins) if !split.test.numeric.is_empty() => {
            let covered: Vec<_> = split
                .test
                .numeric
                .iter()
                .filter(|t| {
                    let attr = split.train.relations.resolve(t.attribute.0);
                    let has = bins.attributes.contains_key(attr);
                    if !has {
                        log::warn!("no bin dictionary for {attr:?}; skipping its numeric triples");
                    }
                    has
                })
                .copied()
                .collect();
            evaluate_numeric(
                &model,
                &split.train.entities,
                &split.train.relations,
                bins,
                &split.train.numeric_triples,
                &covered,
            )?
        }
        _ => Default::default(),
    };

    let report = EvalReport::new(mode, ranking, numeric);
    let dir = cfg.out_dir.join("reports");
    ensure_dir(&dir)?;
    write_text(&dir.join("eval.json"), &format!("{}\n", report.to_json()))?;
    write_text(&dir.join("eval.txt"), &report.to_table())?;
    print!("{}", report.to_table());

    if let Some(other_path) = compare {
        let other: EvalReport = serde_json::from_str(&read_text(other_path)?)
            .map_err(|e| Error::data(format!("{}: {e}", other_path.display())))?;
        let table = render_comparison(&report, &other);
        write_text(&dir.join("compare.txt"), &table)?;
        print!("{table}");
    }
    write_manifest(cfg)?;
    Ok(report)
}

/// Print dataset statistics as flat JSON. A read-only query: writes nothing.
pub fn cmd_stats(ctx: &Ctx) -> Result<()> {
    let (split, report) = DatasetSplit::load(&ctx.cfg.split_paths()?)?;
    warn_on_drops(&report);
    println!("{}", graph_stats(&split).to_json());
    Ok(())
}
