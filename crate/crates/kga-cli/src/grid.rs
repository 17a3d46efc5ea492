//! The binning-variant ablation grid: every configured variant code times
//! every configured bin count, one self-contained experiment per cell.
//!
//! Cells are plain pipeline runs (`bin` -> `augment` -> `train` -> `eval`)
//! into `<out_dir>/grid/<CODE>-<bins>/`, so any cell can be reproduced
//! standalone by running those subcommands with the cell's settings. A
//! finished cell is recognized by its eval report and skipped on rerun,
//! which makes an interrupted grid resumable at no recomputation cost;
//! a failed cell is recorded in the results and the grid moves on.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kga::eval::EvalReport;
use kga::{Error, Result};
use serde::Serialize;

use crate::config::GridVariant;
use crate::pipeline::{cmd_augment, cmd_bin, cmd_eval, cmd_train, Ctx};

#[derive(Serialize)]
struct GridRow {
    cell: String,
    variant: String,
    bins: usize,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    mrr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hits1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hits10: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_triples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl GridRow {
    fn ok(cell: String, variant: &GridVariant, bins: usize, report: &EvalReport) -> GridRow {
        GridRow {
            cell,
            variant: variant.code(),
            bins,
            status: "ok".to_string(),
            mrr: Some(report.mrr),
            hits1: Some(report.hits1),
            hits10: Some(report.hits10),
            n_triples: Some(report.n_triples),
            error: None,
        }
    }

    fn failed(cell: String, variant: &GridVariant, bins: usize, err: &Error) -> GridRow {
        GridRow {
            cell,
            variant: variant.code(),
            bins,
            status: "error".to_string(),
            mrr: None,
            hits1: None,
            hits10: None,
            n_triples: None,
            error: Some(err.to_string()),
        }
    }
}

fn run_cell(ctx: &Ctx, variant: &GridVariant, bins: usize, cell_dir: &Path) -> Result<EvalReport> {
    let mut cfg = ctx.cfg.clone();
    cfg.out_dir = cell_dir.to_path_buf();
    cfg.bins_file = None; // each cell owns its dictionary
    cfg.strategy = variant.method;
    cfg.levels = variant.structure;
    cfg.chaining = variant.chaining;
    cfg.bins = bins;

    cmd_bin(&Ctx { cfg: cfg.clone(), threads: ctx.threads })?;
    cmd_augment(&Ctx { cfg: cfg.clone(), threads: ctx.threads })?;

    cfg.train = Some(cell_dir.join("augmented").join("train.tsv"));
    cfg.train_is_augmented = true;
    cmd_train(&Ctx { cfg: cfg.clone(), threads: ctx.threads })?;
    cmd_eval(&Ctx { cfg, threads: ctx.threads }, None, None)
}

/// The MRR matrix as an aligned table, variants down, bin counts across —
/// the same layout the results JSON flattens.
fn render_matrix(rows: &[GridRow], variants: &[GridVariant], bin_counts: &[usize]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<10}", "variant");
    for b in bin_counts {
        let _ = write!(s, " {b:>10}");
    }
    s.push('\n');
    for v in variants {
        let _ = write!(s, "{:<10}", v.code());
        for b in bin_counts {
            let row = rows
                .iter()
                .find(|r| r.variant == v.code() && r.bins == *b)
                .expect("every cell has a row");
            match row.mrr {
                Some(mrr) => {
                    let _ = write!(s, " {mrr:>10.4}");
                }
                None => {
                    let _ = write!(s, " {:>10}", "error");
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn cmd_grid(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    if cfg.train_is_augmented {
        return Err(Error::config(
            "`grid` augments raw training data itself; unset train_is_augmented".to_string(),
        ));
    }

    let mut rows = Vec::new();
    for variant in &cfg.grid_variants {
        for &bins in &cfg.grid_bins {
            let cell = format!("{}-{bins}", variant.code());
            let cell_dir = cfg.out_dir.join("grid").join(&cell);
            let report_path = cell_dir.join("reports").join("eval.json");

            if report_path.exists() {
                let text = fs::read_to_string(&report_path)
                    .map_err(|e| Error::io(&report_path, e))?;
                let report: EvalReport = serde_json::from_str(&text)
                    .map_err(|e| Error::data(format!("{}: {e}", report_path.display())))?;
                println!("cell {cell}: already complete, skipping");
                rows.push(GridRow::ok(cell, variant, bins, &report));
                continue;
            }

            println!("=== cell {cell} ===");
            match run_cell(ctx, variant, bins, &cell_dir) {
                Ok(report) => rows.push(GridRow::ok(cell, variant, bins, &report)),
                Err(err) => {
                    log::warn!("cell {cell} failed: {err}");
                    rows.push(GridRow::failed(cell, variant, bins, &err));
                }
            }
        }
    }

    let dir = cfg.out_dir.join("reports");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let json = serde_json::to_string_pretty(&rows).expect("grid serialize");
    fs::write(dir.join("grid.json"), format!("{json}\n"))
        .map_err(|e| Error::io(dir.join("grid.json"), e))?;
    let matrix = render_matrix(&rows, &cfg.grid_variants, &cfg.grid_bins);
    fs::write(dir.join("grid.txt"), &matrix).map_err(|e| Error::io(dir.join("grid.txt"), e))?;
    print!("{matrix}");

    let failures = rows.iter().filter(|r| r.status == "error").count();
    if failures > 0 {
        println!("{failures} of {} cells failed; see reports/grid.json", rows.len());
    }

    // The grid manifest reflects the outer config; each cell wrote its own.
    crate::pipeline::write_manifest(cfg)
}
