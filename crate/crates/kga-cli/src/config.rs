//! Experiment configuration: one flat key=value namespace shared by the
//! config file, repeated `--set` pairs, and the dedicated CLI flags.
//!
//! Precedence is defaults < config file < `--set` < dedicated flags, each
//! layer funnelling through [`ExperimentConfig::apply`] so every source is
//! validated the same way and unknown keys are rejected everywhere.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kga::discretize::{BinSpec, Method, Structure};
use kga::embed::{ModelConfig, ModelKind};
use kga::eval::EvalMode;
use kga::graph::{SplitPaths, ValueKind};
use kga::{Error, Result};
use sha2::{Digest, Sha256};

/// Which literal kinds binning and augmentation consider.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiteralFilter {
    All,
    Quantity,
    Year,
}

impl LiteralFilter {
    pub fn keeps(self, kind: ValueKind) -> bool {
        match self {
            LiteralFilter::All => true,
            LiteralFilter::Quantity => kind == ValueKind::Quantity,
            LiteralFilter::Year => kind == ValueKind::Year,
        }
    }
}

impl FromStr for LiteralFilter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(LiteralFilter::All),
            "quantity" => Ok(LiteralFilter::Quantity),
            "year" => Ok(LiteralFilter::Year),
            _ => Err(Error::config(format!(
                "unknown literal filter {s:?}, expected all|quantity|year"
            ))),
        }
    }
}

impl fmt::Display for LiteralFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiteralFilter::All => write!(f, "all"),
            LiteralFilter::Quantity => write!(f, "quantity"),
            LiteralFilter::Year => write!(f, "year"),
        }
    }
}

/// How ranks are computed during evaluation; `sampled_c` supplies the C.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalModeKey {
    Filtered,
    Unfiltered,
    Sampled,
}

impl FromStr for EvalModeKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filtered" => Ok(EvalModeKey::Filtered),
            "unfiltered" => Ok(EvalModeKey::Unfiltered),
            "sampled" => Ok(EvalModeKey::Sampled),
            _ => Err(Error::config(format!(
                "unknown eval mode {s:?}, expected filtered|unfiltered|sampled"
            ))),
        }
    }
}

impl fmt::Display for EvalModeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalModeKey::Filtered => write!(f, "filtered"),
            EvalModeKey::Unfiltered => write!(f, "unfiltered"),
            EvalModeKey::Sampled => write!(f, "sampled"),
        }
    }
}

/// One binning variant in the three-letter ablation code: method (F fixed /
/// Q quantile), structure (S single / O overlapping / H hierarchy), chaining
/// (C on / N off). N is only meaningful for overlapping bins; the other
/// structures always chain, so e.g. "QSN" is rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridVariant {
    pub method: Method,
    pub structure: Structure,
    pub chaining: bool,
}

impl GridVariant {
    pub fn code(&self) -> String {
        let m = match self.method {
            Method::Fixed => 'F',
            Method::Quantile => 'Q',
        };
        let s = match self.structure {
            Structure::Single => 'S',
            Structure::Overlapping => 'O',
            Structure::Hierarchy => 'H',
        };
        let c = if self.chaining { 'C' } else { 'N' };
        format!("{m}{s}{c}")
    }
}

impl FromStr for GridVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::config(format!(
                "unknown grid variant {s:?}, expected codes like QSC, FON (method F|Q, \
                 structure S|O|H, chaining C, or N for overlapping only)"
            ))
        };
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 3 {
            return Err(bad());
        }
        let method = match chars[0] {
            'F' => Method::Fixed,
            'Q' => Method::Quantile,
            _ => return Err(bad()),
        };
        let structure = match chars[1] {
            'S' => Structure::Single,
            'O' => Structure::Overlapping,
            'H' => Structure::Hierarchy,
            _ => return Err(bad()),
        };
        let chaining = match chars[2] {
            'C' => true,
            'N' if structure == Structure::Overlapping => false,
            _ => return Err(bad()),
        };
        Ok(GridVariant { method, structure, chaining })
    }
}

/// Everything a run needs, with a documented default for every field. The
/// same struct backs all subcommands; each reads the slice it cares about.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    // Dataset paths. Only `train` is mandatory, and only for subcommands
    // that read data.
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub numeric_train: Option<PathBuf>,
    pub numeric_valid: Option<PathBuf>,
    pub numeric_test: Option<PathBuf>,
    /// The train file was written by `augment`: bin entities and chain
    /// edges are expected and re-marked synthetic on load.
    pub train_is_augmented: bool,
    /// Bin dictionary location; defaults to `<out_dir>/bins/bins.json`.
    pub bins_file: Option<PathBuf>,

    // Binning.
    pub strategy: Method,
    pub levels: Structure,
    pub bins: usize,
    pub branching: usize,
    pub chaining: bool,
    pub literals: LiteralFilter,

    // Model and optimization.
    pub model: ModelKind,
    pub dim: usize,
    pub p_norm: u8,
    pub gamma: f64,
    pub negatives: usize,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub label_smoothing: f64,
    pub l2: f64,
    pub adaptive: bool,
    /// Checkpoint cadence in epochs; 0 means the final epoch only. The
    /// final epoch is always checkpointed.
    pub checkpoint_every: usize,

    // Evaluation.
    pub eval_mode: EvalModeKey,
    pub sampled_c: usize,

    // Ablation grid.
    pub grid_variants: Vec<GridVariant>,
    pub grid_bins: Vec<usize>,

    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: None,
            valid: None,
            test: None,
            numeric_train: None,
            numeric_valid: None,
            numeric_test: None,
            train_is_augmented: false,
            bins_file: None,
            strategy: Method::Quantile,
            levels: Structure::Single,
            bins: 8,
            branching: 2,
            chaining: true,
            literals: LiteralFilter::All,
            model: ModelKind::TransE,
            dim: 64,
            p_norm: 1,
            gamma: 12.0,
            negatives: 16,
            alpha: 1.0,
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 512,
            seed: 42,
            label_smoothing: 0.0,
            l2: 0.0,
            adaptive: false,
            checkpoint_every: 10,
            eval_mode: EvalModeKey::Filtered,
            sampled_c: 500,
            grid_variants: ["FSC", "FOC", "FON", "FHC", "QSC", "QOC", "QON", "QHC"]
                .iter()
                .map(|c| c.parse().expect("builtin variant code"))
                .collect(),
            grid_bins: vec![2, 8],
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Reference table shown under `--help`; one line per key.
pub const KEY_HELP: &str = "\
Config keys (config file and --set; dedicated flags override both):
  train, valid, test              entity-triple TSVs (train required; empty value unsets)
  numeric_train, numeric_valid,   numeric-triple TSVs (entity <tab> attribute <tab> value;
  numeric_test                      dash dates like 1961-01-01 parse as years)
  train_is_augmented   false      train TSV was written by `augment`
  bins_file            <out_dir>/bins/bins.json   bin dictionary location
  strategy             quantile   fixed | quantile
  levels               single     single | overlapping | hierarchy
  bins                 8          bin count (hierarchy: leaf count, rounded
                                    down to a power of `branching`)
  branching            2          hierarchy branching factor
  chaining             true       adjacent-bin kga:next edges
  literals             all        all | quantity | year (which literals to bin)
  model                transe     transe | distmult | complex
  dim                  64         embedding dimension
  p_norm               1          TransE distance norm (1 or 2)
  gamma                12         TransE margin
  negatives            16         corruptions per positive per side
  alpha                1          self-adversarial temperature (0 = uniform)
  learning_rate        0.05       SGD step size
  epochs               50         training epochs
  batch_size           512        triples per update
  seed                 42         RNG seed for init, sampling, shuffling
  label_smoothing      0          kept for config parity; inert here
  l2                   0          L2 penalty on positive-triple embeddings
  adaptive             false      AdaGrad-style per-parameter step scaling
  checkpoint_every     10         checkpoint cadence in epochs (0 = final only)
  eval_mode            filtered   filtered | unfiltered | sampled
  sampled_c            500        corruption count C for sampled mode
  grid_variants        FSC,FOC,FON,FHC,QSC,QOC,QON,QHC   ablation cells
  grid_bins            2,8        bin counts the grid sweeps
  out_dir              out        artifact directory (bins/, augmented/,
                                    checkpoints/, reports/, manifest.json)

Environment:
  KGA_THREADS          1          training threads; the default single thread
                                    is the byte-reproducible mode";

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(format!("bad value {value:?} for {key}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::config(format!(
            "bad value {value:?} for {key}: expected true|false|1|0"
        ))),
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    if value.is_empty() {
        None
    } else {
        Some(PathBuf::from(value))
    }
}

fn parse_list<T: FromStr<Err = Error>>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config(format!("{key} must list at least one item")));
    }
    Ok(items)
}

impl ExperimentConfig {
    /// Set one key from its string form. Unknown keys are errors: a typo'd
    /// experiment config must fail loudly, not run with a silent default.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "train" => self.train = parse_path(value),
            "valid" => self.valid = parse_path(value),
            "test" => self.test = parse_path(value),
            "numeric_train" => self.numeric_train = parse_path(value),
            "numeric_valid" => self.numeric_valid = parse_path(value),
            "numeric_test" => self.numeric_test = parse_path(value),
            "train_is_augmented" => self.train_is_augmented = parse_bool(key, value)?,
            "bins_file" => self.bins_file = parse_path(value),
            "strategy" => self.strategy = value.parse()?,
            "levels" => self.levels = value.parse()?,
            "bins" => self.bins = parse_num(key, value)?,
            "branching" => self.branching = parse_num(key, value)?,
            "chaining" => self.chaining = parse_bool(key, value)?,
            "literals" => self.literals = value.parse()?,
            "model" => self.model = value.parse()?,
            "dim" => self.dim = parse_num(key, value)?,
            "p_norm" => self.p_norm = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "negatives" => self.negatives = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "label_smoothing" => self.label_smoothing = parse_num(key, value)?,
            "l2" => self.l2 = parse_num(key, value)?,
            "adaptive" => self.adaptive = parse_bool(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse_num(key, value)?,
            "eval_mode" => self.eval_mode = value.parse()?,
            "sampled_c" => self.sampled_c = parse_num(key, value)?,
            "grid_variants" => self.grid_variants = parse_list(key, value)?,
            "grid_bins" => {
                self.grid_bins = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num::<usize>(key, s))
                    .collect::<Result<_>>()?;
                if self.grid_bins.is_empty() {
                    return Err(Error::config("grid_bins must list at least one count"));
                }
            }
            "out_dir" => {
                self.out_dir = parse_path(value)
                    .ok_or_else(|| Error::config("out_dir must not be empty"))?
            }
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parse a `key = value` line; `#` starts a comment, blank lines skip.
    pub fn apply_line(&mut self, line: &str, context: &str) -> Result<()> {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return Ok(());
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("{context}: expected key=value, got {line:?}")))?;
        self.apply(key.trim(), value.trim())
            .map_err(|e| Error::config(format!("{context}: {e}")))
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            self.apply_line(line, &format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    /// Full state as sorted `key=value` lines: the canonical form behind
    /// `config_hash`, covering every key so any change is visible.
    pub fn canonical_lines(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut kv = vec![
            ("adaptive", self.adaptive.to_string()),
            ("alpha", self.alpha.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("bins", self.bins.to_string()),
            ("bins_file", path(&self.bins_file)),
            ("branching", self.branching.to_string()),
            ("chaining", self.chaining.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("dim", self.dim.to_string()),
            ("epochs", self.epochs.to_string()),
            ("eval_mode", self.eval_mode.to_string()),
            ("gamma", self.gamma.to_string()),
            (
                "grid_bins",
                self.grid_bins.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            ),
            (
                "grid_variants",
                self.grid_variants.iter().map(GridVariant::code).collect::<Vec<_>>().join(","),
            ),
            ("l2", self.l2.to_string()),
            ("label_smoothing", self.label_smoothing.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("levels", self.levels.to_string()),
            ("literals", self.literals.to_string()),
            ("model", self.model.to_string()),
            ("negatives", self.negatives.to_string()),
            ("numeric_test", path(&self.numeric_test)),
            ("numeric_train", path(&self.numeric_train)),
            ("numeric_valid", path(&self.numeric_valid)),
            ("out_dir", self.out_dir.display().to_string()),
            ("p_norm", self.p_norm.to_string()),
            ("sampled_c", self.sampled_c.to_string()),
            ("seed", self.seed.to_string()),
            ("strategy", self.strategy.to_string()),
            ("test", path(&self.test)),
            ("train", path(&self.train)),
            ("train_is_augmented", self.train_is_augmented.to_string()),
            ("valid", path(&self.valid)),
        ];
        kv.sort_by_key(|(k, _)| *k);
        let mut out = String::new();
        for (k, v) in kv {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_lines().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn bin_spec(&self) -> BinSpec {
        BinSpec {
            method: self.strategy,
            structure: self.levels,
            bins: self.bins,
            branching: self.branching,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            model: self.model,
            dim: self.dim,
            p_norm: self.p_norm,
            gamma: self.gamma,
            negatives: self.negatives,
            alpha: self.alpha,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            label_smoothing: self.label_smoothing,
            l2: self.l2,
            adaptive: self.adaptive,
        }
    }

    pub fn split_paths(&self) -> Result<SplitPaths> {
        let train = self
            .train
            .clone()
            .ok_or_else(|| Error::config("no training file: set `train` (or --train)"))?;
        Ok(SplitPaths {
            train,
            valid: self.valid.clone(),
            test: self.test.clone(),
            numeric_train: self.numeric_train.clone(),
            numeric_valid: self.numeric_valid.clone(),
            numeric_test: self.numeric_test.clone(),
            train_is_augmented: self.train_is_augmented,
        })
    }

    pub fn eval_mode(&self) -> EvalMode {
        match self.eval_mode {
            EvalModeKey::Filtered => EvalMode::Filtered,
            EvalModeKey::Unfiltered => EvalMode::Unfiltered,
            EvalModeKey::Sampled => EvalMode::Sampled { c: self.sampled_c },
        }
    }

    /// Where the bin dictionary lives for this run.
    pub fn bins_path(&self) -> PathBuf {
        self.bins_file.clone().unwrap_or_else(|| self.out_dir.join("bins").join("bins.json"))
    }
}
