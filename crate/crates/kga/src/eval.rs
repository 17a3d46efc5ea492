//! Link-prediction evaluation: entity ranking (MRR, Hits@K) and numeric
//! value prediction (per-attribute MAE against a median baseline).
//!
//! Ranks use the mean-rank-over-permutations tie rule: a candidate tied
//! with `t` others at the top contributes rank `1 + (t)/2` rather than the
//! optimistic 1, so constant-score models cannot fake good metrics. All
//! aggregation is order-independent and per-triple sampling is seeded by
//! triple index, so results are identical for any thread count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{median_of_sorted, BinDictionary, BinSet, Structure};
use crate::embed::{EmbeddingModel, Side};
use crate::error::{Error, Result};
use crate::graph::{EntityTriple, NumericTriple};
use crate::vocab::Vocab;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Every candidate competes, even those forming other true triples.
    Unfiltered,
    /// Candidates forming a known-true triple with the fixed pair are
    /// removed (the classic filtered setting).
    Filtered,
    /// The true entity plus `c` candidates drawn uniformly without
    /// replacement; `c` ≥ pool size degenerates to Unfiltered exactly.
    Sampled { c: usize },
}

pub const DEFAULT_SAMPLED_C: usize = 500;

impl EvalMode {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::Unfiltered => "unfiltered",
            EvalMode::Filtered => "filtered",
            EvalMode::Sampled { .. } => "sampled",
        }
    }

    pub fn sample_size(&self) -> Option<usize> {
        match self {
            EvalMode::Sampled { c } => Some(*c),
            _ => None,
        }
    }
}

/// Rank of the true candidate among `others` under the mean-rank tie rule:
/// `1 + #strictly_better + #tied / 2`.
pub fn rank_from_scores(true_score: f64, others: impl IntoIterator<Item = f64>) -> f64 {
    let mut better = 0usize;
    let mut tied = 0usize;
    for s in others {
        if s > true_score {
            better += 1;
        } else if s == true_score {
            tied += 1;
        }
    }
    1.0 + better as f64 + tied as f64 / 2.0
}

/// Entity ids eligible as ranking candidates: every non-synthetic entity.
/// Bin entities never compete — test answers are original entities, and a
/// large synthetic candidate pool would deflate metrics incomparably.
pub fn original_candidates(entities: &Vocab) -> Vec<u32> {
    entities.iter().filter(|(id, _)| !entities.is_synthetic(*id)).map(|(id, _)| id).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankingResult {
    pub mrr: f64,
    pub hits1: f64,
    pub hits10: f64,
    pub n_triples: usize,
}

/// Ranks test triples against a frozen model.
pub struct EntityRanker<'a> {
    model: &'a EmbeddingModel,
    candidates: Vec<u32>,
    /// All known-true triples (train ∪ valid ∪ test, including bin
    /// assignments) for the filtered setting.
    known: HashSet<(u32, u32, u32)>,
    seed: u64,
}

/// SplitMix64 finalizer; decorrelates per-triple sampling seeds.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl<'a> EntityRanker<'a> {
    pub fn new(
        model: &'a EmbeddingModel,
        candidates: Vec<u32>,
        known_true: impl IntoIterator<Item = &'a EntityTriple>,
        seed: u64,
    ) -> EntityRanker<'a> {
        let known =
            known_true.into_iter().map(|t| (t.subject.0, t.relation.0, t.object.0)).collect();
        EntityRanker { model, candidates, known, seed }
    }

    /// Rank the triple's `side` entity against the mode's candidate pool.
    /// `triple_idx` seeds sampled-mode draws so they are reproducible and
    /// independent of evaluation order.
    pub fn rank_entity(
        &self,
        triple: &EntityTriple,
        side: Side,
        mode: EvalMode,
        triple_idx: usize,
    ) -> f64 {
        let (s, r, o) = (triple.subject.0, triple.relation.0, triple.object.0);
        let true_id = match side {
            Side::Head => s,
            Side::Tail => o,
        };
        let corrupted = |c: u32| match side {
            Side::Head => (c, r, o),
            Side::Tail => (s, r, c),
        };
        let score_of = |c: u32| {
            let (cs, cr, co) = corrupted(c);
            self.model.score(cs, cr, co)
        };

        let mut pool: Vec<u32> = match mode {
            EvalMode::Unfiltered | EvalMode::Sampled { .. } => {
                self.candidates.iter().copied().filter(|&c| c != true_id).collect()
            }
            EvalMode::Filtered => self
                .candidates
                .iter()
                .copied()
                .filter(|&c| c != true_id && !self.known.contains(&corrupted(c)))
                .collect(),
        };
        if let EvalMode::Sampled { c } = mode {
            if c < pool.len() {
                let side_tag = match side {
                    Side::Head => 0u64,
                    Side::Tail => 1u64,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(
                    self.seed ^ mix64(2 * triple_idx as u64 + side_tag),
                );
                pool = rand::seq::index::sample(&mut rng, pool.len(), c)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect();
            }
        }
        rank_from_scores(score_of(true_id), pool.into_iter().map(score_of))
    }

    /// MRR and Hits@{1,10} over both corruption sides of every test triple.
    pub fn entity_lp_metrics(&self, test: &[EntityTriple], mode: EvalMode) -> RankingResult {
        // Parallel map, sequential fold: per-triple work is independent and
        // the summation order is fixed, so any thread count gives
        // bit-identical metrics.
        let ranks: Vec<(f64, f64)> = test
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                (self.rank_entity(t, Side::Head, mode, i), self.rank_entity(t, Side::Tail, mode, i))
            })
            .collect();
        let mut rr = 0.0;
        let mut h1 = 0usize;
        let mut h10 = 0usize;
        for &(head, tail) in &ranks {
            for rank in [head, tail] {
                rr += 1.0 / rank;
                h1 += (rank <= 1.0) as usize;
                h10 += (rank <= 10.0) as usize;
            }
        }
        let n = (2 * test.len()) as f64;
        RankingResult {
            mrr: rr / n,
            hits1: h1 as f64 / n,
            hits10: h10 as f64 / n,
            n_triples: test.len(),
        }
    }
}

// ---------------------------------------------------------------------------
// Numeric value prediction
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericPrediction {
    /// Global index of the argmax bin in the dictionary.
    pub bin_index: usize,
    /// The bin's representative value (median of its training values).
    pub value: f64,
}

/// Bins competing in numeric prediction: the finest disjoint level — every
/// bin for single, all `2b−1` for overlapping, the leaf level for
/// hierarchy.
pub fn prediction_bin_range(dict: &BinDictionary) -> std::ops::Range<usize> {
    match dict.structure {
        Structure::Hierarchy => dict.level_range(dict.n_levels() - 1),
        _ => 0..dict.n_bins(),
    }
}

/// Resolve each bin of a dictionary to its entity id in an augmented
/// graph's vocabulary. Fails when the graph was not augmented with this
/// dictionary.
pub fn bin_entity_ids(entities: &Vocab, dict: &BinDictionary) -> Result<Vec<u32>> {
    dict.bins
        .iter()
        .map(|b| {
            entities.lookup(&b.name).ok_or_else(|| {
                Error::data(format!(
                    "bin entity {:?} is not in the graph; attribute {:?} was not \
                     augmented with this dictionary",
                    b.name, dict.attribute
                ))
            })
        })
        .collect()
}

/// Predict a numeric value for (entity, attribute): the argmax-scoring bin
/// at the finest disjoint level, ties broken toward the lowest bin index,
/// represented by its median.
pub fn predict_numeric(
    model: &EmbeddingModel,
    entity: u32,
    attribute: u32,
    dict: &BinDictionary,
    bin_ids: &[u32],
) -> NumericPrediction {
    let range = prediction_bin_range(dict);
    debug_assert!(!range.is_empty());
    let mut best = range.start;
    let mut best_score = f64::NEG_INFINITY;
    for j in range {
        let score = model.score(entity, attribute, bin_ids[j]);
        if score > best_score {
            best_score = score;
            best = j;
        }
    }
    NumericPrediction { bin_index: best, value: dict.bins[best].median }
}

/// Per-attribute training medians, the baseline predictor.
pub fn median_baseline(
    train_numeric: &[NumericTriple],
    relations: &Vocab,
) -> BTreeMap<String, f64> {
    let mut by_attr: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in train_numeric {
        by_attr.entry(relations.resolve(t.attribute.0).to_string()).or_default().push(t.value);
    }
    by_attr
        .into_iter()
        .map(|(attr, mut vals)| {
            vals.sort_by(f64::total_cmp);
            let m = median_of_sorted(&vals);
            (attr, m)
        })
        .collect()
}

/// The baseline's prediction for one attribute; unseen attributes are an
/// error rather than a silent guess.
pub fn baseline_value(medians: &BTreeMap<String, f64>, attribute: &str) -> Result<f64> {
    medians.get(attribute).copied().ok_or_else(|| {
        Error::data(format!("attribute {attribute:?} has no training values to take a median of"))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericReport {
    pub mae: f64,
    pub n: usize,
    pub baseline_mae: f64,
}

/// Numeric link prediction over a test split: per-attribute MAE of the
/// bin-median predictor next to the median baseline's MAE on the same
/// pairs.
pub fn evaluate_numeric(
    model: &EmbeddingModel,
    entities: &Vocab,
    relations: &Vocab,
    bins: &BinSet,
    train_numeric: &[NumericTriple],
    test_numeric: &[NumericTriple],
) -> Result<BTreeMap<String, NumericReport>> {
    let medians = median_baseline(train_numeric, relations);
    let mut resolved: HashMap<u32, (&BinDictionary, Vec<u32>)> = HashMap::new();
    let mut agg: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for t in test_numeric {
        let attr_name = relations.resolve(t.attribute.0);
        if !resolved.contains_key(&t.attribute.0) {
            let dict = bins.attributes.get(attr_name).ok_or_else(|| {
                Error::data(format!("attribute {attr_name:?} has no bin dictionary"))
            })?;
            let ids = bin_entity_ids(entities, dict)?;
            resolved.insert(t.attribute.0, (dict, ids));
        }
        let (dict, ids) = &resolved[&t.attribute.0];
        let pred = predict_numeric(model, t.entity.0, t.attribute.0, dict, ids);
        let baseline = baseline_value(&medians, attr_name)?;
        let entry = agg.entry(attr_name.to_string()).or_insert((0.0, 0.0, 0));
        entry.0 += (pred.value - t.value).abs();
        entry.1 += (baseline - t.value).abs();
        entry.2 += 1;
    }
    Ok(agg
        .into_iter()
        .map(|(attr, (err, berr, n))| {
            (attr, NumericReport { mae: err / n as f64, n, baseline_mae: berr / n as f64 })
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Round to `digits` significant digits for reporting.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = digits - x.abs().log10().ceil() as i32;
    let scale = 10f64.powi(magnitude);
    (x * scale).round() / scale
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none", default)]
    pub c: Option<usize>,
    pub mrr: f64,
    pub hits1: f64,
    pub hits10: f64,
    pub n_triples: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub numeric: BTreeMap<String, NumericReport>,
}

impl EvalReport {
    /// Assemble a report with all metrics rounded to 4 significant digits.
    pub fn new(
        mode: EvalMode,
        ranking: RankingResult,
        numeric: BTreeMap<String, NumericReport>,
    ) -> EvalReport {
        EvalReport {
            mode: mode.name().to_string(),
            c: mode.sample_size(),
            mrr: round_sig(ranking.mrr, 4),
            hits1: round_sig(ranking.hits1, 4),
            hits10: round_sig(ranking.hits10, 4),
            n_triples: ranking.n_triples,
            numeric: numeric
                .into_iter()
                .map(|(attr, r)| {
                    (
                        attr,
                        NumericReport {
                            mae: round_sig(r.mae, 4),
                            n: r.n,
                            baseline_mae: round_sig(r.baseline_mae, 4),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Aligned text rendering for terminals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let mode = match self.c {
            Some(c) => format!("{} (C={c})", self.mode),
            None => self.mode.clone(),
        };
        let _ = writeln!(s, "{:<10} {:>12}", "metric", "value");
        let _ = writeln!(s, "{:<10} {:>12}", "mode", mode);
        let _ = writeln!(s, "{:<10} {:>12}", "triples", self.n_triples);
        let _ = writeln!(s, "{:<10} {:>12}", "mrr", self.mrr);
        let _ = writeln!(s, "{:<10} {:>12}", "hits@1", self.hits1);
        let _ = writeln!(s, "{:<10} {:>12}", "hits@10", self.hits10);
        if !self.numeric.is_empty() {
            let width =
                self.numeric.keys().map(|a| a.len()).max().unwrap_or(9).max("attribute".len());
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "{:<width$} {:>6} {:>12} {:>12}",
                "attribute", "n", "mae", "baseline"
            );
            for (attr, r) in &self.numeric {
                let _ = writeln!(
                    s,
                    "{:<width$} {:>6} {:>12} {:>12}",
                    attr, r.n, r.mae, r.baseline_mae
                );
            }
        }
        s
    }
}
