//! Per-attribute discretization of numeric values into bins.
//!
//! A bin dictionary maps every value of one attribute to one or more
//! intervals. Intervals come from two methods — `fixed` (equal width) and
//! `quantile` (equal frequency over the value multiset) — and three
//! structures:
//!
//! * `single`: a flat partition into `b` bins;
//! * `overlapping`: `2b` auxiliary bins merged pairwise into `2b-1` bins,
//!   so interior values fall into exactly two bins;
//! * `hierarchy`: levels `0..=L`, level `l` a partition into `r^l` bins
//!   (branching `r`), level 0 the full range.
//!
//! All intervals are half-open `[lo, hi)` except the last bin of each
//! level, which is closed. Quantile cuts never split a run of equal
//! values: a cut landing inside a run snaps to the nearer run edge, which
//! can reduce the bin count. Values outside `[min, max]` (from held-out
//! splits) clamp to the extreme bins.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, ValueKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fixed,
    Quantile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Single,
    Overlapping,
    Hierarchy,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Method::Fixed),
            "quantile" => Ok(Method::Quantile),
            _ => Err(Error::config(format!("unknown method {s:?}, expected fixed|quantile"))),
        }
    }
}

impl std::str::FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Structure::Single),
            "overlapping" => Ok(Structure::Overlapping),
            "hierarchy" => Ok(Structure::Hierarchy),
            _ => Err(Error::config(format!(
                "unknown structure {s:?}, expected single|overlapping|hierarchy"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Fixed => write!(f, "fixed"),
            Method::Quantile => write!(f, "quantile"),
        }
    }
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Structure::Single => write!(f, "single"),
            Structure::Overlapping => write!(f, "overlapping"),
            Structure::Hierarchy => write!(f, "hierarchy"),
        }
    }
}

fn default_branching() -> usize {
    2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSpec {
    pub method: Method,
    pub structure: Structure,
    /// Bin count for single/overlapping; leaf-level bin count for hierarchy
    /// (rounded down to a power of `branching`).
    pub bins: usize,
    #[serde(default = "default_branching")]
    pub branching: usize,
}

impl BinSpec {
    fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::config("bins must be >= 1".to_string()));
        }
        if self.structure == Structure::Hierarchy && self.branching < 2 {
            return Err(Error::config("branching must be >= 2".to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub level: u8,
    /// Position within its level.
    pub index: u32,
    pub lo: f64,
    pub hi: f64,
    /// Last bin of a level includes its upper boundary.
    pub closed_hi: bool,
    /// Global index of the enclosing bin one level up (hierarchy only).
    pub parent: Option<u32>,
    /// Median of the training values assigned to this bin; interval
    /// midpoint when no value maps here (possible for fixed bins).
    pub median: f64,
    pub name: String,
}

impl Bin {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && (v < self.hi || (self.closed_hi && v <= self.hi))
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

/// Render a boundary the way bin names do: integral values without a
/// trailing `.0`, everything else in shortest round-trip form.
fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Canonical bin entity name: `<attr>::L<level>::B<index>::[lo,hi)` with a
/// closing `]` when the bin is closed. Deterministic given the bin fields,
/// so names regenerate identically from a serialized dictionary.
pub fn bin_name(attr: &str, level: u8, index: u32, lo: f64, hi: f64, closed_hi: bool) -> String {
    let close = if closed_hi { ']' } else { ')' };
    format!("{attr}::L{level}::B{index}::[{},{}{close}", fmt_num(lo), fmt_num(hi))
}

/// One attribute's bins plus everything needed to assign values to them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinDictionary {
    pub attribute: String,
    pub kind: ValueKind,
    pub structure: Structure,
    pub n_values: usize,
    pub distinct: usize,
    /// Median of all training values; the value-prediction baseline.
    pub value_median: f64,
    /// Global index of each level's first bin; levels are contiguous runs
    /// of `bins`. Single/overlapping structures have one level.
    pub level_starts: Vec<usize>,
    /// Partition boundaries per level (`m+1` entries for `m` bins). For
    /// overlapping, the auxiliary partition the merged bins derive from.
    pub boundaries: Vec<Vec<f64>>,
    pub bins: Vec<Bin>,
}

impl BinDictionary {
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn n_levels(&self) -> usize {
        self.level_starts.len()
    }

    /// Global bin indices of level `l`.
    pub fn level_range(&self, l: usize) -> Range<usize> {
        let end = self.level_starts.get(l + 1).copied().unwrap_or(self.bins.len());
        self.level_starts[l]..end
    }

    /// Bins covering `v`, as ascending global indices. Single: one bin.
    /// Overlapping: one or two. Hierarchy: exactly one per level.
    /// Out-of-range values clamp to the extreme bins.
    pub fn assign(&self, v: f64) -> Vec<usize> {
        match self.structure {
            Structure::Single => vec![partition_assign(&self.boundaries[0], v)],
            Structure::Overlapping => {
                let aux = &self.boundaries[0];
                let n_merged = self.bins.len();
                if n_merged == 1 {
                    return vec![0];
                }
                let a = partition_assign(aux, v);
                let mut out = Vec::with_capacity(2);
                if a >= 1 {
                    out.push(a - 1);
                }
                if a < n_merged {
                    out.push(a);
                }
                out
            }
            Structure::Hierarchy => self
                .boundaries
                .iter()
                .enumerate()
                .map(|(l, bs)| self.level_starts[l] + partition_assign(bs, v))
                .collect(),
        }
    }

    fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::data(format!("bins for {:?}: {msg}", self.attribute)));
        if self.bins.is_empty() || self.level_starts.is_empty() || self.boundaries.is_empty() {
            return fail("empty dictionary".to_string());
        }
        if self.level_starts[0] != 0 || self.level_starts.len() != self.boundaries.len() {
            return fail("level bookkeeping mismatch".to_string());
        }
        for (l, bs) in self.boundaries.iter().enumerate() {
            if bs.len() < 2 {
                return fail(format!("level {l} has fewer than 2 boundaries"));
            }
            if bs.windows(2).any(|w| w[0] > w[1]) {
                return fail(format!("level {l} boundaries not sorted"));
            }
            let expected = match self.structure {
                Structure::Overlapping => (bs.len() - 2).max(1),
                _ => bs.len() - 1,
            };
            if self.level_range(l).len() != expected {
                return fail(format!("level {l} bin count does not match boundaries"));
            }
        }
        for (g, bin) in self.bins.iter().enumerate() {
            if !self.level_range(bin.level as usize).contains(&g) {
                return fail(format!("bin {g} recorded under wrong level"));
            }
            if bin.lo > bin.hi || !bin.lo.is_finite() || !bin.hi.is_finite() {
                return fail(format!("bin {g} has a bad interval"));
            }
        }
        Ok(())
    }
}

/// Bin `i` of an `m`-bin partition holds `[B_i, B_{i+1})`, the last bin is
/// closed, and out-of-range values clamp to bins `0`/`m-1`.
fn partition_assign(boundaries: &[f64], v: f64) -> usize {
    let m = boundaries.len() - 1;
    if v <= boundaries[0] {
        return 0;
    }
    if v >= boundaries[m] {
        return m - 1;
    }
    boundaries[1..m].partition_point(|&x| x <= v)
}

/// Interior cut positions (0-indexed, strictly increasing, in `(0, n)`) for
/// an equal-frequency split of `sorted` into at most `b` bins. The natural
/// cut for bin boundary `i` is `ceil(i*n/b)`; a cut inside a run of equal
/// values snaps to the nearer run edge (ties toward the start) and cuts
/// that cannot be placed are dropped, reducing the bin count.
pub(crate) fn quantile_cuts(sorted: &[f64], b: usize) -> Vec<usize> {
    let n = sorted.len();
    let mut cuts = Vec::new();
    let mut prev = 0usize;
    for i in 1..b {
        let c = (i * n + b - 1) / b;
        if c <= prev || c >= n {
            continue;
        }
        let v = sorted[c];
        let s = sorted[..c].partition_point(|&x| x < v);
        if s == c {
            cuts.push(c);
            prev = c;
            continue;
        }
        let e = c + sorted[c..].partition_point(|&x| x <= v);
        let snapped = match (s > prev, e < n) {
            (true, true) => Some(if c - s <= e - c { s } else { e }),
            (true, false) => Some(s),
            (false, true) => Some(e),
            (false, false) => None,
        };
        if let Some(c) = snapped {
            cuts.push(c);
            prev = c;
        }
    }
    cuts
}

fn quantile_boundaries(sorted: &[f64], b: usize) -> Vec<f64> {
    let cuts = quantile_cuts(sorted, b);
    let mut out = Vec::with_capacity(cuts.len() + 2);
    out.push(sorted[0]);
    out.extend(cuts.iter().map(|&c| sorted[c]));
    out.push(sorted[sorted.len() - 1]);
    out
}

fn fixed_boundaries(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if lo == hi || m <= 1 {
        return vec![lo, hi];
    }
    let width = (hi - lo) / m as f64;
    let mut out: Vec<f64> = (0..m).map(|i| lo + i as f64 * width).collect();
    out.push(hi);
    // Extreme ranges can round adjacent boundaries together; collapse them.
    out.dedup();
    if out.len() < 2 {
        vec![lo, hi]
    } else {
        out
    }
}

fn boundaries_for(method: Method, sorted: &[f64], m: usize) -> Vec<f64> {
    match method {
        Method::Fixed => fixed_boundaries(sorted[0], *sorted.last().unwrap(), m),
        Method::Quantile => quantile_boundaries(sorted, m),
    }
}

pub(crate) fn median_of_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn bins_from_partition(attr: &str, level: u8, boundaries: &[f64]) -> Vec<Bin> {
    let m = boundaries.len() - 1;
    (0..m)
        .map(|i| {
            let closed = i == m - 1;
            Bin {
                level,
                index: i as u32,
                lo: boundaries[i],
                hi: boundaries[i + 1],
                closed_hi: closed,
                parent: None,
                median: 0.0,
                name: bin_name(attr, level, i as u32, boundaries[i], boundaries[i + 1], closed),
            }
        })
        .collect()
}

/// Build the bin dictionary for one attribute from its training values
/// (the full multiset — duplicates weight quantile cuts).
pub fn build_dictionary(
    attr: &str,
    kind: ValueKind,
    values: &[f64],
    spec: &BinSpec,
) -> Result<BinDictionary> {
    spec.validate()?;
    if values.is_empty() {
        return Err(Error::data(format!("attribute {attr:?} has no values to discretize")));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::data(format!("attribute {attr:?} has non-finite value {bad}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();

    let (level_starts, boundaries, mut bins) = match spec.structure {
        Structure::Single => {
            let b_eff = spec.bins.min(distinct);
            if b_eff < spec.bins {
                log::info!("{attr}: reducing bins {} -> {b_eff} (distinct values)", spec.bins);
            }
            let bounds = boundaries_for(spec.method, &sorted, b_eff);
            let bins = bins_from_partition(attr, 0, &bounds);
            (vec![0], vec![bounds], bins)
        }
        Structure::Overlapping => {
            let b_aux = (2 * spec.bins).min(distinct);
            let aux = boundaries_for(spec.method, &sorted, b_aux);
            let m = aux.len() - 1;
            let n_merged = (m - 1).max(1);
            let bins: Vec<Bin> = (0..n_merged)
                .map(|j| {
                    let hi = aux[(j + 2).min(m)];
                    let closed = j == n_merged - 1;
                    Bin {
                        level: 0,
                        index: j as u32,
                        lo: aux[j],
                        hi,
                        closed_hi: closed,
                        parent: None,
                        median: 0.0,
                        name: bin_name(attr, 0, j as u32, aux[j], hi, closed),
                    }
                })
                .collect();
            (vec![0], vec![aux], bins)
        }
        Structure::Hierarchy => {
            let r = spec.branching;
            let max_leaves = spec.bins.min(distinct);
            let mut depth = 0u32;
            while r.pow(depth + 1) <= max_leaves {
                depth += 1;
            }
            if r.pow(depth) != spec.bins {
                log::info!(
                    "{attr}: hierarchy leaf count {} -> {} (power of branching {r} within distinct values)",
                    spec.bins,
                    r.pow(depth)
                );
            }
            let per_level: Vec<Vec<f64>> = match spec.method {
                Method::Fixed => {
                    // One deep partition subsampled per level keeps nesting
                    // exact: level l boundary j is deep[j * r^(depth-l)].
                    let deep = loop {
                        let d = fixed_boundaries(sorted[0], *sorted.last().unwrap(), r.pow(depth));
                        if d.len() == r.pow(depth) as usize + 1 || depth == 0 {
                            break d;
                        }
                        depth -= 1;
                    };
                    (0..=depth)
                        .map(|l| {
                            let step = r.pow(depth - l) as usize;
                            (0..=r.pow(l) as usize).map(|j| deep[j * step]).collect()
                        })
                        .collect()
                }
                Method::Quantile => {
                    (0..=depth).map(|l| quantile_boundaries(&sorted, r.pow(l) as usize)).collect()
                }
            };
            let mut level_starts = Vec::with_capacity(per_level.len());
            let mut bins = Vec::new();
            for (l, bounds) in per_level.iter().enumerate() {
                level_starts.push(bins.len());
                bins.extend(bins_from_partition(attr, l as u8, bounds));
            }
            // Parent links: fixed nesting is exact so index arithmetic is
            // enough; quantile levels are cut independently, so a child's
            // parent is the bin containing its midpoint.
            for l in 1..per_level.len() {
                let child_start = level_starts[l];
                let child_count = per_level[l].len() - 1;
                let parent_start = level_starts[l - 1];
                for i in 0..child_count {
                    let p = match spec.method {
                        Method::Fixed => i / r,
                        Method::Quantile => {
                            let mid = bins[child_start + i].midpoint();
                            partition_assign(&per_level[l - 1], mid)
                        }
                    };
                    bins[child_start + i].parent = Some((parent_start + p) as u32);
                }
            }
            (level_starts, per_level, bins)
        }
    };

    let value_median = median_of_sorted(&sorted);
    for bin in &mut bins {
        bin.median = bin.midpoint();
    }
    let mut dict = BinDictionary {
        attribute: attr.to_string(),
        kind,
        structure: spec.structure,
        n_values: sorted.len(),
        distinct,
        value_median,
        level_starts,
        boundaries,
        bins,
    };
    // Medians: values arrive sorted, so per-bin collections stay sorted.
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); dict.bins.len()];
    for &v in &sorted {
        for g in dict.assign(v) {
            per_bin[g].push(v);
        }
    }
    for (bin, vals) in dict.bins.iter_mut().zip(&per_bin) {
        if !vals.is_empty() {
            bin.median = median_of_sorted(vals);
        }
    }
    dict.check()?;
    Ok(dict)
}

/// All attributes' dictionaries plus the spec they were built with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSet {
    pub spec: BinSpec,
    pub attributes: BTreeMap<String, BinDictionary>,
}

impl BinSet {
    /// Discretize every attribute of a training graph.
    pub fn build(graph: &KnowledgeGraph, spec: &BinSpec) -> Result<BinSet> {
        let mut groups: BTreeMap<&str, (ValueKind, Vec<f64>)> = BTreeMap::new();
        for t in &graph.numeric_triples {
            let entry = groups
                .entry(graph.relations.resolve(t.attribute.0))
                .or_insert((t.kind, Vec::new()));
            entry.1.push(t.value);
        }
        let mut attributes = BTreeMap::new();
        for (attr, (kind, values)) in groups {
            attributes.insert(attr.to_string(), build_dictionary(attr, kind, &values, spec)?);
        }
        Ok(BinSet { spec: *spec, attributes })
    }

    pub fn total_bins(&self) -> usize {
        self.attributes.values().map(|d| d.n_bins()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bin set serialize")
    }

    pub fn from_json(text: &str) -> Result<BinSet> {
        let set: BinSet =
            serde_json::from_str(text).map_err(|e| Error::data(format!("bad bin file: {e}")))?;
        for dict in set.attributes.values() {
            dict.check()?;
        }
        Ok(set)
    }
}
