//! Knowledge graph data model and TSV ingestion.
//!
//! A graph is a set of entity triples `(s, r, o)` plus numeric triples
//! `(e, a, v)` where `v` is a quantity or a year. Attributes share the
//! relation vocabulary. All parsing interns surface strings into dense ids;
//! downstream modules operate on ids only.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::vocab::{EntityId, RelationId, Vocab};

/// Relation surface forms reserved for augmentation edges; rejected in input
/// files so augmented output can never be mistaken for source data.
pub const RESERVED_RELATIONS: [&str; 2] = ["kga:next", "kga:parent"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Quantity,
    Year,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueKind::Quantity => write!(f, "quantity"),
            ValueKind::Year => write!(f, "year"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EntityTriple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl EntityTriple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId) -> Self {
        Self { subject, relation, object }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericTriple {
    pub entity: EntityId,
    pub attribute: RelationId,
    pub value: f64,
    pub kind: ValueKind,
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    pub entities: Vocab,
    pub relations: Vocab,
    pub entity_triples: Vec<EntityTriple>,
    pub numeric_triples: Vec<NumericTriple>,
}

/// Held-out triples for one evaluation split.
#[derive(Clone, Debug, Default)]
pub struct EvalTriples {
    pub entity: Vec<EntityTriple>,
    pub numeric: Vec<NumericTriple>,
}

/// Train graph plus valid/test holdouts sharing the train vocabulary.
#[derive(Clone, Debug, Default)]
pub struct DatasetSplit {
    pub train: KnowledgeGraph,
    pub valid: EvalTriples,
    pub test: EvalTriples,
}

/// Whether parsing may grow the vocabulary or must drop triples whose
/// surface strings are unknown (used for valid/test against train vocab).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InternMode {
    Grow,
    LookupOnly,
}

/// Per-file accounting surfaced in logs and load reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseLog {
    /// Duplicate lines removed (entity triples only).
    pub duplicates: usize,
    /// Triples dropped because a surface string was not in the vocabulary.
    pub unseen_dropped: usize,
    /// Numeric lines dropped for unparseable or non-finite values.
    pub value_dropped: usize,
}

/// Whether `kga:next`/`kga:parent` may appear as relations. Source data must
/// not use them; files the augmenter itself wrote legitimately do.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReservedPolicy {
    Reject,
    Allow,
}

pub fn parse_entity_triples(
    path: &Path,
    entities: &mut Vocab,
    relations: &mut Vocab,
    mode: InternMode,
) -> Result<(Vec<EntityTriple>, ParseLog)> {
    parse_entity_triples_with(path, entities, relations, mode, ReservedPolicy::Reject)
}

pub fn parse_entity_triples_with(
    path: &Path,
    entities: &mut Vocab,
    relations: &mut Vocab,
    mode: InternMode,
    reserved: ReservedPolicy,
) -> Result<(Vec<EntityTriple>, ParseLog)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    let mut log = ParseLog::default();
    let mut any_line = false;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        any_line = true;
        let mut cols = line.split('\t');
        let (s, r, o) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(s), Some(r), Some(o), None) if !s.is_empty() && !r.is_empty() && !o.is_empty() => {
                (s, r, o)
            }
            _ => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 3 tab-separated columns, got {:?}", line),
                ))
            }
        };
        if reserved == ReservedPolicy::Reject && RESERVED_RELATIONS.contains(&r) {
            return Err(Error::parse(
                path,
                lineno,
                format!("relation {r:?} is reserved for augmentation edges"),
            ));
        }
        let ids = match mode {
            InternMode::Grow => Some((entities.intern(s), relations.intern(r), entities.intern(o))),
            InternMode::LookupOnly => match (entities.lookup(s), relations.lookup(r), entities.lookup(o)) {
                (Some(si), Some(ri), Some(oi)) => Some((si, ri, oi)),
                _ => None,
            },
        };
        match ids {
            Some((si, ri, oi)) => {
                if seen.insert((si, ri, oi)) {
                    triples.push(EntityTriple::new(EntityId(si), RelationId(ri), EntityId(oi)));
                } else {
                    log.duplicates += 1;
                }
            }
            None => log.unseen_dropped += 1,
        }
    }

    if !any_line {
        return Err(Error::parse(path, 0, "empty triple file".to_string()));
    }
    if log.duplicates > 0 {
        log::warn!("{}: removed {} duplicate triples", path.display(), log.duplicates);
    }
    if log.unseen_dropped > 0 {
        log::warn!(
            "{}: dropped {} triples with entities/relations unseen in train",
            path.display(),
            log.unseen_dropped
        );
    }
    Ok((triples, log))
}

// Raw value classification. Bare 1-4 digit integers are ambiguous between an
// ISO year and a plain decimal; they resolve to years only when the attribute
// also carries dash-dated values, otherwise to quantities.
enum RawValue {
    DashDate(f64),
    BareYearish(f64),
    Decimal(f64),
}

fn classify_value(token: &str) -> Option<RawValue> {
    if let Some(year) = parse_dash_date(token) {
        return Some(RawValue::DashDate(year));
    }
    if token.len() <= 4 && !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit()) {
        let year: f64 = token.parse().ok()?;
        if year >= 1.0 {
            return Some(RawValue::BareYearish(year));
        }
        return None; // year 0 in date position, not a usable value
    }
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(RawValue::Decimal(v)),
        _ => None,
    }
}

fn parse_dash_date(token: &str) -> Option<f64> {
    let parts: Vec<&str> = token.split('-').collect();
    if parts.len() != 2 && parts.len() != 3 {
        return None;
    }
    let digits = |s: &str, max: usize| -> Option<u32> {
        if s.is_empty() || s.len() > max || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        s.parse().ok()
    };
    let year = digits(parts[0], 4)?;
    let month = digits(parts[1], 2)?;
    if year == 0 || !(1..=12).contains(&month) {
        return None;
    }
    if parts.len() == 3 {
        let day = digits(parts[2], 2)?;
        if !(1..=31).contains(&day) {
            return None;
        }
    }
    Some(year as f64)
}

/// Reduce a date string to its year. Accepts `YYYY`, `YYYY-MM`, and
/// `YYYY-MM-DD`; the year must be positive (year values in the supported
/// graphs are always CE).
pub fn normalize_date_to_year(raw: &str) -> Result<f64> {
    match classify_value(raw) {
        Some(RawValue::DashDate(y)) | Some(RawValue::BareYearish(y)) => Ok(y),
        _ => {
            if raw.bytes().all(|b| b.is_ascii_digit()) && !raw.is_empty() && raw.len() <= 4 {
                Err(Error::data(format!("date {raw:?} has a non-positive year")))
            } else {
                Err(Error::data(format!(
                    "{raw:?} is not a YYYY, YYYY-MM, or YYYY-MM-DD date with a positive year"
                )))
            }
        }
    }
}

pub fn parse_numeric_triples(
    path: &Path,
    entities: &mut Vocab,
    relations: &mut Vocab,
    mode: InternMode,
) -> Result<(Vec<NumericTriple>, ParseLog)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut log = ParseLog::default();
    // (entity, attribute, value, dash_dated) in file order; kinds resolve
    // per attribute once the whole file is read.
    let mut raw: Vec<(u32, u32, f64, bool)> = Vec::new();
    let mut attr_forms: HashMap<u32, (bool, bool)> = HashMap::new(); // (any_date, any_decimal)

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (e, a, v) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(e), Some(a), Some(v), None) if !e.is_empty() && !a.is_empty() && !v.is_empty() => {
                (e, a, v)
            }
            _ => {
                log.value_dropped += 1;
                log::warn!("{}:{}: malformed numeric line dropped", path.display(), lineno);
                continue;
            }
        };
        if RESERVED_RELATIONS.contains(&a) {
            return Err(Error::parse(
                path,
                lineno,
                format!("attribute {a:?} is reserved for augmentation edges"),
            ));
        }
        let value = match classify_value(v) {
            Some(value) => value,
            None => {
                log.value_dropped += 1;
                continue;
            }
        };
        let ids = match mode {
            InternMode::Grow => Some((entities.intern(e), relations.intern(a))),
            InternMode::LookupOnly => match (entities.lookup(e), relations.lookup(a)) {
                (Some(ei), Some(ai)) => Some((ei, ai)),
                _ => None,
            },
        };
        let (ei, ai) = match ids {
            Some(ids) => ids,
            None => {
                log.unseen_dropped += 1;
                continue;
            }
        };
        let forms = attr_forms.entry(ai).or_insert((false, false));
        let (v, dash) = match value {
            RawValue::DashDate(y) => {
                forms.0 = true;
                (y, true)
            }
            RawValue::BareYearish(v) => (v, false),
            RawValue::Decimal(v) => {
                forms.1 = true;
                (v, false)
            }
        };
        raw.push((ei, ai, v, dash));
    }

    for (&attr, &(any_date, any_decimal)) in &attr_forms {
        if any_date && any_decimal {
            return Err(Error::data(format!(
                "attribute {:?} mixes date-form and decimal-form values; kind is ambiguous",
                relations.resolve(attr)
            )));
        }
    }

    let triples = raw
        .into_iter()
        .map(|(e, a, v, _)| {
            let kind = if attr_forms[&a].0 { ValueKind::Year } else { ValueKind::Quantity };
            NumericTriple { entity: EntityId(e), attribute: RelationId(a), value: v, kind }
        })
        .collect();

    if log.value_dropped > 0 {
        log::warn!("{}: dropped {} unparseable numeric lines", path.display(), log.value_dropped);
    }
    if log.unseen_dropped > 0 {
        log::warn!(
            "{}: dropped {} numeric triples with unseen entities/attributes",
            path.display(),
            log.unseen_dropped
        );
    }
    Ok((triples, log))
}

/// Input file locations for one dataset. A bare `numeric_train` with no
/// valid/test numeric files means all literals belong to the training graph;
/// explicit per-split files make the numeric split an input.
#[derive(Clone, Debug, Default)]
pub struct SplitPaths {
    pub train: PathBuf,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub numeric_train: Option<PathBuf>,
    pub numeric_valid: Option<PathBuf>,
    pub numeric_test: Option<PathBuf>,
    /// Set when `train` is an augmenter-written file, whose chain/parent
    /// edges use relations that raw input may not.
    pub train_is_augmented: bool,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadReport {
    pub train: ParseLog,
    pub valid: ParseLog,
    pub test: ParseLog,
    /// valid/test triples removed because they duplicate an earlier split.
    pub cross_split_dropped: usize,
}

impl DatasetSplit {
    pub fn load(paths: &SplitPaths) -> Result<(Self, LoadReport)> {
        let mut graph = KnowledgeGraph::default();
        let mut report = LoadReport::default();

        let reserved =
            if paths.train_is_augmented { ReservedPolicy::Allow } else { ReservedPolicy::Reject };
        let (triples, log) = parse_entity_triples_with(
            &paths.train,
            &mut graph.entities,
            &mut graph.relations,
            InternMode::Grow,
            reserved,
        )?;
        graph.entity_triples = triples;
        report.train = log;
        if let Some(p) = &paths.numeric_train {
            let (numeric, log) =
                parse_numeric_triples(p, &mut graph.entities, &mut graph.relations, InternMode::Grow)?;
            graph.numeric_triples = numeric;
            report.train.duplicates += log.duplicates;
            report.train.value_dropped += log.value_dropped;
        }

        let mut seen: HashSet<EntityTriple> = graph.entity_triples.iter().copied().collect();
        let mut load_eval = |entity_path: &Option<PathBuf>,
                             numeric_path: &Option<PathBuf>,
                             graph: &mut KnowledgeGraph,
                             log_slot: &mut ParseLog,
                             cross: &mut usize|
         -> Result<EvalTriples> {
            let mut split = EvalTriples::default();
            if let Some(p) = entity_path {
                let (triples, log) = parse_entity_triples(
                    p,
                    &mut graph.entities,
                    &mut graph.relations,
                    InternMode::LookupOnly,
                )?;
                *log_slot = log;
                for t in triples {
                    if seen.insert(t) {
                        split.entity.push(t);
                    } else {
                        *cross += 1;
                    }
                }
            }
            if let Some(p) = numeric_path {
                let (numeric, log) = parse_numeric_triples(
                    p,
                    &mut graph.entities,
                    &mut graph.relations,
                    InternMode::LookupOnly,
                )?;
                log_slot.value_dropped += log.value_dropped;
                log_slot.unseen_dropped += log.unseen_dropped;
                split.numeric = numeric;
            }
            Ok(split)
        };

        let valid = load_eval(
            &paths.valid,
            &paths.numeric_valid,
            &mut graph,
            &mut report.valid,
            &mut report.cross_split_dropped,
        )?;
        let test = load_eval(
            &paths.test,
            &paths.numeric_test,
            &mut graph,
            &mut report.test,
            &mut report.cross_split_dropped,
        )?;

        if report.cross_split_dropped > 0 {
            log::warn!(
                "dropped {} valid/test triples duplicating an earlier split",
                report.cross_split_dropped
            );
        }
        Ok((DatasetSplit { train: graph, valid, test }, report))
    }
}

/// Dataset-level counts matching the shape of standard benchmark tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub entity_triples: usize,
    pub attributes: usize,
    pub numeric_triples: usize,
}

pub fn graph_stats(split: &DatasetSplit) -> GraphStats {
    let mut relations = HashSet::new();
    let mut attributes = HashSet::new();
    let mut entity_triples = 0usize;
    let mut numeric_triples = 0usize;

    let mut count_entity = |triples: &[EntityTriple]| {
        entity_triples += triples.len();
        for t in triples {
            relations.insert(t.relation);
        }
    };
    count_entity(&split.train.entity_triples);
    count_entity(&split.valid.entity);
    count_entity(&split.test.entity);

    let mut count_numeric = |triples: &[NumericTriple]| {
        numeric_triples += triples.len();
        for t in triples {
            attributes.insert(t.attribute);
        }
    };
    count_numeric(&split.train.numeric_triples);
    count_numeric(&split.valid.numeric);
    count_numeric(&split.test.numeric);

    GraphStats {
        entities: split.train.entities.n_original(),
        relations: relations.len(),
        entity_triples,
        attributes: attributes.len(),
        numeric_triples,
    }
}

impl GraphStats {
    /// Flat key -> integer JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Write entity triples as `subject\trelation\tobject` lines using surface
/// forms, the same format the parsers accept.
pub fn write_entity_triples(
    path: &Path,
    triples: &[EntityTriple],
    entities: &Vocab,
    relations: &Vocab,
) -> Result<()> {
    let mut out = String::new();
    for t in triples {
        out.push_str(entities.resolve(t.subject.0));
        out.push('\t');
        out.push_str(relations.resolve(t.relation.0));
        out.push('\t');
        out.push_str(entities.resolve(t.object.0));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
