//! Graph augmentation: turn numeric triples into entity triples over bin
//! entities, plus structural edges between the bins themselves.
//!
//! Every numeric triple `(e, a, v)` becomes one entity triple `(e, a, bin)`
//! per bin covering `v`, reusing the attribute as the relation. Bins of each
//! level are chained in value order with `kga:next` edges; hierarchy bins
//! point at their enclosing bin with `kga:parent`. Bin entities and the two
//! reserved relations are interned as synthetic vocabulary so evaluation can
//! keep ranking candidates to original entities.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::discretize::BinSet;
use crate::error::{Error, Result};
use crate::graph::{EntityTriple, KnowledgeGraph};
use crate::vocab::{EntityId, RelationId};

pub const NEXT_RELATION: &str = "kga:next";
pub const PARENT_RELATION: &str = "kga:parent";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AugmentSummary {
    pub bin_entities: usize,
    pub assignment_triples: usize,
    /// Assignments that collapsed onto an already-emitted (e, a, bin).
    pub duplicate_assignments: usize,
    pub chain_triples: usize,
    pub parent_triples: usize,
}

#[derive(Clone, Debug)]
pub struct Augmented {
    pub graph: KnowledgeGraph,
    /// Per attribute: global bin index -> bin entity id.
    pub bin_entities: BTreeMap<String, Vec<EntityId>>,
    pub next_relation: Option<RelationId>,
    pub parent_relation: Option<RelationId>,
    pub summary: AugmentSummary,
}

/// Augment a training graph in place with the given bin dictionaries.
/// `chaining` controls `kga:next` edges only; `kga:parent` edges always
/// accompany hierarchy bins, since without them the levels would be
/// disconnected from each other.
pub fn augment(mut graph: KnowledgeGraph, bins: &BinSet, chaining: bool) -> Result<Augmented> {
    for t in &graph.numeric_triples {
        let attr = graph.relations.resolve(t.attribute.0);
        if !bins.attributes.contains_key(attr) {
            return Err(Error::data(format!(
                "attribute {attr:?} has numeric triples but no bin dictionary"
            )));
        }
    }

    // Bin entities first (attribute order, then global bin order), then the
    // reserved relations: interning order fixes the id layout.
    let mut bin_entities: BTreeMap<String, Vec<EntityId>> = BTreeMap::new();
    let mut summary = AugmentSummary::default();
    for (attr, dict) in &bins.attributes {
        if graph.relations.lookup(attr).is_none() {
            log::warn!("bin dictionary for {attr:?} matches no numeric triples in this graph");
        }
        let ids = dict
            .bins
            .iter()
            .map(|b| graph.entities.intern_synthetic(&b.name).map(EntityId))
            .collect::<Result<Vec<_>>>()?;
        summary.bin_entities += ids.len();
        bin_entities.insert(attr.clone(), ids);
    }

    let chain_wanted = chaining
        && bins
            .attributes
            .values()
            .any(|d| (0..d.n_levels()).any(|l| d.level_range(l).len() >= 2));
    let next_relation = if chain_wanted {
        Some(RelationId(graph.relations.intern_synthetic(NEXT_RELATION)?))
    } else {
        None
    };
    let parent_wanted = bins.attributes.values().any(|d| d.bins.iter().any(|b| b.parent.is_some()));
    let parent_relation = if parent_wanted {
        Some(RelationId(graph.relations.intern_synthetic(PARENT_RELATION)?))
    } else {
        None
    };

    // Assignment triples, in numeric-triple order. Distinct values sharing a
    // bin make duplicates; keep the first of each (e, a, bin).
    let mut new_triples = Vec::new();
    let mut seen: HashSet<(u32, u32, u32)> = HashSet::new();
    for t in &graph.numeric_triples {
        let attr = graph.relations.resolve(t.attribute.0);
        let dict = &bins.attributes[attr];
        let ids = &bin_entities[attr];
        for g in dict.assign(t.value) {
            let bin = ids[g];
            if seen.insert((t.entity.0, t.attribute.0, bin.0)) {
                new_triples.push(EntityTriple::new(t.entity, t.attribute, bin));
                summary.assignment_triples += 1;
            } else {
                summary.duplicate_assignments += 1;
            }
        }
    }

    if let Some(next) = next_relation {
        for (attr, dict) in &bins.attributes {
            let ids = &bin_entities[attr];
            for l in 0..dict.n_levels() {
                let range = dict.level_range(l);
                for i in range.start..range.end.saturating_sub(1) {
                    new_triples.push(EntityTriple::new(ids[i], next, ids[i + 1]));
                    summary.chain_triples += 1;
                }
            }
        }
    }

    if let Some(parent) = parent_relation {
        for (attr, dict) in &bins.attributes {
            let ids = &bin_entities[attr];
            for (g, bin) in dict.bins.iter().enumerate() {
                if let Some(p) = bin.parent {
                    new_triples.push(EntityTriple::new(ids[g], parent, ids[p as usize]));
                    summary.parent_triples += 1;
                }
            }
        }
    }

    graph.entity_triples.extend(new_triples);
    Ok(Augmented { graph, bin_entities, next_relation, parent_relation, summary })
}
