//! Interned vocabularies mapping surface strings to dense integer ids.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense index into the entity vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

/// Dense index into the relation vocabulary. Numeric attributes share this
/// vocabulary with entity-triple relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// String interner with contiguous ids starting at 0. Entries added by the
/// augmenter (bin entities, reserved relations) are flagged as synthetic so
/// evaluation can tell them apart from original graph vocabulary.
#[derive(Clone, Debug, Default)]
pub struct Vocab {
    strings: Vec<String>,
    index: HashMap<String, u32>,
    synthetic: Vec<bool>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    /// Intern a surface string, returning its id. Existing strings keep
    /// their id; new strings get the next contiguous index.
    pub fn intern(&mut self, surface: &str) -> u32 {
        if let Some(&id) = self.index.get(surface) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(surface.to_owned());
        self.index.insert(surface.to_owned(), id);
        self.synthetic.push(false);
        id
    }

    /// Intern a synthetic (augmenter-created) entry. Errors if the surface
    /// string already exists, synthetic or not: bin names must never collide
    /// with original vocabulary.
    pub fn intern_synthetic(&mut self, surface: &str) -> Result<u32> {
        if self.index.contains_key(surface) {
            return Err(Error::data(format!(
                "synthetic vocabulary entry {surface:?} collides with an existing entry"
            )));
        }
        let id = self.strings.len() as u32;
        self.strings.push(surface.to_owned());
        self.index.insert(surface.to_owned(), id);
        self.synthetic.push(true);
        Ok(id)
    }

    pub fn lookup(&self, surface: &str) -> Option<u32> {
        self.index.get(surface).copied()
    }

    pub fn resolve(&self, id: u32) -> &str {
        &self.strings[id as usize]
    }

    pub fn is_synthetic(&self, id: u32) -> bool {
        self.synthetic[id as usize]
    }

    /// Flag an existing entry as synthetic. Used when reloading an augmented
    /// graph from disk, where bin entities are recognized by name rather
    /// than created fresh. Returns false when the surface string is absent.
    pub fn mark_synthetic(&mut self, surface: &str) -> bool {
        match self.index.get(surface) {
            Some(&id) => {
                self.synthetic[id as usize] = true;
                true
            }
            None => false,
        }
    }

    pub fn any_synthetic(&self) -> bool {
        self.synthetic.iter().any(|&s| s)
    }

    /// Number of non-synthetic entries.
    pub fn n_original(&self) -> usize {
        self.synthetic.iter().filter(|&&s| !s).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.strings.iter().enumerate().map(|(i, s)| (i as u32, s.as_str()))
    }
}
