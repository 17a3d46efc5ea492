//! Knowledge graph augmentation toolkit: numeric literal discretization,
//! bin-entity graph augmentation, translational/bilinear embedding training,
//! and ranking/regression evaluation.
//!
//! Pipeline shape: load TSV triples ([`graph`]), build per-attribute bin
//! dictionaries ([`discretize`]), rewrite numeric triples as entity triples
//! over bin entities ([`augment`]), train an embedding model ([`embed`]),
//! then score link prediction and value prediction ([`eval`]).

pub mod augment;
pub mod discretize;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod synth;
pub mod vocab;

pub use error::{Error, Result};
