//! Curation toolkit for vulnerability-patch datasets.
//!
//! The pipeline: collect patches and group their changes per base unit
//! ([`ingest`]), represent each group's change as an encoded syntax-tree edit
//! script ([`tree`]), optionally drop noise-only groups ([`cleaner`]), decide
//! per vulnerability whether the compound patch fixes one flaw repeated in
//! many places or a genuinely multi-unit flaw ([`classify`]), produce
//! leakage-free dataset splits ([`split`]), and score detector predictions at
//! both the base-unit and the whole-vulnerability level ([`metrics`]).

pub mod cleaner;
pub mod classify;
pub mod ingest;
pub mod jsonl;
pub mod metrics;
pub mod seq;
pub mod split;
pub mod tree;

pub use classify::{ClassificationResult, ClassifierConfig, Label};
pub use ingest::{BaseUnit, BaseUnitKind, ChangeGroup, VulnerabilityRecord};
pub use tree::{EditScript, SyntaxTree, TokenSequence};
