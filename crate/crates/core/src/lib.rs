//! Measurement pipeline for source-code corpora.
//!
//! The crate takes a set of samples (each a directory tree tagged with a year
//! and a category), and derives:
//!
//! - physical line counts per language ([`linecount`]),
//! - backfired function points ([`sizing`]) and Basic COCOMO estimates ([`cocomo`]),
//! - per-function cyclomatic complexity, Halstead volume and the maintainability
//!   index ([`structure`]),
//! - textual and structural code clones ([`clonediff`], [`cloneast`]) and a fuzzy-hash
//!   triage of the textual matches ([`clonetriage`]),
//! - growth regressions and distribution tests over the per-sample numbers ([`trends`]).
//!
//! [`report`] glues the stages together and writes the on-disk artifacts.

pub mod cloneast;
pub mod clonediff;
pub mod clonetriage;
pub mod cocomo;
pub mod corpus;
pub mod lexer;
pub mod linecount;
pub mod report;
pub mod sizing;
pub mod structure;
pub mod trends;

pub use corpus::{Category, Corpus, LanguageId, Sample, SampleManifest, SourceFile};
pub use linecount::LineTally;
