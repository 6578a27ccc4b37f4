//! Scientific claim verification at the systems level: corpus and claim
//! data model, TF-IDF abstract retrieval, pluggable rationale-selection and
//! label-prediction stages, pipeline composition with oracle ablations,
//! two-level evaluation metrics, distractor-corpus construction, and
//! dataset statistics.
//!
//! The task: given a claim and a corpus of abstracts, predict the evidence
//! abstracts, a SUPPORTS/REFUTES label for each, and the rationale
//! sentences justifying each label. Everything here is deterministic for
//! fixed inputs, flags, and seed.

pub mod corpus_builder;
pub mod data;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod retrieval;
pub mod stages;

pub use data::{AbstractDoc, Claim, Corpus, GoldEvidence, Label, Prediction};
pub use error::{Error, Result};

/// Version of the on-disk file formats (corpus, claims, predictions, score
/// files, manifests, persisted indexes).
pub const DATA_FORMAT_VERSION: u32 = 1;
