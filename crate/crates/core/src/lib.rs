//! Temporal user-level depression modelling.
//!
//! The crate turns per-user post timelines into a sequence of two-week
//! episodes, scores every episode against the ten PHQ-9 style symptoms,
//! derives posting-absence and recurrence/inertia patterns, attaches
//! averaged sentence embeddings, and classifies the resulting sequence
//! with a bidirectional LSTM and additive attention.
//!
//! Module map:
//!
//! - [`corpus`]: timelines, corpus files, inclusion filters, synthetic corpora
//! - [`preprocess`]: post cleaning and "proper post" selection
//! - [`symptoms`]: symptom taxonomy, detectors, per-day expression vectors
//! - [`scoring`]: sliding episodes, depression scores, levels, absence ratio
//! - [`temporal`]: binarized episodes, recurrence frequency, inertia
//! - [`semantics`]: sentence encoders and day/episode/history averages
//! - [`pipeline`]: glue that computes every per-user feature once
//! - [`tud`]: the classifier, its baselines, training and checkpoints
//! - [`analysis`]: dataset statistics, lexicon intensity, t-tests, CV, grids
//! - [`run`]: resolved run configuration shared with the `tud` binary

pub mod analysis;
pub mod corpus;
mod error;
pub mod pipeline;
pub mod preprocess;
pub mod run;
pub mod scoring;
pub mod semantics;
pub mod symptoms;
pub mod temporal;
pub mod tud;

pub use error::{Error, Result};

/// SplitMix64 step, used to derive independent child seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
