//! Recurrence and inertia of depressive episodes.
//!
//! Episodes with activity are binarized (depressed or not), the binary
//! series is run-length compressed, and two user-level scalars are derived:
//! the recurrence frequency (interior `1-0-1` cycles over the compressed
//! length) and the inertia (adjacent depressed pairs over the series length).

use serde::{Deserialize, Serialize};

use crate::scoring::{Level, Sensitivity};

/// Per-episode values needed for binarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredEpisode {
    pub dep_score: u32,
    pub level: Level,
    pub inactive: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    /// Inertia score.
    pub is: f64,
    /// Depression recurrence frequency score.
    pub drfs: f64,
}

/// One bit per active episode: Standard scoring marks level ≥ Minimal,
/// MDE marks any positive score.
pub fn binarize(episodes: &[ScoredEpisode], sensitivity: Sensitivity) -> Vec<u8> {
    episodes
        .iter()
        .filter(|e| !e.inactive)
        .map(|e| {
            let depressed = match sensitivity {
                Sensitivity::Standard => e.level >= Level::Minimal,
                Sensitivity::Mde => e.dep_score > 0,
            };
            u8::from(depressed)
        })
        .collect()
}

/// Collapse runs of equal values.
pub fn compress(bte: &[u8]) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::with_capacity(bte.len());
    for &b in bte {
        if out.last() != Some(&b) {
            out.push(b);
        }
    }
    out
}

/// Interior zeros flanked by ones.
pub fn cycle_count(cbte: &[u8]) -> usize {
    if cbte.len() <= 2 {
        return 0;
    }
    cbte.windows(3)
        .filter(|w| w[0] == 1 && w[1] == 0 && w[2] == 1)
        .count()
}

pub fn drfs(bte: &[u8]) -> f64 {
    let cbte = compress(bte);
    if cbte.is_empty() {
        return 0.0;
    }
    cycle_count(&cbte) as f64 / cbte.len() as f64
}

pub fn inertia(bte: &[u8]) -> f64 {
    if bte.is_empty() {
        return 0.0;
    }
    let pairs = bte.windows(2).filter(|w| w[0] == 1 && w[1] == 1).count();
    pairs as f64 / bte.len() as f64
}

pub fn temporal_profile(bte: &[u8]) -> TemporalProfile {
    TemporalProfile {
        is: inertia(bte),
        drfs: drfs(bte),
    }
}
