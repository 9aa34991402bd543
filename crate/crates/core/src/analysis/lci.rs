//! Lexicon component intensity: the share of a population's words that fall
//! into each lexicon category, and how that share differs between classes.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ttest::{mean, sample_std};
use crate::corpus::{Label, UserTimeline};
use crate::{Error, Result};

const BUILTIN: &str = include_str!("../../data/lci_lexicon.json");

#[derive(Debug, Clone)]
struct Category {
    exact: HashSet<String>,
    prefixes: Vec<String>,
}

impl Category {
    fn matches(&self, word: &str) -> bool {
        self.exact.contains(word) || self.prefixes.iter().any(|p| word.starts_with(p.as_str()))
    }
}

/// Word lists keyed by category name. An entry ending in `*` matches any
/// word with that prefix.
#[derive(Debug, Clone)]
pub struct CategoryLexicon {
    categories: BTreeMap<String, Category>,
}

impl CategoryLexicon {
    pub fn from_map(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::Config("category lexicon is empty".into()));
        }
        let mut categories = BTreeMap::new();
        for (name, words) in map {
            let mut cat = Category {
                exact: HashSet::new(),
                prefixes: Vec::new(),
            };
            for w in words {
                let w = w.trim().to_lowercase();
                match w.strip_suffix('*') {
                    Some("") => {
                        return Err(Error::Config(format!("bare wildcard in category {name}")))
                    }
                    Some(p) => cat.prefixes.push(p.to_string()),
                    None if w.is_empty() => {
                        return Err(Error::Config(format!("empty entry in category {name}")))
                    }
                    None => {
                        cat.exact.insert(w);
                    }
                }
            }
            categories.insert(name, cat);
        }
        Ok(CategoryLexicon { categories })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_map(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("bundled category lexicon is valid")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }
}

fn words(digest: &str) -> impl Iterator<Item = &str> {
    digest
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
}

/// Percentage of words in `digest` per category.
pub fn lci(digest: &str, lexicon: &CategoryLexicon) -> Result<BTreeMap<String, f64>> {
    let mut hits: BTreeMap<&str, usize> = lexicon.names().map(|n| (n, 0)).collect();
    let mut total = 0usize;
    for w in words(digest) {
        total += 1;
        let lower = w.to_lowercase();
        for (name, cat) in &lexicon.categories {
            if cat.matches(&lower) {
                *hits.get_mut(name.as_str()).expect("all categories seeded") += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Validation("digest contains no words".into()));
    }
    Ok(hits
        .into_iter()
        .map(|(n, h)| (n.to_string(), 100.0 * h as f64 / total as f64))
        .collect())
}

/// Concatenation of a population's proper posts.
pub fn build_digest<'a>(users: impl IntoIterator<Item = &'a UserTimeline>, label: Label) -> String {
    let mut out = String::new();
    for u in users.into_iter().filter(|u| u.label == label) {
        for p in u.proper() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&p.text);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LciRow {
    pub category: String,
    pub lci_d: f64,
    pub lci_c: f64,
    pub lci_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LciReport {
    pub dataset: String,
    pub rows: Vec<LciRow>,
}

pub fn lci_analysis(
    dataset: &str,
    depressed_digest: &str,
    control_digest: &str,
    lexicon: &CategoryLexicon,
) -> Result<LciReport> {
    let d = lci(depressed_digest, lexicon)?;
    let c = lci(control_digest, lexicon)?;
    let rows = d
        .into_iter()
        .zip(c)
        .map(|((category, lci_d), (_, lci_c))| LciRow {
            category,
            lci_d,
            lci_c,
            lci_dev: lci_d - lci_c,
        })
        .collect();
    Ok(LciReport {
        dataset: dataset.to_string(),
        rows,
    })
}

/// Cross-dataset summary of one category's deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub category: String,
    pub deviations: Vec<f64>,
    pub lci_dev_avg: f64,
    /// Sample (n − 1) standard deviation.
    pub lci_dev_std: f64,
}

pub fn summarize_deviations(category: &str, deviations: &[f64]) -> DeviationSummary {
    DeviationSummary {
        category: category.to_string(),
        deviations: deviations.to_vec(),
        lci_dev_avg: mean(deviations),
        lci_dev_std: sample_std(deviations),
    }
}

/// Per-category summary across several dataset reports built with the same lexicon.
pub fn lci_across_datasets(reports: &[LciReport]) -> Result<Vec<DeviationSummary>> {
    let Some(first) = reports.first() else {
        return Err(Error::Validation("no LCI reports to summarize".into()));
    };
    first
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let devs = reports
                .iter()
                .map(|r| match r.rows.get(i) {
                    Some(other) if other.category == row.category => Ok(other.lci_dev),
                    _ => Err(Error::Validation(format!(
                        "report {} lacks category {}",
                        r.dataset, row.category
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize_deviations(&row.category, &devs))
        })
        .collect()
}
