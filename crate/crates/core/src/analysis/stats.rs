//! Per-user posting statistics and their class-level comparison.

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ttest::{mean, sample_std, welch_t};
use crate::corpus::{Corpus, Label, UserTimeline};
use crate::pipeline::UserFeatures;
use crate::preprocess::{preprocess_timeline, sentence_count};
use crate::scoring::Level;
use crate::Result;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStats {
    pub n_tweets: usize,
    pub n_proper_tweets: usize,
    /// Calendar days from first to last post, inclusive.
    pub n_days: u32,
    /// Mean gap between consecutive posts, in days.
    pub afp: f64,
    /// Sample standard deviation of those gaps; 0 with fewer than two gaps.
    pub fpf: f64,
    /// Mean whitespace tokens per proper post.
    pub avg_tweet_len: f64,
    pub avg_sents: f64,
}

pub fn user_stats(timeline: &UserTimeline) -> UserStats {
    let timeline = if timeline.is_preprocessed() {
        Cow::Borrowed(timeline)
    } else {
        Cow::Owned(preprocess_timeline(timeline).0)
    };
    let gaps: Vec<f64> = timeline
        .posts
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp).num_seconds() as f64 / SECONDS_PER_DAY)
        .collect();
    let proper = timeline.proper();
    let lens: Vec<f64> = proper
        .iter()
        .map(|p| p.text.split_whitespace().count() as f64)
        .collect();
    let sents: Vec<f64> = proper
        .iter()
        .map(|p| sentence_count(&p.text) as f64)
        .collect();
    UserStats {
        n_tweets: timeline.posts.len(),
        n_proper_tweets: proper.len(),
        n_days: timeline.span_days(),
        afp: mean(&gaps),
        fpf: if gaps.len() >= 2 {
            sample_std(&gaps)
        } else {
            0.0
        },
        avg_tweet_len: mean(&lens),
        avg_sents: mean(&sents),
    }
}

/// One statistic compared between the two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatComparison {
    pub name: String,
    pub depressed_mean: f64,
    pub depressed_std: f64,
    pub control_mean: f64,
    pub control_std: f64,
    /// Welch test, absent when a class has fewer than two users.
    pub t: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub n_depressed: usize,
    pub n_control: usize,
    pub rows: Vec<StatComparison>,
}

pub fn dataset_stats(corpus: &Corpus) -> Result<DatasetStats> {
    let stats: Vec<(Label, UserStats)> = corpus
        .users
        .iter()
        .map(|u| (u.label, user_stats(u)))
        .collect();
    type Getter = fn(&UserStats) -> f64;
    let columns: [(&str, Getter); 7] = [
        ("n_tweets", |s| s.n_tweets as f64),
        ("n_proper_tweets", |s| s.n_proper_tweets as f64),
        ("n_days", |s| s.n_days as f64),
        ("afp", |s| s.afp),
        ("fpf", |s| s.fpf),
        ("avg_tweet_len", |s| s.avg_tweet_len),
        ("avg_sents", |s| s.avg_sents),
    ];
    let mut rows = Vec::with_capacity(columns.len());
    for (name, get) in columns {
        let pick = |label| {
            stats
                .iter()
                .filter(|(l, _)| *l == label)
                .map(|(_, s)| get(s))
                .collect::<Vec<_>>()
        };
        let (d, c) = (pick(Label::Depressed), pick(Label::Control));
        let test = if d.len() >= 2 && c.len() >= 2 {
            Some(welch_t(&d, &c)?)
        } else {
            None
        };
        rows.push(StatComparison {
            name: name.to_string(),
            depressed_mean: mean(&d),
            depressed_std: sample_std(&d),
            control_mean: mean(&c),
            control_std: sample_std(&c),
            t: test.map(|t| t.t),
            p: test.map(|t| t.p),
        });
    }
    Ok(DatasetStats {
        name: corpus.name.clone(),
        n_depressed: corpus.count(Label::Depressed),
        n_control: corpus.count(Label::Control),
        rows,
    })
}

/// Share of active episodes per level, per class. MDE-positive episodes are
/// reported under `Minimal`.
pub fn level_distribution(users: &[UserFeatures]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for u in users {
        let row = counts.entry(u.label.to_string()).or_default();
        for level in Level::ALL {
            row.entry(level.to_string()).or_insert(0);
        }
        for e in u.episodes.iter().filter(|e| !e.inactive) {
            *row.entry(e.level.to_string()).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(label, row)| {
            let total: usize = row.values().sum();
            let shares = row
                .into_iter()
                .map(|(k, n)| {
                    (
                        k,
                        if total == 0 {
                            0.0
                        } else {
                            n as f64 / total as f64
                        },
                    )
                })
                .collect();
            (label, shares)
        })
        .collect()
}
