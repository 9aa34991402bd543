//! Per-user feature extraction.
//!
//! [`prepare_user`] does the mode-independent work (cleaning, daily symptom
//! vectors, daily embeddings, history embedding). [`user_features`] then
//! builds the episode series for one scoring mode and slide length.

use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, UserTimeline};
use crate::preprocess::{preprocess_timeline, PreprocessReport};
use crate::scoring::{
    absence_ratio, build_episodes, daily_records, depression_score_with, level_for, DayRecord,
    Denominator, Level, ScoringMode, Slide,
};
use crate::semantics::{atea, dlsea, elsea, Embedding, SentenceEncoder};
use crate::symptoms::SymptomDetector;
use crate::temporal::{binarize, temporal_profile, ScoredEpisode, TemporalProfile};
use crate::Result;

/// Mode-independent per-user data.
#[derive(Debug, Clone)]
pub struct PreparedUser {
    pub user_id: String,
    pub label: Label,
    pub days: Vec<DayRecord>,
    /// Day-level embedding average, aligned with `days`; `None` for days
    /// whose posts were all removed during cleaning.
    pub day_embeddings: Vec<Option<Embedding>>,
    pub atea: Embedding,
    pub report: PreprocessReport,
}

pub fn prepare_user(
    timeline: &UserTimeline,
    detector: &dyn SymptomDetector,
    encoder: &dyn SentenceEncoder,
) -> PreparedUser {
    let (timeline, report) = if timeline.is_preprocessed() {
        let n = timeline.posts.len();
        let kept = timeline.proper().len();
        let report = PreprocessReport {
            input_count: n,
            kept_count: kept,
            ..Default::default()
        };
        (timeline.clone(), report)
    } else {
        preprocess_timeline(timeline)
    };
    let days = daily_records(&timeline, detector);
    let proper = timeline.proper();
    let mut day_embeddings = Vec::with_capacity(days.len());
    let mut cursor = 0usize;
    for d in &days {
        while cursor < proper.len() && proper[cursor].day() < d.date {
            cursor += 1;
        }
        let texts: Vec<&str> = proper[cursor..]
            .iter()
            .take_while(|p| p.day() == d.date)
            .map(|p| p.text.as_str())
            .collect();
        cursor += texts.len();
        day_embeddings.push((!texts.is_empty()).then(|| dlsea(&texts, encoder)));
    }
    PreparedUser {
        user_id: timeline.user_id.clone(),
        label: timeline.label,
        atea: atea(&timeline, encoder),
        days,
        day_embeddings,
        report,
    }
}

/// Prepare every user, in corpus order.
pub fn prepare_corpus(
    corpus: &Corpus,
    detector: &dyn SymptomDetector,
    encoder: &dyn SentenceEncoder,
) -> Vec<PreparedUser> {
    corpus
        .users
        .par_iter()
        .map(|u| prepare_user(u, detector, encoder))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFeatures {
    pub start_day: NaiveDate,
    pub end_day: NaiveDate,
    pub total_days: u32,
    pub active_days: u32,
    pub dep_score: u32,
    pub level: Level,
    pub clinically_depressed: bool,
    pub inactive: bool,
    pub absence_ratio: f64,
    /// Episode-level embedding average over active days.
    pub embedding: Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSettings {
    pub mode: ScoringMode,
    pub slide: Slide,
    #[serde(default)]
    pub denominator: Denominator,
}

#[derive(Debug, Clone)]
pub struct UserFeatures {
    pub user_id: String,
    pub label: Label,
    pub settings: FeatureSettings,
    pub episodes: Vec<EpisodeFeatures>,
    pub bte: Vec<u8>,
    pub profile: TemporalProfile,
    pub atea: Embedding,
}

pub fn user_features(user: &PreparedUser, settings: FeatureSettings) -> UserFeatures {
    let dim = user.atea.dim();
    let episodes = build_episodes(&user.days, settings.slide);
    let mut out = Vec::with_capacity(episodes.len());
    let mut lo = 0usize;
    for ep in &episodes {
        while lo < user.days.len() && user.days[lo].date < ep.start_day {
            lo += 1;
        }
        let window = user.days[lo..]
            .iter()
            .zip(&user.day_embeddings[lo..])
            .take_while(|(d, _)| d.date <= ep.end_day)
            .filter_map(|(_, e)| e.as_ref());
        let embedding = elsea(window, dim);
        let score = depression_score_with(ep, settings.mode, settings.denominator);
        out.push(EpisodeFeatures {
            start_day: ep.start_day,
            end_day: ep.end_day,
            total_days: ep.total_days,
            active_days: ep.active_days,
            dep_score: score.dep_score,
            level: level_for(score.dep_score, settings.mode.sensitivity),
            clinically_depressed: score.clinically_depressed,
            inactive: score.inactive,
            absence_ratio: absence_ratio(ep),
            embedding,
        });
    }
    let scored: Vec<ScoredEpisode> = out
        .iter()
        .map(|e| ScoredEpisode {
            dep_score: e.dep_score,
            level: e.level,
            inactive: e.inactive,
        })
        .collect();
    let bte = binarize(&scored, settings.mode.sensitivity);
    UserFeatures {
        user_id: user.user_id.clone(),
        label: user.label,
        settings,
        profile: temporal_profile(&bte),
        bte,
        episodes: out,
        atea: user.atea.clone(),
    }
}

pub fn corpus_features(users: &[PreparedUser], settings: FeatureSettings) -> Vec<UserFeatures> {
    users
        .par_iter()
        .map(|u| user_features(u, settings))
        .collect()
}

pub const FEATURE_CSV_HEADER: [&str; 12] = [
    "user_id",
    "label",
    "episode_start",
    "total_days",
    "active_days",
    "dep_score",
    "level",
    "absence_ratio",
    "mode",
    "slide",
    "is",
    "drfs",
];

/// One row per episode; the temporal scalars repeat on every row of a user.
pub fn write_feature_csv(w: impl Write, users: &[UserFeatures]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FEATURE_CSV_HEADER)?;
    for u in users {
        for e in &u.episodes {
            out.write_record([
                u.user_id.clone(),
                u.label.to_string(),
                e.start_day.format("%Y-%m-%d").to_string(),
                e.total_days.to_string(),
                e.active_days.to_string(),
                e.dep_score.to_string(),
                e.level.to_string(),
                format!("{:.6}", e.absence_ratio),
                u.settings.mode.label().to_string(),
                u.settings.slide.to_string(),
                format!("{:.6}", u.profile.is),
                format!("{:.6}", u.profile.drfs),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize, SynthSpec};
    use crate::scoring::Clinical;
    use crate::semantics::HashingEncoder;
    use crate::symptoms::LexiconDetector;

    #[test]
    fn features_on_synthetic_users() {
        let corpus = synthesize(&SynthSpec {
            n_depressed: 2,
            n_control: 2,
            ..Default::default()
        })
        .unwrap();
        let det = LexiconDetector::builtin();
        let enc = HashingEncoder::new(16, 0).unwrap();
        let prepared = prepare_corpus(&corpus, &det, &enc);
        assert_eq!(prepared.len(), 4);
        for p in &prepared {
            assert_eq!(p.days.len(), p.day_embeddings.len());
            assert_eq!(
                p.report.kept_count + p.report.removed_total(),
                p.report.input_count
            );
        }
        let settings = FeatureSettings {
            mode: ScoringMode::standard(Clinical::NonClinical),
            slide: Slide::Fourteen,
            denominator: Denominator::ActiveDays,
        };
        let feats = corpus_features(&prepared, settings);
        for f in &feats {
            // 120-day history at slide 14
            assert_eq!(f.episodes.len(), 9);
            assert_eq!(
                f.bte.len(),
                f.episodes.iter().filter(|e| !e.inactive).count()
            );
            assert!(f
                .episodes
                .iter()
                .all(|e| e.embedding.dim() == 16 && e.embedding.is_finite()));
        }
        let dep: f64 = feats[..2]
            .iter()
            .flat_map(|f| &f.episodes)
            .map(|e| e.dep_score as f64)
            .sum();
        let ctl: f64 = feats[2..]
            .iter()
            .flat_map(|f| &f.episodes)
            .map(|e| e.dep_score as f64)
            .sum();
        assert!(dep > ctl);

        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &feats).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), FEATURE_CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 1 + 4 * 9);
    }

    #[test]
    fn preprocessed_timelines_are_not_cleaned_twice() {
        let corpus = synthesize(&SynthSpec {
            n_depressed: 1,
            n_control: 1,
            ..Default::default()
        })
        .unwrap();
        let det = LexiconDetector::builtin();
        let enc = HashingEncoder::new(8, 0).unwrap();
        let (clean, _) = preprocess_timeline(&corpus.users[0]);
        let a = prepare_user(&corpus.users[0], &det, &enc);
        let b = prepare_user(&clean, &det, &enc);
        assert_eq!(a.days, b.days);
        assert_eq!(a.atea, b.atea);
    }
}
