//! Sliding two-week episodes, per-episode depression scores, depression
//! levels and absence ratios.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::UserTimeline;
use crate::symptoms::{dsev_for_day, Dsev, Symptom, SymptomDetector};
use crate::{Error, Result};

pub const EPISODE_DAYS: u32 = 14;
/// Symptoms scored after merging agitation and retardation.
pub const SCORED_SYMPTOMS: usize = 9;
pub const MAX_STANDARD_SCORE: u32 = 27;
pub const MAX_MDE_SCORE: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u32", try_from = "u32")]
pub enum Slide {
    One,
    Seven,
    Fourteen,
}

impl Slide {
    pub const ALL: [Slide; 3] = [Slide::One, Slide::Seven, Slide::Fourteen];

    pub fn days(self) -> u32 {
        match self {
            Slide::One => 1,
            Slide::Seven => 7,
            Slide::Fourteen => 14,
        }
    }
}

impl From<Slide> for u32 {
    fn from(s: Slide) -> u32 {
        s.days()
    }
}

impl TryFrom<u32> for Slide {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            1 => Ok(Slide::One),
            7 => Ok(Slide::Seven),
            14 => Ok(Slide::Fourteen),
            other => Err(Error::Config(format!(
                "slide must be 1, 7 or 14 (got {other})"
            ))),
        }
    }
}

impl fmt::Display for Slide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.days())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clinical {
    Clinical,
    NonClinical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensitivity {
    Standard,
    Mde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScoringMode {
    pub clinical: Clinical,
    pub sensitivity: Sensitivity,
}

impl ScoringMode {
    pub const fn new(clinical: Clinical, sensitivity: Sensitivity) -> Self {
        ScoringMode {
            clinical,
            sensitivity,
        }
    }

    pub const fn standard(clinical: Clinical) -> Self {
        ScoringMode {
            clinical,
            sensitivity: Sensitivity::Standard,
        }
    }

    pub fn max_score(self) -> u32 {
        match self.sensitivity {
            Sensitivity::Standard => MAX_STANDARD_SCORE,
            Sensitivity::Mde => MAX_MDE_SCORE,
        }
    }

    pub fn with_sensitivity(self, sensitivity: Sensitivity) -> Self {
        ScoringMode {
            sensitivity,
            ..self
        }
    }

    /// Short label used in CSV output, e.g. `nonclinical-mde`.
    pub fn label(self) -> &'static str {
        match (self.clinical, self.sensitivity) {
            (Clinical::Clinical, Sensitivity::Standard) => "clinical",
            (Clinical::NonClinical, Sensitivity::Standard) => "nonclinical",
            (Clinical::Clinical, Sensitivity::Mde) => "clinical-mde",
            (Clinical::NonClinical, Sensitivity::Mde) => "nonclinical-mde",
        }
    }
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Denominator of the per-symptom day percentage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// Days with at least one raw post.
    #[default]
    ActiveDays,
    /// Every day of the window.
    WindowDays,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    None,
    Minimal,
    Mild,
    Moderate,
    ModeratelySevere,
    Severe,
}

impl Level {
    pub const ALL: [Level; 6] = [
        Level::None,
        Level::Minimal,
        Level::Mild,
        Level::Moderate,
        Level::ModeratelySevere,
        Level::Severe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Level::None => "None",
            Level::Minimal => "Minimal",
            Level::Mild => "Mild",
            Level::Moderate => "Moderate",
            Level::ModeratelySevere => "ModeratelySevere",
            Level::Severe => "Severe",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Standard score to level: `[0,4)` None, `[4,9)` Minimal, `[9,14)` Mild,
/// `[14,19)` Moderate, `[19,27)` Moderately severe, `27+` Severe.
pub fn level_of(dep_score: u32) -> Level {
    match dep_score {
        0..=3 => Level::None,
        4..=8 => Level::Minimal,
        9..=13 => Level::Mild,
        14..=18 => Level::Moderate,
        19..=26 => Level::ModeratelySevere,
        _ => Level::Severe,
    }
}

/// Level under a scoring sensitivity. MDE has a single threshold: any
/// positive score is a (minimal) depressive episode.
pub fn level_for(dep_score: u32, sensitivity: Sensitivity) -> Level {
    match sensitivity {
        Sensitivity::Standard => level_of(dep_score),
        Sensitivity::Mde if dep_score > 0 => Level::Minimal,
        Sensitivity::Mde => Level::None,
    }
}

/// Per-symptom score from the percentage of days it was expressed.
pub fn symptom_score_for_percent(percent: f64) -> u32 {
    if percent >= 85.0 {
        3
    } else if percent >= 50.0 {
        2
    } else if percent >= 20.0 {
        1
    } else {
        0
    }
}

/// Activity of one calendar day with at least one raw post.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub raw_posts: usize,
    /// Present when the day has at least one proper post.
    pub dsev: Option<Dsev>,
}

/// Group a preprocessed timeline by UTC day and compute each day's DSEV.
pub fn daily_records(timeline: &UserTimeline, detector: &dyn SymptomDetector) -> Vec<DayRecord> {
    let mut days: BTreeMap<NaiveDate, (usize, Vec<&str>)> = BTreeMap::new();
    for p in &timeline.posts {
        days.entry(p.day()).or_default().0 += 1;
    }
    for p in timeline.proper() {
        days.entry(p.day()).or_default().1.push(&p.text);
    }
    days.into_iter()
        .map(|(date, (raw_posts, texts))| DayRecord {
            date,
            raw_posts,
            dsev: (!texts.is_empty()).then(|| dsev_for_day(date, &texts, detector)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub start_day: NaiveDate,
    pub end_day: NaiveDate,
    /// One entry per day with a proper post.
    pub dsevs: Vec<Dsev>,
    pub active_days: u32,
    pub total_days: u32,
}

impl Episode {
    fn expressed_days(&self, s: Symptom) -> u32 {
        self.dsevs.iter().filter(|d| d.get(s)).count() as u32
    }

    fn psychomotor_days(&self) -> u32 {
        self.dsevs
            .iter()
            .filter(|d| d.get(Symptom::Agitation) || d.get(Symptom::Retardation))
            .count() as u32
    }

    /// Day counts of the nine scored symptoms (agitation/retardation merged).
    pub fn scored_symptom_days(&self) -> [u32; SCORED_SYMPTOMS] {
        [
            self.expressed_days(Symptom::Anhedonia),
            self.expressed_days(Symptom::LowMood),
            self.expressed_days(Symptom::SleepDisturbance),
            self.expressed_days(Symptom::Fatigue),
            self.expressed_days(Symptom::AppetiteChange),
            self.expressed_days(Symptom::Worthlessness),
            self.expressed_days(Symptom::ConcentrationProblems),
            self.psychomotor_days(),
            self.expressed_days(Symptom::SuicidalIdeation),
        ]
    }
}

/// Windows of up to 14 days starting at the first active day and advancing
/// by the slide until the start passes the last active day. The last
/// windows are truncated at the last active day.
pub fn build_episodes(days: &[DayRecord], slide: Slide) -> Vec<Episode> {
    let (Some(first), Some(last)) = (days.first(), days.last()) else {
        return Vec::new();
    };
    let (first, last) = (first.date, last.date);
    let mut episodes = Vec::new();
    let mut start = first;
    let mut lo = 0usize;
    while start <= last {
        let remaining = ((last - start).num_days() + 1) as u32;
        let total_days = remaining.min(EPISODE_DAYS);
        let end = start + Duration::days(total_days as i64 - 1);
        while lo < days.len() && days[lo].date < start {
            lo += 1;
        }
        let window = days[lo..].iter().take_while(|d| d.date <= end);
        let mut active_days = 0;
        let mut dsevs = Vec::new();
        for d in window {
            active_days += 1;
            if let Some(v) = d.dsev {
                dsevs.push(v);
            }
        }
        episodes.push(Episode {
            start_day: start,
            end_day: end,
            dsevs,
            active_days,
            total_days,
        });
        start += Duration::days(slide.days() as i64);
    }
    episodes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub dep_score: u32,
    pub clinically_depressed: bool,
    /// The episode had no active day; the score is a placeholder zero.
    pub inactive: bool,
}

/// Depression score of one episode.
pub fn depression_score(episode: &Episode, mode: ScoringMode) -> ScoreOutcome {
    depression_score_with(episode, mode, Denominator::ActiveDays)
}

pub fn depression_score_with(
    episode: &Episode,
    mode: ScoringMode,
    denominator: Denominator,
) -> ScoreOutcome {
    let denom = match denominator {
        Denominator::ActiveDays => episode.active_days,
        Denominator::WindowDays => episode.total_days,
    };
    if episode.active_days == 0 || denom == 0 {
        return ScoreOutcome {
            dep_score: 0,
            clinically_depressed: false,
            inactive: true,
        };
    }
    let counts = episode.scored_symptom_days();
    let percent = |days: u32| 100.0 * days as f64 / denom as f64;

    // indices 0 and 1 are anhedonia and low mood
    let clinically_depressed = counts[..2].iter().any(|&c| percent(c) >= 50.0);
    let raw: u32 = match mode.sensitivity {
        Sensitivity::Standard => counts
            .iter()
            .map(|&c| symptom_score_for_percent(percent(c)))
            .sum(),
        Sensitivity::Mde => counts.iter().filter(|&&c| c > 0).count() as u32,
    };
    let dep_score = match mode.clinical {
        Clinical::Clinical if !clinically_depressed => 0,
        _ => raw,
    };
    ScoreOutcome {
        dep_score,
        clinically_depressed,
        inactive: false,
    }
}

/// Fraction of window days without any raw post.
pub fn absence_ratio(episode: &Episode) -> f64 {
    debug_assert!(episode.total_days >= 1);
    (episode.total_days - episode.active_days) as f64 / episode.total_days as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symptoms::SymptomSet;

    #[test]
    fn slide_serializes_as_days() {
        assert_eq!(serde_json::to_string(&Slide::Seven).unwrap(), "7");
        assert_eq!(
            serde_json::from_str::<Slide>("14").unwrap(),
            Slide::Fourteen
        );
        assert!(serde_json::from_str::<Slide>("3").is_err());
    }

    fn d0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 5, 3).unwrap()
    }

    fn activity(n_days: i64) -> Vec<DayRecord> {
        (0..n_days)
            .map(|i| DayRecord {
                date: d0() + Duration::days(i),
                raw_posts: 1,
                dsev: Some(Dsev::zero(d0() + Duration::days(i))),
            })
            .collect()
    }

    /// `days[i]` lists the symptoms expressed on active day `i`.
    fn episode(active: u32, total: u32, days: &[&[Symptom]]) -> Episode {
        let dsevs = days
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Dsev::from_set(
                    d0() + Duration::days(i as i64),
                    s.iter().copied().collect::<SymptomSet>(),
                )
            })
            .collect();
        Episode {
            start_day: d0(),
            end_day: d0() + Duration::days(total as i64 - 1),
            dsevs,
            active_days: active,
            total_days: total,
        }
    }

    fn with_days(symptoms: &[(Symptom, usize)], active: u32) -> Episode {
        let mut days: Vec<Vec<Symptom>> = vec![Vec::new(); active as usize];
        for &(s, n) in symptoms {
            for d in days.iter_mut().take(n) {
                d.push(s);
            }
        }
        let refs: Vec<&[Symptom]> = days.iter().map(Vec::as_slice).collect();
        episode(active, 14, &refs)
    }

    const CS: ScoringMode = ScoringMode::standard(Clinical::Clinical);
    const NCS: ScoringMode = ScoringMode::standard(Clinical::NonClinical);
    const MDE: ScoringMode = ScoringMode::new(Clinical::NonClinical, Sensitivity::Mde);

    #[test]
    fn tiling_slide_14() {
        let eps = build_episodes(&activity(28), Slide::Fourteen);
        assert_eq!(eps.len(), 2);
        assert!(eps
            .iter()
            .all(|e| e.total_days == 14 && e.active_days == 14));
    }

    #[test]
    fn slide_7_truncates_tail() {
        let eps = build_episodes(&activity(28), Slide::Seven);
        let starts: Vec<i64> = eps
            .iter()
            .map(|e| (e.start_day - d0()).num_days())
            .collect();
        assert_eq!(starts, vec![0, 7, 14, 21]);
        let lens: Vec<u32> = eps.iter().map(|e| e.total_days).collect();
        assert_eq!(lens, vec![14, 14, 14, 7]);
    }

    #[test]
    fn slide_1_on_two_weeks() {
        let eps = build_episodes(&activity(14), Slide::One);
        assert_eq!(eps.len(), 14);
        assert_eq!(eps[0].total_days, 14);
        assert_eq!(eps.iter().filter(|e| e.total_days < 14).count(), 13);
        assert_eq!(eps[13].total_days, 1);
    }

    #[test]
    fn empty_timeline_has_no_episodes() {
        assert!(build_episodes(&[], Slide::One).is_empty());
    }

    #[test]
    fn gaps_are_inactive_days() {
        let mut days = activity(1);
        days.push(DayRecord {
            date: d0() + Duration::days(20),
            raw_posts: 3,
            dsev: None,
        });
        let eps = build_episodes(&days, Slide::Fourteen);
        assert_eq!(eps.len(), 2);
        assert_eq!((eps[0].active_days, eps[0].total_days), (1, 14));
        assert_eq!((eps[1].active_days, eps[1].total_days), (1, 7));
        assert!(eps[1].dsevs.is_empty());
    }

    #[test]
    fn clinical_trace() {
        let e = with_days(&[(Symptom::LowMood, 8), (Symptom::Fatigue, 3)], 14);
        assert_eq!(
            depression_score(&e, CS),
            ScoreOutcome {
                dep_score: 3,
                clinically_depressed: true,
                inactive: false
            }
        );
    }

    #[test]
    fn non_clinical_trace() {
        let e = with_days(&[(Symptom::LowMood, 5), (Symptom::Fatigue, 3)], 14);
        assert_eq!(depression_score(&e, CS).dep_score, 0);
        assert!(!depression_score(&e, CS).clinically_depressed);
        assert_eq!(depression_score(&e, NCS).dep_score, 2);
    }

    #[test]
    fn fifty_percent_boundary() {
        let e = with_days(&[(Symptom::Fatigue, 7)], 14);
        assert_eq!(depression_score(&e, NCS).dep_score, 2);
        let e = with_days(&[(Symptom::Anhedonia, 7)], 14);
        assert_eq!(
            depression_score(&e, CS),
            ScoreOutcome {
                dep_score: 2,
                clinically_depressed: true,
                inactive: false
            }
        );
    }

    #[test]
    fn mde_single_post() {
        let e = with_days(&[(Symptom::Fatigue, 1)], 14);
        assert_eq!(depression_score(&e, MDE).dep_score, 1);
        assert_eq!(level_for(1, Sensitivity::Mde), Level::Minimal);
    }

    #[test]
    fn no_symptoms_scores_zero_everywhere() {
        let e = with_days(&[], 14);
        for clinical in [Clinical::Clinical, Clinical::NonClinical] {
            for sens in [Sensitivity::Standard, Sensitivity::Mde] {
                let out = depression_score(&e, ScoringMode::new(clinical, sens));
                assert_eq!((out.dep_score, out.clinically_depressed), (0, false));
            }
        }
    }

    #[test]
    fn psychomotor_merge() {
        // agitation and retardation on different days merge to 8 of 14 days
        let mut days: Vec<Vec<Symptom>> = vec![Vec::new(); 14];
        for d in days.iter_mut().take(4) {
            d.push(Symptom::Agitation);
        }
        for d in days.iter_mut().skip(4).take(4) {
            d.push(Symptom::Retardation);
        }
        let refs: Vec<&[Symptom]> = days.iter().map(Vec::as_slice).collect();
        let e = episode(14, 14, &refs);
        assert_eq!(depression_score(&e, NCS).dep_score, 2);
        assert_eq!(depression_score(&e, MDE).dep_score, 1);
    }

    #[test]
    fn inactive_episode_flagged() {
        let e = episode(0, 14, &[]);
        let out = depression_score(&e, NCS);
        assert!(out.inactive);
        assert_eq!(out.dep_score, 0);
        assert_eq!(absence_ratio(&e), 1.0);
    }

    #[test]
    fn window_denominator_switch() {
        // 4 symptom days out of 7 active / 14 window days
        let mut e = with_days(&[(Symptom::Fatigue, 4)], 7);
        e.total_days = 14;
        assert_eq!(
            depression_score_with(&e, NCS, Denominator::ActiveDays).dep_score,
            2
        );
        assert_eq!(
            depression_score_with(&e, NCS, Denominator::WindowDays).dep_score,
            1
        );
    }

    #[test]
    fn levels() {
        assert_eq!(level_of(0), Level::None);
        assert_eq!(level_of(4), Level::Minimal);
        assert_eq!(level_of(27), Level::Severe);
        assert_eq!(level_for(0, Sensitivity::Mde), Level::None);
    }

    #[test]
    fn absence_ratio_values() {
        assert_eq!(absence_ratio(&episode(14, 14, &[])), 0.0);
        assert!((absence_ratio(&episode(10, 14, &[])) - 4.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn slide_parsing() {
        assert_eq!(Slide::try_from(7).unwrap(), Slide::Seven);
        assert!(Slide::try_from(3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_episode() -> impl Strategy<Value = Episode> {
            (1u32..=14).prop_flat_map(|total| {
                (Just(total), 0u32..=total).prop_flat_map(|(total, active)| {
                    proptest::collection::vec(0u16..1024, active as usize..=active as usize)
                        .prop_map(move |masks| {
                            let days: Vec<Vec<Symptom>> = masks
                                .iter()
                                .map(|m| {
                                    Symptom::ALL
                                        .into_iter()
                                        .filter(|s| m & (1 << s.id()) != 0)
                                        .collect()
                                })
                                .collect();
                            let refs: Vec<&[Symptom]> = days.iter().map(Vec::as_slice).collect();
                            episode(active, total, &refs)
                        })
                })
            })
        }

        proptest! {
            #[test]
            fn score_bounds_and_clinical_order(e in arb_episode()) {
                let cs = depression_score(&e, CS).dep_score;
                let ncs = depression_score(&e, NCS).dep_score;
                prop_assert!(cs <= ncs);
                prop_assert!(ncs <= MAX_STANDARD_SCORE);
                prop_assert!(depression_score(&e, MDE).dep_score <= MAX_MDE_SCORE);
                let ar = absence_ratio(&e);
                prop_assert!((0.0..=1.0).contains(&ar));
            }

            #[test]
            fn adding_symptom_day_never_lowers(e in arb_episode(), sym in 0usize..10, day in 0usize..14) {
                prop_assume!(!e.dsevs.is_empty());
                let mut f = e.clone();
                let idx = day % f.dsevs.len();
                f.dsevs[idx].set(Symptom::from_id(sym).unwrap());
                for mode in [NCS, MDE] {
                    prop_assert!(depression_score(&f, mode).dep_score >= depression_score(&e, mode).dep_score);
                }
            }

            #[test]
            fn slide_one_covers_every_day(offsets in proptest::collection::btree_set(0i64..60, 1..20)) {
                let days: Vec<DayRecord> = offsets.iter()
                    .map(|&o| DayRecord { date: d0() + Duration::days(o), raw_posts: 1, dsev: None })
                    .collect();
                let eps = build_episodes(&days, Slide::One);
                for d in &days {
                    prop_assert!(eps.iter().any(|e| e.start_day <= d.date && d.date <= e.end_day));
                }
                for e in &eps {
                    prop_assert_eq!((e.end_day - e.start_day).num_days() + 1, e.total_days as i64);
                    prop_assert!(e.active_days <= e.total_days && e.total_days <= 14);
                }
            }
        }
    }
}
