//! Corpus data model, JSON-lines corpus files, inclusion filters and the
//! seeded synthetic corpus generator.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::symptoms::{Symptom, SymptomLexicon, SYMPTOM_COUNT};
use crate::{Error, Result};

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

mod ts_format {
    use chrono::{DateTime, NaiveDateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.format(super::TS_FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&raw, super::TS_FORMAT)
            .map(|n| n.and_utc())
            .map_err(|e| serde::de::Error::custom(format!("bad timestamp {raw:?}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    #[serde(rename = "ts", with = "ts_format")]
    pub timestamp: DateTime<Utc>,
    pub text: String,
    #[serde(rename = "retweet", default)]
    pub is_retweet: bool,
    #[serde(rename = "reply", default)]
    pub is_reply: bool,
}

impl Post {
    pub fn day(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Depressed,
    Control,
}

impl Label {
    pub fn is_depressed(self) -> bool {
        self == Label::Depressed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Depressed => "depressed",
            Label::Control => "control",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One user's labelled history. `posts` are the raw posts in ascending time
/// order; `proper_posts` holds the cleaned survivors once preprocessing ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTimeline {
    pub user_id: String,
    pub label: Label,
    pub posts: Vec<Post>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proper_posts: Option<Vec<Post>>,
}

impl UserTimeline {
    pub fn new(user_id: impl Into<String>, label: Label, mut posts: Vec<Post>) -> Self {
        posts.sort_by_key(|p| p.timestamp);
        UserTimeline {
            user_id: user_id.into(),
            label,
            posts,
            proper_posts: None,
        }
    }

    pub fn is_preprocessed(&self) -> bool {
        self.proper_posts.is_some()
    }

    /// Proper posts, or an empty slice when preprocessing has not run.
    pub fn proper(&self) -> &[Post] {
        self.proper_posts.as_deref().unwrap_or(&[])
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.posts.first().map(Post::day)
    }

    pub fn last_day(&self) -> Option<NaiveDate> {
        self.posts.last().map(Post::day)
    }

    /// Whole days between first and last post, inclusive of both.
    pub fn span_days(&self) -> u32 {
        match (self.first_day(), self.last_day()) {
            (Some(a), Some(b)) => ((b - a).num_days() + 1) as u32,
            _ => 0,
        }
    }

    fn sort(&mut self) {
        self.posts.sort_by_key(|p| p.timestamp);
        if let Some(pp) = self.proper_posts.as_mut() {
            pp.sort_by_key(|p| p.timestamp);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub users: Vec<UserTimeline>,
    pub metadata: CorpusMetadata,
}

impl Corpus {
    pub fn new(name: impl Into<String>, users: Vec<UserTimeline>) -> Result<Self> {
        let corpus = Corpus {
            name: name.into(),
            users,
            metadata: CorpusMetadata::default(),
        };
        corpus.check_unique_ids()?;
        Ok(corpus)
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for u in &self.users {
            if !seen.insert(u.user_id.as_str()) {
                return Err(Error::Validation(format!("duplicate user {:?}", u.user_id)));
            }
        }
        Ok(())
    }

    pub fn count(&self, label: Label) -> usize {
        self.users.iter().filter(|u| u.label == label).count()
    }

    pub fn post_count(&self) -> usize {
        self.users.iter().map(|u| u.posts.len()).sum()
    }

    /// Parse a JSON-lines corpus. Blank lines are skipped.
    pub fn from_reader(name: impl Into<String>, reader: impl BufRead) -> Result<Self> {
        let mut users = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut user: UserTimeline = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if user.posts.iter().any(|p| p.text.is_empty()) {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "raw post with empty text".into(),
                });
            }
            if !seen.insert(user.user_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate user {:?} on line {}",
                    user.user_id,
                    idx + 1
                )));
            }
            user.sort();
            users.push(user);
        }
        Ok(Corpus {
            name: name.into(),
            users,
            metadata: CorpusMetadata::default(),
        })
    }

    pub fn to_writer(&self, mut w: impl Write) -> Result<()> {
        for u in &self.users {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Read a corpus file; posts come back sorted per user.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut corpus = Corpus::from_reader(name, BufReader::new(file))?;
    corpus.metadata.source = Some(path.display().to_string());
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    corpus.to_writer(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Reference language guess: a post is non-English when more than half of
/// its alphabetic characters are outside ASCII.
pub fn is_non_english(text: &str) -> bool {
    let (mut alpha, mut foreign) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        alpha += 1;
        if !c.is_ascii() {
            foreign += 1;
        }
    }
    alpha > 0 && foreign * 2 > alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_posts: usize,
    pub min_days: u32,
    pub max_non_english_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_posts: 50,
            min_days: 30,
            max_non_english_ratio: 0.2,
        }
    }
}

impl FilterConfig {
    pub fn admits(&self, user: &UserTimeline, non_english: &dyn Fn(&str) -> bool) -> bool {
        if user.posts.len() < self.min_posts || user.span_days() < self.min_days {
            return false;
        }
        if user.posts.is_empty() {
            return true;
        }
        let flagged = user.posts.iter().filter(|p| non_english(&p.text)).count();
        flagged as f64 / user.posts.len() as f64 <= self.max_non_english_ratio
    }
}

/// Keep users meeting the post-count, history-span and language thresholds.
pub fn filter_users(corpus: &Corpus, cfg: &FilterConfig) -> Corpus {
    filter_users_with(corpus, cfg, &is_non_english)
}

pub fn filter_users_with(
    corpus: &Corpus,
    cfg: &FilterConfig,
    non_english: &dyn Fn(&str) -> bool,
) -> Corpus {
    Corpus {
        name: corpus.name.clone(),
        users: corpus
            .users
            .iter()
            .filter(|u| cfg.admits(u, non_english))
            .cloned()
            .collect(),
        metadata: corpus.metadata.clone(),
    }
}

/// A per-class value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClass<T> {
    pub depressed: T,
    pub control: T,
}

impl<T: Copy> PerClass<T> {
    pub fn get(&self, label: Label) -> T {
        match label {
            Label::Depressed => self.depressed,
            Label::Control => self.control,
        }
    }
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_depressed: usize,
    pub n_control: usize,
    pub history_days: u32,
    /// Mean number of posts on a day with activity.
    pub daily_post_rate_mean: PerClass<f64>,
    pub silence_prob: PerClass<f64>,
    /// Per-post probability of inserting a phrase of each symptom.
    pub symptom_inject_prob: PerClass<[f64; SYMPTOM_COUNT]>,
    /// When set, depressed users alternate symptomatic and remission phases
    /// of this many days each; injections happen only in symptomatic phases.
    #[serde(default)]
    pub recurrence_cycle_days: Option<u32>,
    /// Probability that a post is a share or a reply (removed in cleaning).
    #[serde(default = "default_share_prob")]
    pub share_prob: f64,
    pub seed: u64,
}

fn default_share_prob() -> f64 {
    0.05
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_depressed: 50,
            n_control: 50,
            history_days: 120,
            daily_post_rate_mean: PerClass {
                depressed: 2.0,
                control: 2.0,
            },
            silence_prob: PerClass {
                depressed: 0.35,
                control: 0.15,
            },
            symptom_inject_prob: PerClass {
                depressed: [0.25, 0.30, 0.15, 0.20, 0.10, 0.12, 0.10, 0.05, 0.05, 0.03],
                control: [0.01, 0.02, 0.02, 0.03, 0.01, 0.01, 0.01, 0.005, 0.005, 0.0],
            },
            recurrence_cycle_days: None,
            share_prob: default_share_prob(),
            seed: 7,
        }
    }
}

pub const SYNTH_MIN_POSTS: usize = 50;
pub const SYNTH_MIN_DAYS: u32 = 30;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_depressed < 1 || self.n_control < 1 {
            return Err(Error::Validation(
                "n_depressed and n_control must be at least 1".into(),
            ));
        }
        if self.history_days < 14 {
            return Err(Error::Validation("history_days must be at least 14".into()));
        }
        for label in [Label::Depressed, Label::Control] {
            if !prob_ok(self.silence_prob.get(label)) || !prob_ok(self.share_prob) {
                return Err(Error::Validation(format!(
                    "{label}: probabilities must lie in [0, 1]"
                )));
            }
            if self
                .symptom_inject_prob
                .get(label)
                .iter()
                .any(|&p| !prob_ok(p))
            {
                return Err(Error::Validation(format!(
                    "{label}: symptom_inject_prob must lie in [0, 1]"
                )));
            }
            let rate = self.daily_post_rate_mean.get(label);
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::Validation(format!(
                    "{label}: daily_post_rate_mean must be positive"
                )));
            }
        }
        if self.history_days < SYNTH_MIN_DAYS {
            return Err(Error::Validation(format!(
                "history_days {} cannot satisfy the {SYNTH_MIN_DAYS}-day inclusion filter; use at least {SYNTH_MIN_DAYS}",
                self.history_days
            )));
        }
        if let Some(c) = self.recurrence_cycle_days {
            if c == 0 {
                return Err(Error::Validation(
                    "recurrence_cycle_days must be positive".into(),
                ));
            }
        }
        for label in [Label::Depressed, Label::Control] {
            let expected = self.expected_posts(label);
            if expected < SYNTH_MIN_POSTS as f64 {
                let rate = self.daily_post_rate_mean.get(label);
                let needed = SYNTH_MIN_POSTS as f64
                    / (self.history_days as f64 * (1.0 - self.silence_prob.get(label)));
                return Err(Error::Validation(format!(
                    "{label} users average {expected:.1} posts, below the {SYNTH_MIN_POSTS}-post filter; \
                     raise daily_post_rate_mean above {needed:.2} (currently {rate}), lower silence_prob or extend history_days"
                )));
            }
        }
        Ok(())
    }

    pub fn expected_posts(&self, label: Label) -> f64 {
        let active = self.history_days as f64 * (1.0 - self.silence_prob.get(label));
        active * self.daily_post_rate_mean.get(label).max(1.0)
    }
}

const FILLERS: &[&str] = &[
    "just got back from the grocery store",
    "watching the game tonight with friends",
    "coffee with my sister this morning",
    "the weather is pretty nice today",
    "finished reading a new book",
    "traffic was terrible on the way home",
    "trying out a new recipe for dinner",
    "my cat knocked the plant over again",
    "working on a project for class",
    "listening to some old music",
    "went for a walk in the park",
    "the meeting ran long this afternoon",
    "planning a trip for next month",
    "new episode of that show comes out tonight",
    "cleaning the kitchen before the weekend",
    "picked up some flowers for the table",
    "the bus was late again this morning",
    "thinking about painting the living room",
    "my neighbor has a new puppy",
    "fixing the bike chain after work",
    "ordered pizza for the whole team",
    "the library was quiet and calm",
    "bought new shoes at the mall",
    "helping my brother move apartments",
    "the concert last night was loud",
    "studying for the exam on friday",
    "made pancakes for breakfast",
    "the garden needs some water",
    "called my grandma to say hello",
    "playing board games with the kids",
];

const OPENERS: &[&str] = &[
    "honestly",
    "today",
    "lately",
    "ugh",
    "well",
    "tonight",
    "right now",
    "again",
];
const TAGS: &[&str] = &["#mondays", "#life", "#tbt", "#random", "#weekend"];
const EMOJI: &[&str] = &[
    "\u{1F600}",
    "\u{1F622}",
    "\u{2764}\u{FE0F}",
    "\u{1F634}",
    "\u{1F44D}",
];

struct PostWriter<'a> {
    lexicon: &'a SymptomLexicon,
}

impl PostWriter<'_> {
    /// Fragments are joined with ", " so no phrase can form across a seam.
    fn write(
        &self,
        rng: &mut ChaCha8Rng,
        inject: &[f64; SYMPTOM_COUNT],
        active_phase: bool,
    ) -> String {
        let mut fragments: Vec<String> = Vec::new();
        if rng.random_bool(0.2) {
            fragments.push(OPENERS.choose(rng).unwrap().to_string());
        }
        fragments.push(FILLERS.choose(rng).unwrap().to_string());
        if active_phase {
            for s in Symptom::ALL {
                if rng.random_bool(inject[s.id()]) {
                    let phrase = self.lexicon.phrases(s).choose(rng).unwrap().clone();
                    let pos = rng.random_range(0..=fragments.len());
                    fragments.insert(pos, phrase);
                }
            }
        }
        let mut text = fragments.join(", ");
        if rng.random_bool(0.3) {
            let mut chars = text.chars();
            if let Some(first) = chars.next() {
                text = first.to_uppercase().chain(chars).collect();
            }
        }
        if rng.random_bool(0.1) {
            text.push_str(" soooo good");
        }
        if rng.random_bool(0.08) {
            text.push_str(" I've been busy");
        }
        if rng.random_bool(0.1) {
            text.push(' ');
            text.push_str(TAGS.choose(rng).unwrap());
        }
        if rng.random_bool(0.06) {
            text.push_str(&format!(" https://t.co/x{}", rng.random_range(100..999)));
        }
        if rng.random_bool(0.08) {
            text.push(' ');
            text.push_str(EMOJI.choose(rng).unwrap());
        }
        match rng.random_range(0..4) {
            0 => text.push('.'),
            1 => text.push('!'),
            _ => {}
        }
        text
    }
}

fn synth_user(
    spec: &SynthSpec,
    label: Label,
    index: usize,
    writer: &PostWriter<'_>,
) -> UserTimeline {
    let stream = match label {
        Label::Depressed => 2 * index as u64,
        Label::Control => 2 * index as u64 + 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(spec.seed, stream));
    let epoch = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let start = epoch + Duration::days(rng.random_range(0..365));
    let days = spec.history_days as i64;
    let rate = spec.daily_post_rate_mean.get(label);
    let extra = Poisson::new((rate - 1.0).max(1e-9)).expect("positive Poisson mean");
    let silence = spec.silence_prob.get(label);
    let inject = spec.symptom_inject_prob.get(label);
    let phase_offset = spec
        .recurrence_cycle_days
        .map(|c| rng.random_range(0..2 * c as i64));

    let mut per_day = vec![0usize; days as usize];
    for (d, n) in per_day.iter_mut().enumerate() {
        let edge = d == 0 || d as i64 == days - 1;
        if edge || !rng.random_bool(silence) {
            *n = 1 + extra.sample(&mut rng) as usize;
        }
    }
    let mut total: usize = per_day.iter().sum();
    while total < SYNTH_MIN_POSTS {
        let d = rng.random_range(0..days as usize);
        per_day[d] += 1;
        total += 1;
    }

    let mut posts = Vec::with_capacity(total);
    for (d, &n) in per_day.iter().enumerate() {
        let active_phase = match (label, spec.recurrence_cycle_days, phase_offset) {
            (Label::Depressed, Some(c), Some(off)) => ((d as i64 + off) / c as i64) % 2 == 0,
            _ => true,
        };
        let date = start + Duration::days(d as i64);
        let mut secs: Vec<u32> = (0..n).map(|_| rng.random_range(0..86_400)).collect();
        secs.sort_unstable();
        for s in secs {
            let ts = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).unwrap())
                + Duration::seconds(s as i64);
            let shared = rng.random_bool(spec.share_prob);
            let (is_retweet, is_reply) = if shared {
                (rng.random_bool(0.5), false)
            } else {
                (false, false)
            };
            let is_reply = is_reply || (shared && !is_retweet);
            let text = writer.write(&mut rng, &inject, active_phase);
            posts.push(Post {
                timestamp: ts,
                text,
                is_retweet,
                is_reply,
            });
        }
    }
    let prefix = match label {
        Label::Depressed => "d",
        Label::Control => "c",
    };
    UserTimeline::new(format!("{prefix}{index:05}"), label, posts)
}

/// Generate a labelled corpus. Output depends only on `spec`.
pub fn synthesize(spec: &SynthSpec) -> Result<Corpus> {
    synthesize_with_lexicon(spec, &SymptomLexicon::builtin())
}

pub fn synthesize_with_lexicon(spec: &SynthSpec, lexicon: &SymptomLexicon) -> Result<Corpus> {
    spec.validate()?;
    if let Some(s) = Symptom::ALL
        .iter()
        .find(|s| lexicon.phrases(**s).is_empty())
    {
        return Err(Error::Config(format!("lexicon has no phrases for {s}")));
    }
    let writer = PostWriter { lexicon };
    let mut users = Vec::with_capacity(spec.n_depressed + spec.n_control);
    for i in 0..spec.n_depressed {
        users.push(synth_user(spec, Label::Depressed, i, &writer));
    }
    for i in 0..spec.n_control {
        users.push(synth_user(spec, Label::Control, i, &writer));
    }
    let mut corpus = Corpus::new(format!("synth-{}", spec.seed), users)?;
    corpus.metadata = CorpusMetadata {
        seed: Some(spec.seed),
        synth: Some(spec.clone()),
        source: None,
    };
    Ok(corpus)
}
