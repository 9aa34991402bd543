//! Symptom taxonomy, symptom detectors and per-day expression vectors.
//!
//! A detector maps one post to the set of symptoms it expresses. The
//! shipped [`LexiconDetector`] is a deterministic phrase matcher; anything
//! else (a fine-tuned classifier, a remote service) plugs in through the
//! [`SymptomDetector`] trait.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SYMPTOM_COUNT: usize = 10;

const BUILTIN_LEXICON: &str = include_str!("../data/symptom_lexicon.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symptom {
    Anhedonia = 0,
    LowMood = 1,
    SleepDisturbance = 2,
    Fatigue = 3,
    AppetiteChange = 4,
    Worthlessness = 5,
    ConcentrationProblems = 6,
    Agitation = 7,
    Retardation = 8,
    SuicidalIdeation = 9,
}

impl Symptom {
    pub const ALL: [Symptom; SYMPTOM_COUNT] = [
        Symptom::Anhedonia,
        Symptom::LowMood,
        Symptom::SleepDisturbance,
        Symptom::Fatigue,
        Symptom::AppetiteChange,
        Symptom::Worthlessness,
        Symptom::ConcentrationProblems,
        Symptom::Agitation,
        Symptom::Retardation,
        Symptom::SuicidalIdeation,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Symptom> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Symptom::Anhedonia => "Anhedonia",
            Symptom::LowMood => "LowMood",
            Symptom::SleepDisturbance => "SleepDisturbance",
            Symptom::Fatigue => "Fatigue",
            Symptom::AppetiteChange => "AppetiteChange",
            Symptom::Worthlessness => "Worthlessness",
            Symptom::ConcentrationProblems => "ConcentrationProblems",
            Symptom::Agitation => "Agitation",
            Symptom::Retardation => "Retardation",
            Symptom::SuicidalIdeation => "SuicidalIdeation",
        }
    }

    /// Anhedonia and low mood gate the clinical scoring mode.
    pub fn is_cardinal(self) -> bool {
        matches!(self, Symptom::Anhedonia | Symptom::LowMood)
    }
}

impl fmt::Display for Symptom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Symptom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Symptom::ALL
            .into_iter()
            .find(|sym| sym.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown symptom name {s:?}")))
    }
}

/// Compact set of symptom ids.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct SymptomSet(u16);

impl SymptomSet {
    pub fn empty() -> Self {
        SymptomSet(0)
    }

    pub fn insert(&mut self, s: Symptom) {
        self.0 |= 1 << s.id();
    }

    pub fn contains(self, s: Symptom) -> bool {
        self.0 & (1 << s.id()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: SymptomSet) -> SymptomSet {
        SymptomSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Symptom> {
        Symptom::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

impl FromIterator<Symptom> for SymptomSet {
    fn from_iter<I: IntoIterator<Item = Symptom>>(iter: I) -> Self {
        let mut set = SymptomSet::empty();
        for s in iter {
            set.insert(s);
        }
        set
    }
}

/// Per-day symptom expression vector: bit `i` is set when symptom `i` was
/// detected in at least one proper post of that day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dsev {
    pub day: NaiveDate,
    set: SymptomSet,
}

impl Dsev {
    pub fn zero(day: NaiveDate) -> Self {
        Dsev {
            day,
            set: SymptomSet::empty(),
        }
    }

    pub fn from_set(day: NaiveDate, set: SymptomSet) -> Self {
        Dsev { day, set }
    }

    pub fn get(&self, s: Symptom) -> bool {
        self.set.contains(s)
    }

    pub fn set(&mut self, s: Symptom) {
        self.set.insert(s);
    }

    pub fn symptoms(&self) -> SymptomSet {
        self.set
    }

    pub fn bits(&self) -> [u8; SYMPTOM_COUNT] {
        let mut out = [0u8; SYMPTOM_COUNT];
        for s in Symptom::ALL {
            out[s.id()] = u8::from(self.get(s));
        }
        out
    }
}

/// Anything that can tag a post with the symptoms it expresses.
pub trait SymptomDetector: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, text: &str) -> SymptomSet;
}

pub type DetectorHandle = Arc<dyn SymptomDetector>;

/// Symptom → phrase list, as stored in lexicon files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomLexicon(pub BTreeMap<Symptom, Vec<String>>);

impl SymptomLexicon {
    /// The lexicon shipped with the crate. It also drives the synthetic
    /// corpus generator, so detection on synthetic data is exact.
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_LEXICON).expect("builtin lexicon is valid JSON")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn phrases(&self, s: Symptom) -> &[String] {
        self.0.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Phrase matcher honouring token boundaries: a phrase matches only where
/// it is neither preceded nor followed by an alphanumeric character.
#[derive(Debug, Clone)]
pub struct LexiconDetector {
    name: String,
    phrases: Vec<(Symptom, String)>,
}

impl LexiconDetector {
    pub fn new(lexicon: &SymptomLexicon) -> Result<Self> {
        let mut phrases = Vec::new();
        for s in Symptom::ALL {
            let list = lexicon.phrases(s);
            if list.is_empty() {
                return Err(Error::Config(format!("symptom {s} has no lexicon phrases")));
            }
            for p in list {
                let p = p.trim();
                if p.is_empty() {
                    return Err(Error::Config(format!("symptom {s} has an empty phrase")));
                }
                if p.chars().any(char::is_uppercase) {
                    return Err(Error::Config(format!(
                        "lexicon phrase {p:?} is not lowercase"
                    )));
                }
                phrases.push((s, p.to_string()));
            }
        }
        Ok(LexiconDetector {
            name: "lexicon".into(),
            phrases,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn builtin() -> Self {
        LexiconDetector::new(&SymptomLexicon::builtin())
            .expect("builtin lexicon covers every symptom")
            .with_name("lexicon:builtin")
    }
}

impl SymptomDetector for LexiconDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn detect(&self, text: &str) -> SymptomSet {
        let mut found = SymptomSet::empty();
        for (s, phrase) in &self.phrases {
            if !found.contains(*s) && contains_at_boundary(text, phrase) {
                found.insert(*s);
            }
        }
        found
    }
}

/// Build a detector handle from a `lexicon:<path>` selector
/// (`lexicon:builtin` selects the shipped lexicon).
pub fn detector_from_selector(selector: &str) -> Result<DetectorHandle> {
    match selector.split_once(':') {
        Some(("lexicon", "builtin")) => Ok(Arc::new(LexiconDetector::builtin())),
        Some(("lexicon", path)) => {
            let lex = SymptomLexicon::load(Path::new(path))?;
            Ok(Arc::new(LexiconDetector::new(&lex)?.with_name(selector)))
        }
        _ => Err(Error::Config(format!(
            "unknown detector {selector:?}; expected lexicon:<path> or lexicon:builtin"
        ))),
    }
}

pub(crate) fn contains_at_boundary(text: &str, phrase: &str) -> bool {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(pos) = text[from..].find(phrase) {
        let start = from + pos;
        let end = start + phrase.len();
        let before_ok = text[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = text[end..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        // advance by one char to allow overlapping candidates
        from = start + text[start..].chars().next().map_or(1, char::len_utf8);
        if from >= bytes.len() {
            break;
        }
    }
    false
}

/// Expression vector of one calendar day: the OR of per-post detections.
pub fn dsev_for_day<S: AsRef<str>>(
    day: NaiveDate,
    day_posts: &[S],
    detector: &dyn SymptomDetector,
) -> Dsev {
    let set = day_posts.iter().fold(SymptomSet::empty(), |acc, p| {
        acc.union(detector.detect(p.as_ref()))
    });
    Dsev::from_set(day, set)
}
