//! Post cleaning.
//!
//! Every raw post either survives as a cleaned "proper post" or is removed
//! by exactly one rule. Removed posts stay in the raw timeline because they
//! still count as posting activity.
//!
//! Cleaning order: lowercase, drop shares/replies, drop self-disclosure,
//! drop URL and hashtag tokens, expand contractions, strip punctuation
//! other than `. , ? !`, strip emoji and other non-ASCII characters,
//! collapse elongated letters, drop one-character words (except `a`, `i`, `u`)
//! and digit tokens, then require at least three words.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{Post, UserTimeline};

const CONTRACTIONS_JSON: &str = include_str!("../data/contractions.json");
const EMOJI_RANGES_JSON: &str = include_str!("../data/emoji_ranges.json");

pub const MIN_WORDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalRule {
    RetweetReply,
    SelfDisclosure,
    MinLength,
}

impl RemovalRule {
    pub fn name(self) -> &'static str {
        match self {
            RemovalRule::RetweetReply => "retweet-reply",
            RemovalRule::SelfDisclosure => "self-disclosure",
            RemovalRule::MinLength => "min-length",
        }
    }
}

impl fmt::Display for RemovalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cleaned {
    Kept(String),
    Removed(RemovalRule),
}

impl Cleaned {
    pub fn kept(&self) -> Option<&str> {
        match self {
            Cleaned::Kept(s) => Some(s),
            Cleaned::Removed(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub removed_by_rule: BTreeMap<String, usize>,
}

impl PreprocessReport {
    pub fn merge(&mut self, other: &PreprocessReport) {
        self.input_count += other.input_count;
        self.kept_count += other.kept_count;
        for (k, v) in &other.removed_by_rule {
            *self.removed_by_rule.entry(k.clone()).or_default() += v;
        }
    }

    pub fn removed_total(&self) -> usize {
        self.removed_by_rule.values().sum()
    }
}

struct Tables {
    contractions: HashMap<String, String>,
    emoji: Vec<(u32, u32)>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let contractions: HashMap<String, String> =
            serde_json::from_str(CONTRACTIONS_JSON).expect("contraction table is valid JSON");
        let raw: Vec<(String, String)> =
            serde_json::from_str(EMOJI_RANGES_JSON).expect("emoji table is valid JSON");
        let hex =
            |s: &str| u32::from_str_radix(s.trim_start_matches("0x"), 16).expect("hex code point");
        let emoji = raw.iter().map(|(lo, hi)| (hex(lo), hex(hi))).collect();
        Tables {
            contractions,
            emoji,
        }
    })
}

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    tables()
        .emoji
        .iter()
        .any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

/// Fallback share/reply detection for sources without platform flags.
fn looks_like_share_or_reply(lower: &str) -> bool {
    let t = lower.trim_start();
    t.starts_with("rt ") || t.starts_with('@')
}

fn is_self_disclosure(lower: &str) -> bool {
    lower
        .split(|c: char| !c.is_alphabetic())
        .any(|w| w == "diagnosed" || w == "diagnosis")
}

fn is_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

fn expand_contraction(token: &str) -> String {
    let normalized = token.replace('\u{2019}', "'");
    let is_core = |c: char| c.is_alphanumeric() || c == '\'';
    let start = normalized.find(is_core);
    let Some(start) = start else {
        return normalized;
    };
    let end = normalized
        .rfind(is_core)
        .map(|i| i + normalized[i..].chars().next().map_or(1, char::len_utf8));
    let end = end.unwrap_or(normalized.len());
    let core = &normalized[start..end];
    match tables().contractions.get(core) {
        Some(full) => format!("{}{}{}", &normalized[..start], full, &normalized[end..]),
        None => normalized,
    }
}

/// Collapse any run of three or more identical letters to a single letter.
pub fn collapse_elongation(token: &str) -> String {
    let chars: Vec<char> = token.chars().collect();
    let mut out = String::with_capacity(token.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let mut j = i;
        while j < chars.len() && chars[j] == c {
            j += 1;
        }
        let run = j - i;
        if c.is_alphabetic() && run >= 3 {
            out.push(c);
        } else {
            out.extend(std::iter::repeat_n(c, run));
        }
        i = j;
    }
    out
}

fn keep_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | ',' | '?' | '!')
}

fn is_digit_token(token: &str) -> bool {
    let mut any_digit = false;
    for c in token.chars().filter(|c| c.is_ascii_alphanumeric()) {
        if !c.is_ascii_digit() {
            return false;
        }
        any_digit = true;
    }
    any_digit
}

fn alnum_len(token: &str) -> usize {
    token.chars().filter(|c| c.is_ascii_alphanumeric()).count()
}

fn keep_short_word(token: &str) -> bool {
    let core: String = token
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    matches!(core.as_str(), "a" | "i" | "u")
}

/// Split on `. ? !`, counting non-empty segments.
pub fn sentence_count(text: &str) -> usize {
    text.split(['.', '?', '!'])
        .filter(|s| !s.trim().is_empty())
        .count()
}

/// Clean one post or report the rule that removed it.
pub fn preprocess_post(text: &str, is_retweet: bool, is_reply: bool) -> Cleaned {
    let lower = text.to_lowercase();

    if is_retweet || is_reply || looks_like_share_or_reply(&lower) {
        return Cleaned::Removed(RemovalRule::RetweetReply);
    }
    if is_self_disclosure(&lower) {
        return Cleaned::Removed(RemovalRule::SelfDisclosure);
    }

    let mut words: Vec<String> = Vec::new();
    for token in lower.split_whitespace() {
        if is_url(token) || token.starts_with('#') {
            continue;
        }
        let expanded = expand_contraction(token);
        for piece in expanded.split_whitespace() {
            let kept: String = piece
                .chars()
                .filter(|&c| !is_emoji(c))
                .filter(|&c| keep_char(c))
                .collect();
            let stripped = collapse_elongation(&kept);
            let n = alnum_len(&stripped);
            if n == 0 || is_digit_token(&stripped) {
                continue;
            }
            if n == 1 && !keep_short_word(&stripped) {
                continue;
            }
            words.push(stripped);
        }
    }

    let cleaned = words.join(" ");
    // cleaning can surface a disclosure word ("diaaagnosed") or a share prefix
    if looks_like_share_or_reply(&cleaned) {
        return Cleaned::Removed(RemovalRule::RetweetReply);
    }
    if is_self_disclosure(&cleaned) {
        return Cleaned::Removed(RemovalRule::SelfDisclosure);
    }
    if words.len() < MIN_WORDS {
        return Cleaned::Removed(RemovalRule::MinLength);
    }
    Cleaned::Kept(cleaned)
}

/// Fill `proper_posts` and report what was removed and why.
pub fn preprocess_timeline(timeline: &UserTimeline) -> (UserTimeline, PreprocessReport) {
    let mut report = PreprocessReport {
        input_count: timeline.posts.len(),
        ..Default::default()
    };
    let mut proper = Vec::new();
    for post in &timeline.posts {
        match preprocess_post(&post.text, post.is_retweet, post.is_reply) {
            Cleaned::Kept(text) => {
                report.kept_count += 1;
                proper.push(Post {
                    timestamp: post.timestamp,
                    text,
                    is_retweet: false,
                    is_reply: false,
                });
            }
            Cleaned::Removed(rule) => {
                *report
                    .removed_by_rule
                    .entry(rule.name().to_string())
                    .or_default() += 1;
            }
        }
    }
    let mut out = timeline.clone();
    out.proper_posts = Some(proper);
    (out, report)
}
