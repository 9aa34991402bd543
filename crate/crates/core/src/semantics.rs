//! Sentence encoders and the three embedding averages: per day, per
//! episode (over active days) and over a user's whole history.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::UserTimeline;
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 512;

/// Dense sentence embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f32>);

impl Embedding {
    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        let n = self.norm() * other.norm();
        if n == 0.0 {
            0.0
        } else {
            dot / n
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Arithmetic mean of equally sized embeddings; zero vector when empty.
pub fn mean_embedding<'a>(items: impl IntoIterator<Item = &'a Embedding>, dim: usize) -> Embedding {
    let mut acc = vec![0.0f64; dim];
    let mut n = 0usize;
    for e in items {
        debug_assert_eq!(e.dim(), dim);
        for (a, &v) in acc.iter_mut().zip(&e.0) {
            *a += v as f64;
        }
        n += 1;
    }
    if n == 0 {
        return Embedding::zeros(dim);
    }
    Embedding(acc.into_iter().map(|a| (a / n as f64) as f32).collect())
}

pub trait SentenceEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Must return the zero vector for empty text.
    fn encode(&self, text: &str) -> Embedding;
}

pub type EncoderHandle = Arc<dyn SentenceEncoder>;

pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x100_0000_01b3);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Seeded hashed bag-of-words encoder: each token maps to a pseudo-random
/// unit direction, a text is the normalized sum of its token directions.
pub struct HashingEncoder {
    name: String,
    dim: usize,
    seed: u64,
    directions: RwLock<HashMap<String, Arc<[f32]>>>,
}

impl HashingEncoder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::Config(format!(
                "encoder dimension must be at least 8 (got {dim})"
            )));
        }
        Ok(HashingEncoder {
            name: format!("hash:{dim}:{seed}"),
            dim,
            seed,
            directions: RwLock::new(HashMap::new()),
        })
    }

    fn direction(&self, token: &str) -> Arc<[f32]> {
        if let Some(v) = self
            .directions
            .read()
            .expect("encoder cache poisoned")
            .get(token)
        {
            return Arc::clone(v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(self.seed, token.as_bytes()));
        let raw: Vec<f64> = (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit: Arc<[f32]> = raw.iter().map(|v| (v / norm) as f32).collect();
        self.directions
            .write()
            .expect("encoder cache poisoned")
            .entry(token.to_string())
            .or_insert(unit)
            .clone()
    }
}

impl SentenceEncoder for HashingEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Embedding {
        let mut acc = vec![0.0f64; self.dim];
        let mut any = false;
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            any = true;
            for (a, &v) in acc.iter_mut().zip(self.direction(token).iter()) {
                *a += v as f64;
            }
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !any || norm == 0.0 {
            return Embedding::zeros(self.dim);
        }
        Embedding(acc.into_iter().map(|v| (v / norm) as f32).collect())
    }
}

pub fn reference_encoder(dim: usize, seed: u64) -> Result<EncoderHandle> {
    Ok(Arc::new(HashingEncoder::new(dim, seed)?))
}

/// Parse `hash:<dim>:<seed>` (or `hash` for the defaults).
pub fn encoder_from_selector(selector: &str) -> Result<EncoderHandle> {
    let parts: Vec<&str> = selector.split(':').collect();
    let bad = || {
        Error::Config(format!(
            "unknown encoder {selector:?}; expected hash:<dim>:<seed>"
        ))
    };
    match parts.as_slice() {
        ["hash"] => reference_encoder(DEFAULT_DIM, 0),
        ["hash", dim] => reference_encoder(dim.parse().map_err(|_| bad())?, 0),
        ["hash", dim, seed] => reference_encoder(
            dim.parse().map_err(|_| bad())?,
            seed.parse().map_err(|_| bad())?,
        ),
        _ => Err(bad()),
    }
}

/// Day-level average over one day's proper posts.
pub fn dlsea<S: AsRef<str>>(day_posts: &[S], encoder: &dyn SentenceEncoder) -> Embedding {
    let embs: Vec<Embedding> = day_posts
        .iter()
        .map(|p| encoder.encode(p.as_ref()))
        .collect();
    mean_embedding(&embs, encoder.dim())
}

/// Episode-level average over the day averages of active days.
pub fn elsea<'a>(day_embeddings: impl IntoIterator<Item = &'a Embedding>, dim: usize) -> Embedding {
    mean_embedding(day_embeddings, dim)
}

/// Average over every proper post of a user; zero vector if there are none.
pub fn atea(timeline: &UserTimeline, encoder: &dyn SentenceEncoder) -> Embedding {
    let embs: Vec<Embedding> = timeline
        .proper()
        .iter()
        .map(|p| encoder.encode(&p.text))
        .collect();
    mean_embedding(&embs, encoder.dim())
}

const CACHE_MAGIC: &[u8; 8] = b"TUDEMB01";

/// Persistent text-embedding cache for one encoder.
///
/// Layout (little-endian): magic `TUDEMB01`, `u32` dimension, `u32` name
/// length, UTF-8 encoder name, `u64` entry count, then per entry a `u64`
/// text hash followed by `dim` `f32` values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingCache {
    pub encoder_name: String,
    pub dim: usize,
    entries: HashMap<u64, Vec<f32>>,
}

impl EmbeddingCache {
    pub fn new(encoder_name: impl Into<String>, dim: usize) -> Self {
        EmbeddingCache {
            encoder_name: encoder_name.into(),
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn key(text: &str) -> u64 {
        fnv1a(0, text.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<Embedding> {
        self.entries
            .get(&Self::key(text))
            .map(|v| Embedding(v.clone()))
    }

    pub fn insert(&mut self, text: &str, e: &Embedding) {
        debug_assert_eq!(e.dim(), self.dim);
        self.entries.insert(Self::key(text), e.0.clone());
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.encoder_name.len() as u32).to_le_bytes())?;
        w.write_all(self.encoder_name.as_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        let mut keys: Vec<&u64> = self.entries.keys().collect();
        keys.sort();
        for k in keys {
            w.write_all(&k.to_le_bytes())?;
            for v in &self.entries[k] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Validation("not an embedding cache file".into()));
        }
        let dim = read_u32(&mut r)? as usize;
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let encoder_name = String::from_utf8(name)
            .map_err(|_| Error::Validation("cache encoder name is not UTF-8".into()))?;
        let count = read_u64(&mut r)?;
        let mut entries = HashMap::with_capacity(count as usize);
        let mut buf = vec![0u8; 4 * dim];
        for _ in 0..count {
            let key = read_u64(&mut r)?;
            r.read_exact(&mut buf)?;
            let values = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.insert(key, values);
        }
        Ok(EmbeddingCache {
            encoder_name,
            dim,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Encoder wrapper that consults and fills an [`EmbeddingCache`].
pub struct CachedEncoder {
    inner: EncoderHandle,
    cache: RwLock<EmbeddingCache>,
}

impl CachedEncoder {
    pub fn new(inner: EncoderHandle, cache: EmbeddingCache) -> Result<Self> {
        if cache.encoder_name != inner.name() || cache.dim != inner.dim() {
            return Err(Error::Validation(format!(
                "embedding cache belongs to {} (dim {}), not {} (dim {})",
                cache.encoder_name,
                cache.dim,
                inner.name(),
                inner.dim()
            )));
        }
        Ok(CachedEncoder {
            inner,
            cache: RwLock::new(cache),
        })
    }

    pub fn into_cache(self) -> EmbeddingCache {
        self.cache.into_inner().expect("embedding cache poisoned")
    }
}

impl SentenceEncoder for CachedEncoder {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn encode(&self, text: &str) -> Embedding {
        if let Some(e) = self
            .cache
            .read()
            .expect("embedding cache poisoned")
            .get(text)
        {
            return e;
        }
        let e = self.inner.encode(text);
        self.cache
            .write()
            .expect("embedding cache poisoned")
            .insert(text, &e);
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Post};
    use chrono::{TimeZone, Utc};

    fn enc() -> HashingEncoder {
        HashingEncoder::new(512, 3).unwrap()
    }

    #[test]
    fn deterministic_and_zero_on_empty() {
        let e = enc();
        assert_eq!(
            e.encode("i feel fine today"),
            enc().encode("i feel fine today")
        );
        assert_eq!(e.encode(""), Embedding::zeros(512));
        assert_eq!(e.encode(" , . "), Embedding::zeros(512));
        assert!((e.encode("one two").norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_tiny_dimension() {
        assert!(HashingEncoder::new(4, 0).is_err());
    }

    #[test]
    fn disjoint_texts_are_nearly_orthogonal() {
        use rand::seq::SliceRandom;
        let e = enc();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut vocab: Vec<String> = (0..400).map(|i| format!("w{i}")).collect();
        for _ in 0..200 {
            vocab.shuffle(&mut rng);
            let a = vocab[..6].join(" ");
            let b = vocab[6..12].join(" ");
            let c = e.encode(&a).cosine(&e.encode(&b));
            assert!(c.abs() < 0.2, "cos {c} for {a:?} / {b:?}");
        }
    }

    #[test]
    fn averages() {
        let e = enc();
        let one = dlsea(&["a quiet evening"], &e);
        assert_eq!(one, e.encode("a quiet evening"));
        assert_eq!(
            dlsea(&["same words", "same words"], &e),
            e.encode("same words")
        );

        let (e1, e2) = (e.encode("first post here"), e.encode("second one there"));
        let avg = dlsea(&["first post here", "second one there"], &e);
        for i in 0..512 {
            let expect = ((e1.0[i] as f64 + e2.0[i] as f64) / 2.0) as f32;
            assert_eq!(avg.0[i], expect);
        }
        let none: [&str; 0] = [];
        assert_eq!(dlsea(&none, &e), Embedding::zeros(512));
    }

    #[test]
    fn elsea_cases() {
        let e = enc();
        let d1 = dlsea(&["monday stuff"], &e);
        let d2 = dlsea(&["tuesday things"], &e);
        assert_eq!(elsea(std::slice::from_ref(&d1), 512), d1);
        assert_eq!(elsea(&Vec::new(), 512), Embedding::zeros(512));
        let m = elsea(&[d1.clone(), d2.clone()], 512);
        assert!((m.0[7] as f64 - (d1.0[7] as f64 + d2.0[7] as f64) / 2.0).abs() < 1e-7);
    }

    fn timeline(texts: &[&str]) -> UserTimeline {
        let posts: Vec<Post> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Post {
                timestamp: Utc
                    .with_ymd_and_hms(2020, 2, 1 + i as u32, 8, 0, 0)
                    .unwrap(),
                text: t.to_string(),
                is_retweet: false,
                is_reply: false,
            })
            .collect();
        let mut tl = UserTimeline::new("u", Label::Control, posts.clone());
        tl.proper_posts = Some(posts);
        tl
    }

    #[test]
    fn atea_cases() {
        let e = enc();
        assert_eq!(
            atea(&timeline(&["only post here"]), &e),
            e.encode("only post here")
        );
        assert_eq!(
            atea(&timeline(&["dup post", "dup post"]), &e),
            e.encode("dup post")
        );
        let texts = ["alpha beta", "gamma delta", "epsilon zeta"];
        let got = atea(&timeline(&texts), &e);
        let embs: Vec<Embedding> = texts.iter().map(|t| e.encode(t)).collect();
        for i in 0..512 {
            let expect = embs.iter().map(|x| x.0[i] as f64).sum::<f64>() / 3.0;
            assert!((got.0[i] as f64 - expect).abs() < 1e-7);
        }
        let mut empty = timeline(&["x y z"]);
        empty.proper_posts = Some(Vec::new());
        assert_eq!(atea(&empty, &e), Embedding::zeros(512));
    }

    #[test]
    fn cache_file_round_trip() {
        let inner: EncoderHandle = Arc::new(HashingEncoder::new(16, 1).unwrap());
        let cached =
            CachedEncoder::new(inner.clone(), EmbeddingCache::new(inner.name(), 16)).unwrap();
        let a = cached.encode("hello cache world");
        let _ = cached.encode("another line");
        let cache = cached.into_cache();
        assert_eq!(cache.len(), 2);
        let mut buf = Vec::new();
        cache.write_to(&mut buf).unwrap();
        assert_eq!(
            buf.len(),
            8 + 4 + 4 + inner.name().len() + 8 + 2 * (8 + 16 * 4)
        );
        let back = EmbeddingCache::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, cache);
        assert_eq!(back.get("hello cache world"), Some(a));
        assert!(CachedEncoder::new(Arc::new(HashingEncoder::new(16, 2).unwrap()), back).is_err());
        assert!(EmbeddingCache::read_from(&b"garbage!........"[..]).is_err());
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(encoder_from_selector("hash:32:5").unwrap().dim(), 32);
        assert_eq!(encoder_from_selector("hash").unwrap().dim(), DEFAULT_DIM);
        assert!(encoder_from_selector("use").is_err());
        assert!(encoder_from_selector("hash:x").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn permutation_invariant_and_norm_bounded(
                posts in proptest::collection::vec("[a-f]{1,3}( [a-f]{1,3}){0,4}", 1..6),
                rot in 0usize..6,
            ) {
                let e = HashingEncoder::new(32, 9).unwrap();
                let a = dlsea(&posts, &e);
                let mut shuffled = posts.clone();
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
                let b = dlsea(&shuffled, &e);
                for (x, y) in a.0.iter().zip(&b.0) {
                    prop_assert!((x - y).abs() < 1e-6);
                }
                let max_norm = posts.iter().map(|p| e.encode(p).norm()).fold(0.0, f64::max);
                prop_assert!(a.norm() <= max_norm + 1e-6);
            }
        }
    }
}
