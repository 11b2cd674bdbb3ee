//! Stereotype measurement on word embeddings.
//!
//! A word's bias toward an attribute pair such as (he, she) is the
//! difference of its cosine similarities to the two attribute vectors.
//! Projection debiasing removes one direction from every vector, and the
//! token sampler contrasts argmax decoding with proportional decoding.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: IndexMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadStats {
    pub words: usize,
    pub duplicates: usize,
    pub header: bool,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Domain("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dimension,
            entries: IndexMap::new(),
        })
    }

    /// Inserts or replaces; returns true if the word was already present.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        Ok(self.entries.insert(word.into(), vector).is_some())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn lookup(&self, word: &str) -> Result<&[f64]> {
        self.get(word).ok_or_else(|| Error::Lookup(word.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// Order-independent content hash.
    pub fn fingerprint(&self) -> String {
        let mut words: Vec<_> = self.entries.iter().collect();
        words.sort_by(|a, b| a.0.cmp(b.0));
        let mut h = Sha256::new();
        h.update((self.dimension as u64).to_le_bytes());
        for (w, v) in words {
            h.update((w.len() as u64).to_le_bytes());
            h.update(w.as_bytes());
            for x in v {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Text vector format, one word per line, in insertion order.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dimension);
        for (w, v) in self.iter() {
            out.push_str(w);
            for x in v {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parses `word x1 .. xd` lines. A leading `count dimension` line is
    /// recognized and checked. Later duplicates replace earlier ones.
    pub fn parse(text: &str, origin: &Path) -> Result<(Self, LoadStats)> {
        let fmt_err = |line: usize, message: String| Error::Format {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .peekable();
        let mut stats = LoadStats::default();
        let mut declared: Option<(usize, usize)> = None;
        if let Some((_, first)) = lines.peek() {
            let toks: Vec<&str> = first.split_whitespace().collect();
            if toks.len() == 2 {
                if let (Ok(c), Ok(d)) = (toks[0].parse::<usize>(), toks[1].parse::<usize>()) {
                    declared = Some((c, d));
                    stats.header = true;
                    lines.next();
                }
            }
        }

        let mut table: Option<EmbeddingTable> = None;
        for (lineno, line) in lines {
            let mut toks = line.split_whitespace();
            let word = toks.next().expect("non-empty line");
            let vector = toks
                .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| fmt_err(lineno, format!("`{word}`: non-numeric component")))?;
            if vector.is_empty() {
                return Err(fmt_err(lineno, format!("`{word}`: no vector components")));
            }
            let t = match &mut table {
                Some(t) => t,
                None => {
                    let dim = declared.map_or(vector.len(), |(_, d)| d);
                    table.insert(EmbeddingTable::new(dim).map_err(|e| fmt_err(lineno, e.to_string()))?)
                }
            };
            if vector.len() != t.dimension {
                return Err(fmt_err(
                    lineno,
                    format!("`{word}`: {} components, expected {}", vector.len(), t.dimension),
                ));
            }
            if t.insert(word, vector)? {
                stats.duplicates += 1;
            }
        }
        let table = table.ok_or_else(|| Error::EmptyDataset(format!("{}: no embeddings", origin.display())))?;
        stats.words = table.len();
        Ok((table, stats))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(EmbeddingTable, LoadStats)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text, path)
}

/// One word per line; `#` starts a comment.
pub fn parse_wordlist(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributePair {
    pub left: String,
    pub right: String,
}

impl AttributePair {
    pub fn new(left: impl Into<String>, right: impl Into<String>) -> Self {
        AttributePair {
            left: left.into(),
            right: right.into(),
        }
    }

    pub fn swapped(&self) -> Self {
        AttributePair::new(self.right.clone(), self.left.clone())
    }
}

/// cos(word, left) − cos(word, right).
pub fn bias_score(word: &str, pair: &AttributePair, table: &EmbeddingTable) -> Result<f64> {
    let w = table.lookup(word)?;
    let l = table.lookup(&pair.left)?;
    let r = table.lookup(&pair.right)?;
    Ok(cosine(w, l)? - cosine(w, r)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub pair: AttributePair,
    pub table_fingerprint: String,
    pub scores: Vec<WordScore>,
    pub missing: Vec<String>,
    pub mean: f64,
    pub mean_abs: f64,
    pub max_abs: WordScore,
}

impl BiasReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("word,score\n");
        for s in &self.scores {
            out.push_str(&format!("{},{}\n", csv_field(&s.word), s.score));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Scores every word of `wordlist` found in the table; words absent from the
/// table are listed in `missing`. Duplicate wordlist entries are scored once.
pub fn bias_report(wordlist: &[String], pair: &AttributePair, table: &EmbeddingTable) -> Result<BiasReport> {
    table.lookup(&pair.left)?;
    table.lookup(&pair.right)?;
    if wordlist.is_empty() {
        return Err(Error::EmptyDataset("word list is empty".into()));
    }
    let mut seen = BTreeSet::new();
    let mut scores = Vec::new();
    let mut missing = Vec::new();
    for word in wordlist {
        if !seen.insert(word.as_str()) {
            continue;
        }
        match bias_score(word, pair, table) {
            Ok(score) => scores.push(WordScore {
                word: word.clone(),
                score,
            }),
            Err(Error::Lookup(_)) => missing.push(word.clone()),
            Err(e) => return Err(e),
        }
    }
    if scores.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "none of {} words found in the embedding table",
            missing.len()
        )));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().map(|s| s.score).sum::<f64>() / n;
    let mean_abs = scores.iter().map(|s| s.score.abs()).sum::<f64>() / n;
    let max_abs = scores
        .iter()
        .fold(None::<&WordScore>, |best, s| match best {
            Some(b) if b.score.abs() >= s.score.abs() => Some(b),
            _ => Some(s),
        })
        .cloned()
        .expect("non-empty");
    Ok(BiasReport {
        pair: pair.clone(),
        table_fingerprint: table.fingerprint(),
        scores,
        missing,
        mean,
        mean_abs,
        max_abs,
    })
}

/// Unit vector along the mean of `left − right` over all pairs.
pub fn gender_direction(pairs: &[AttributePair], table: &EmbeddingTable) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::DegenerateDirection);
    }
    let mut mean = vec![0.0; table.dimension()];
    for p in pairs {
        let (l, r) = (table.lookup(&p.left)?, table.lookup(&p.right)?);
        for ((m, a), b) in mean.iter_mut().zip(l).zip(r) {
            *m += a - b;
        }
    }
    let k = pairs.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    let n = norm(&mean);
    if n == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok(mean.into_iter().map(|m| m / n).collect())
}

/// Replaces every vector not in `exclude` by its component orthogonal to
/// `direction`.
pub fn debias_project(table: &EmbeddingTable, direction: &[f64], exclude: &BTreeSet<String>) -> Result<EmbeddingTable> {
    if direction.len() != table.dimension() {
        return Err(Error::DimensionMismatch {
            expected: table.dimension(),
            found: direction.len(),
        });
    }
    let n = norm(direction);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("direction norm {n} is not 1")));
    }
    let mut out = EmbeddingTable::new(table.dimension())?;
    for (word, v) in table.iter() {
        let projected = if exclude.contains(word) {
            v.to_vec()
        } else {
            let c = dot(v, direction);
            v.iter().zip(direction).map(|(x, d)| x - c * d).collect()
        };
        out.insert(word, projected)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    tokens: Vec<(String, f64)>,
}

impl TokenDistribution {
    pub fn new(tokens: Vec<(String, f64)>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Domain("token distribution is empty".into()));
        }
        let mut names = BTreeSet::new();
        for (t, p) in &tokens {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::Domain(format!("probability of `{t}` is {p}")));
            }
            if !names.insert(t.as_str()) {
                return Err(Error::Domain(format!("token `{t}` listed twice")));
            }
        }
        let sum: f64 = tokens.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(TokenDistribution { tokens })
    }

    pub fn tokens(&self) -> &[(String, f64)] {
        &self.tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// Always the most probable token; ties go to the earliest token.
    Argmax,
    /// Independent draws with the token probabilities.
    Proportional,
}

/// Token → count for `n` decoded tokens. Tokens never emitted are omitted.
pub fn sample_tokens(dist: &TokenDistribution, mode: DecodeMode, n: u64, seed: u64) -> Result<BTreeMap<String, u64>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let mut freq = BTreeMap::new();
    match mode {
        DecodeMode::Argmax => {
            let (top, _) = dist
                .tokens
                .iter()
                .fold(None::<&(String, f64)>, |best, t| match best {
                    Some(b) if b.1 >= t.1 => Some(b),
                    _ => Some(t),
                })
                .expect("non-empty");
            freq.insert(top.clone(), n);
        }
        DecodeMode::Proportional => {
            let index = WeightedIndex::new(dist.tokens.iter().map(|(_, p)| *p))
                .map_err(|e| Error::Domain(format!("invalid token weights: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts = vec![0u64; dist.tokens.len()];
            for _ in 0..n {
                counts[index.sample(&mut rng)] += 1;
            }
            for ((t, _), c) in dist.tokens.iter().zip(counts) {
                if c > 0 {
                    freq.insert(t.clone(), c);
                }
            }
        }
    }
    Ok(freq)
}
