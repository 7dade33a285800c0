//! Unigram/bigram statistic files, raw text corpora, and per-language
//! descriptive statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty statistics: no well-formed lines ({skipped} malformed)")]
    EmptyStatistics { skipped: usize },
    #[error("descriptive statistics need at least one language")]
    NoLanguages,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// NFC-normalized, lowercased form used for every word in the pipeline.
pub fn normalize_word(word: &str) -> String {
    word.nfc().collect::<String>().to_lowercase()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnigramStats {
    pub entries: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BigramStats {
    pub entries: BTreeMap<(String, String), u64>,
}

/// Outcome of parsing a statistics file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parsed<T> {
    pub stats: T,
    /// Lines that were not of the expected shape, blank lines excluded.
    pub skipped: usize,
    /// 1-based line numbers of the skipped lines.
    pub skipped_lines: Vec<usize>,
}

/// Splits `line` into `fields` words plus a trailing positive count.
fn split_counted(line: &str, fields: usize) -> Option<(Vec<String>, u64)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != fields + 1 {
        return None;
    }
    let count: u64 = toks[fields].parse().ok()?;
    if count == 0 {
        return None;
    }
    let words: Vec<String> = toks[..fields].iter().map(|w| normalize_word(w)).collect();
    if words.iter().any(|w| w.is_empty()) {
        return None;
    }
    Some((words, count))
}

fn parse_counted<R: BufRead>(
    r: R,
    fields: usize,
    mut insert: impl FnMut(Vec<String>, u64),
) -> Result<(usize, Vec<usize>), IngestError> {
    let mut good = 0;
    let mut bad = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match split_counted(&line, fields) {
            Some((words, count)) => {
                insert(words, count);
                good += 1;
            }
            None => bad.push(i + 1),
        }
    }
    if good == 0 {
        return Err(IngestError::EmptyStatistics { skipped: bad.len() });
    }
    Ok((good, bad))
}

/// Parses `word count` lines; duplicate words have their counts summed.
pub fn parse_unigrams<R: BufRead>(r: R) -> Result<Parsed<UnigramStats>, IngestError> {
    let mut stats = UnigramStats::default();
    let (_, bad) = parse_counted(r, 1, |mut w, c| {
        *stats.entries.entry(w.remove(0)).or_insert(0) += c;
    })?;
    Ok(Parsed {
        stats,
        skipped: bad.len(),
        skipped_lines: bad,
    })
}

/// Parses `w1 w2 count` lines; duplicate pairs have their counts summed.
pub fn parse_bigrams<R: BufRead>(r: R) -> Result<Parsed<BigramStats>, IngestError> {
    let mut stats = BigramStats::default();
    let (_, bad) = parse_counted(r, 2, |mut w, c| {
        let second = w.pop().unwrap();
        let first = w.pop().unwrap();
        *stats.entries.entry((first, second)).or_insert(0) += c;
    })?;
    Ok(Parsed {
        stats,
        skipped: bad.len(),
        skipped_lines: bad,
    })
}

impl UnigramStats {
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (word, c) in &self.entries {
            writeln!(w, "{word} {c}")?;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }
}

impl BigramStats {
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for ((a, b), c) in &self.entries {
            writeln!(w, "{a} {b} {c}")?;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }
}

/// Which characters are stripped from token edges.
#[derive(Clone, Debug, Default)]
pub enum Punctuation {
    /// Unicode general category P*.
    #[default]
    Unicode,
    Chars(BTreeSet<char>),
}

impl Punctuation {
    fn is_punct(&self, c: char) -> bool {
        match self {
            Punctuation::Unicode => c.general_category_group() == GeneralCategoryGroup::Punctuation,
            Punctuation::Chars(set) => set.contains(&c),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub utterances: Vec<Vec<String>>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Distinct words in first-seen order.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for utt in &self.utterances {
            for w in utt {
                if seen.insert(w.as_str()) {
                    out.push(w.clone());
                }
            }
        }
        out
    }
}

/// NFC + lowercase, whitespace tokenization, punctuation stripped from both
/// ends of each token. Tokens and utterances that end up empty are dropped.
pub fn normalize_line(line: &str, punct: &Punctuation) -> Vec<String> {
    normalize_word(line)
        .split_whitespace()
        .map(|tok| tok.trim_matches(|c| punct.is_punct(c)).to_string())
        .filter(|tok| !tok.is_empty())
        .collect()
}

pub fn normalize_corpus<R: BufRead>(r: R, punct: &Punctuation) -> Result<Corpus, IngestError> {
    let mut utterances = Vec::new();
    for line in r.lines() {
        let toks = normalize_line(&line?, punct);
        if !toks.is_empty() {
            utterances.push(toks);
        }
    }
    Ok(Corpus { utterances })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsSummary {
    pub languages: usize,
    pub unigram: FieldSummary,
    pub bigram: FieldSummary,
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(values: &[f64]) -> FieldSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    FieldSummary {
        mean,
        std: var.sqrt(),
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
    }
}

/// Summary over `(distinct unigrams, distinct bigrams)` per language.
pub fn descriptive_stats(per_language: &[(u64, u64)]) -> Result<StatsSummary, IngestError> {
    if per_language.is_empty() {
        return Err(IngestError::NoLanguages);
    }
    let uni: Vec<f64> = per_language.iter().map(|p| p.0 as f64).collect();
    let bi: Vec<f64> = per_language.iter().map(|p| p.1 as f64).collect();
    Ok(StatsSummary {
        languages: per_language.len(),
        unigram: summarize(&uni),
        bigram: summarize(&bi),
    })
}

impl fmt::Display for StatsSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "", "mean", "std", "25%", "median", "75%"
        )?;
        for (name, s) in [("unigram", &self.unigram), ("bigram", &self.bigram)] {
            writeln!(
                f,
                "{:<8} {:>12.0} {:>12.0} {:>12.0} {:>12.0} {:>12.0}",
                name, s.mean, s.std, s.q25, s.median, s.q75
            )?;
        }
        write!(f, "({} languages)", self.languages)
    }
}
