//! Rule-based grapheme-to-phoneme conversion for languages without a
//! pronunciation dictionary: nearest-neighbour rule tables on a language
//! family tree, combined by a confusion-network vote.

mod ensemble;
mod rules;
mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::ingest::normalize_word;

pub use ensemble::ensemble;
pub use rules::{Rule, RuleTable, Transcription};
pub use tree::{knn_languages, PhyloTree};

#[derive(Debug, Error)]
pub enum G2pError {
    #[error("language {0:?} is not in the tree")]
    UnknownLanguage(String),
    #[error("invalid tree: {0}")]
    Tree(String),
    #[error("no hypotheses to combine")]
    EmptyHypotheses,
    #[error("no rule tables available")]
    NoTables,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Word → pronunciations, primary first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PronLexicon {
    entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl PronLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pronunciation. Empty pronunciations and exact repeats are ignored.
    pub fn add(&mut self, word: &str, pron: Vec<String>) {
        if pron.is_empty() {
            return;
        }
        let prons = self.entries.entry(word.to_string()).or_default();
        if !prons.contains(&pron) {
            prons.push(pron);
        }
    }

    pub fn get(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<Vec<String>>> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phoneme_inventory(&self) -> BTreeSet<String> {
        self.entries
            .values()
            .flatten()
            .flatten()
            .cloned()
            .collect()
    }

    /// `word<TAB>phoneme phoneme ...`; repeated words add alternative pronunciations.
    pub fn read<R: BufRead>(r: R) -> Result<Self, G2pError> {
        let mut lex = PronLexicon::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (w, p) = line.split_once('\t').ok_or_else(|| G2pError::Parse {
                line: i + 1,
                message: format!("expected `word<TAB>phonemes`, got {line:?}"),
            })?;
            let pron: Vec<String> = p.split_whitespace().map(str::to_string).collect();
            if pron.is_empty() {
                return Err(G2pError::Parse {
                    line: i + 1,
                    message: format!("word {w:?} has an empty pronunciation"),
                });
            }
            lex.add(&normalize_word(w.trim()), pron);
        }
        Ok(lex)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (word, prons) in &self.entries {
            for p in prons {
                writeln!(w, "{word}\t{}", p.join(" "))?;
            }
        }
        Ok(())
    }
}

/// What happened while phonemizing a vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct G2pReport {
    /// Languages whose tables were used, with their tree distance.
    pub neighbours: Vec<(String, usize)>,
    /// Words no neighbour could phonemize.
    pub dropped: Vec<String>,
    /// Characters skipped across all rule applications.
    pub skipped_chars: usize,
}

/// Phonemizes `vocab` for `target` using the `k` nearest tables on `tree`.
pub fn phonemize_lexicon(
    vocab: &[String],
    tree: &PhyloTree,
    tables: &BTreeMap<String, RuleTable>,
    target: &str,
    k: usize,
) -> Result<(PronLexicon, G2pReport), G2pError> {
    if tables.is_empty() {
        return Err(G2pError::NoTables);
    }
    let available: BTreeSet<String> = tables.keys().cloned().collect();
    let neighbours = knn_languages(tree, target, k.max(1), &available)?;
    if neighbours.is_empty() {
        return Err(G2pError::NoTables);
    }
    let mut report = G2pReport {
        neighbours,
        ..G2pReport::default()
    };
    let mut lex = PronLexicon::new();
    let mut seen = BTreeSet::new();
    for word in vocab {
        let word = normalize_word(word);
        if !seen.insert(word.clone()) {
            continue;
        }
        let mut hyps = Vec::new();
        for (lang, dist) in &report.neighbours {
            let t = tables[lang].apply(&word);
            report.skipped_chars += t.skipped;
            if !t.phonemes.is_empty() {
                hyps.push((t.phonemes, *dist));
            }
        }
        let pron = if hyps.is_empty() {
            Vec::new()
        } else {
            ensemble(&hyps)?
        };
        if pron.is_empty() {
            report.dropped.push(word);
        } else {
            lex.add(&word, pron);
        }
    }
    if !report.dropped.is_empty() {
        log::warn!(
            "{} of {} words have no pronunciation and were dropped",
            report.dropped.len(),
            seen.len()
        );
    }
    Ok((lex, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(lang: &str, rules: &[(&str, &str)]) -> RuleTable {
        let text: String = rules.iter().map(|(g, p)| format!("{g}\t{p}\n")).collect();
        RuleTable::read(lang, text.as_bytes()).unwrap()
    }

    #[test]
    fn lexicon_round_trip() {
        let mut lex = PronLexicon::new();
        lex.add("dog", vec!["d".into(), "ɒ".into(), "g".into()]);
        lex.add("dog", vec!["d".into(), "ɔ".into(), "g".into()]);
        lex.add("a", vec!["ə".into()]);
        let mut buf = Vec::new();
        lex.write(&mut buf).unwrap();
        let back = PronLexicon::read(buf.as_slice()).unwrap();
        assert_eq!(back, lex);
        assert_eq!(back.get("dog").unwrap()[0], vec!["d", "ɒ", "g"]);
        assert_eq!(back.phoneme_inventory().len(), 5);
        assert!(PronLexicon::read("dog\t\n".as_bytes()).is_err());
    }

    #[test]
    fn own_table_with_k1_is_direct_application() {
        let tree = PhyloTree::from_edges(&[("aa", "r"), ("bb", "r")], &[]).unwrap();
        let mut tables = BTreeMap::new();
        tables.insert("aa".to_string(), table("aa", &[("a", "a"), ("b", "p")]));
        tables.insert("bb".to_string(), table("bb", &[("a", "e"), ("b", "b")]));
        let vocab = vec!["ab".to_string(), "Ba".to_string()];
        let (lex, report) = phonemize_lexicon(&vocab, &tree, &tables, "aa", 1).unwrap();
        assert_eq!(report.neighbours, vec![("aa".to_string(), 0)]);
        assert_eq!(lex.get("ab").unwrap()[0], vec!["a", "p"]);
        assert_eq!(lex.get("ba").unwrap()[0], vec!["p", "a"]);
    }

    #[test]
    fn uncovered_word_is_dropped_and_reported() {
        let tree = PhyloTree::from_edges(&[("aa", "r"), ("zz", "r")], &[]).unwrap();
        let mut tables = BTreeMap::new();
        tables.insert("aa".to_string(), table("aa", &[("a", "a")]));
        let vocab = vec!["a".to_string(), "ދިވެހި".to_string()];
        let (lex, report) = phonemize_lexicon(&vocab, &tree, &tables, "zz", 1).unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(report.dropped, vec!["ދިވެހި".to_string()]);
        assert!(report.skipped_chars > 0);
    }

    #[test]
    fn no_tables_is_an_error() {
        let tree = PhyloTree::from_edges(&[("aa", "r")], &[]).unwrap();
        let r = phonemize_lexicon(&[], &tree, &BTreeMap::new(), "aa", 1);
        assert!(matches!(r, Err(G2pError::NoTables)));
    }
}
