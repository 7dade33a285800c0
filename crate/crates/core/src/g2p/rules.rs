use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use super::G2pError;
use crate::ingest::normalize_word;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub graphemes: String,
    pub phonemes: Vec<String>,
}

/// Ordered grapheme→phoneme rules for one language.
#[derive(Clone, Debug)]
pub struct RuleTable {
    language: String,
    rules: Vec<Rule>,
    index: HashMap<String, usize>,
    max_len: usize,
}

/// Rule application result.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcription {
    pub phonemes: Vec<String>,
    /// Characters no rule matched.
    pub skipped: usize,
}

impl RuleTable {
    pub fn new(language: impl Into<String>, rules: Vec<Rule>) -> Result<Self, G2pError> {
        let mut index = HashMap::new();
        let mut max_len = 0;
        for (i, r) in rules.iter().enumerate() {
            if r.graphemes.is_empty() {
                return Err(G2pError::Parse {
                    line: i + 1,
                    message: "empty grapheme sequence".into(),
                });
            }
            max_len = max_len.max(r.graphemes.chars().count());
            index.entry(r.graphemes.clone()).or_insert(i);
        }
        Ok(RuleTable {
            language: language.into(),
            rules,
            index,
            max_len,
        })
    }

    /// Reads `grapheme<TAB>phoneme phoneme ...` lines; `#` starts a comment line.
    /// An empty phoneme field makes the grapheme silent.
    pub fn read<R: BufRead>(language: impl Into<String>, r: R) -> Result<Self, G2pError> {
        let mut rules = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (g, p) = line.split_once('\t').ok_or_else(|| G2pError::Parse {
                line: i + 1,
                message: format!("expected `grapheme<TAB>phonemes`, got {line:?}"),
            })?;
            let g = normalize_word(g.trim());
            if g.is_empty() {
                return Err(G2pError::Parse {
                    line: i + 1,
                    message: "empty grapheme sequence".into(),
                });
            }
            rules.push(Rule {
                graphemes: g,
                phonemes: p.split_whitespace().map(str::to_string).collect(),
            });
        }
        RuleTable::new(language, rules)
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Greedy longest match, left to right. Among rules with the same
    /// grapheme string the earliest wins; unmatched characters are skipped.
    pub fn apply(&self, word: &str) -> Transcription {
        let chars: Vec<char> = word.chars().collect();
        let mut out = Transcription::default();
        let mut i = 0;
        let mut buf = String::new();
        while i < chars.len() {
            let longest = self.max_len.min(chars.len() - i);
            let mut matched = false;
            for len in (1..=longest).rev() {
                buf.clear();
                buf.extend(&chars[i..i + len]);
                if let Some(&r) = self.index.get(buf.as_str()) {
                    out.phonemes.extend(self.rules[r].phonemes.iter().cloned());
                    i += len;
                    matched = true;
                    break;
                }
            }
            if !matched {
                out.skipped += 1;
                i += 1;
            }
        }
        out
    }

    /// Characters of `words` that no single-character rule covers.
    pub fn uncovered<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> BTreeSet<char> {
        let mut missing = BTreeSet::new();
        for w in words {
            for c in w.chars() {
                if !self.index.contains_key(c.to_string().as_str()) {
                    missing.insert(c);
                }
            }
        }
        missing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rules: &[(&str, &str)]) -> RuleTable {
        RuleTable::new(
            "xx",
            rules
                .iter()
                .map(|(g, p)| Rule {
                    graphemes: g.to_string(),
                    phonemes: p.split_whitespace().map(str::to_string).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn longest_match_wins() {
        let t = table(&[("ch", "tʃ"), ("c", "k"), ("a", "a")]);
        assert_eq!(t.apply("cha").phonemes, vec!["tʃ", "a"]);
        assert_eq!(t.apply("ca").phonemes, vec!["k", "a"]);
    }

    #[test]
    fn unmatched_characters_are_skipped_and_counted() {
        let t = table(&[("a", "a")]);
        let out = t.apply("xa");
        assert_eq!(out.phonemes, vec!["a"]);
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn earlier_rule_wins_for_equal_graphemes() {
        let t = table(&[("a", "ɑ"), ("a", "æ")]);
        assert_eq!(t.apply("a").phonemes, vec!["ɑ"]);
    }

    #[test]
    fn read_table_file() {
        let text = "# comment\nch\ttʃ\nll\tɬ\nh\t\nA\ta\n";
        let t = RuleTable::read("cy", text.as_bytes()).unwrap();
        assert_eq!(t.rules().len(), 4);
        assert_eq!(t.apply("llah").phonemes, vec!["ɬ", "a"]);
        assert_eq!(t.uncovered(["lx"]), ['l', 'x'].into_iter().collect());
        assert!(RuleTable::read("cy", "ch tʃ\n".as_bytes()).is_err());
    }
}
