//! Toy language fixtures shared by the CLI integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hlgkit::allophone::LogitMatrix;
use hlgkit::eval::{oracle_logits, ORACLE_HI, ORACLE_LO};
use hlgkit::g2p::PronLexicon;
use hlgkit::graphs::{build_decoder_graph, BuildOptions, DecoderGraph};
use hlgkit::ingest::Corpus;
use hlgkit::lm::{count, estimate};
use rand::seq::SliceRandom;
use rand::Rng;

/// Single-letter phonemes, so a word's spelling is its pronunciation.
pub const PHONEMES: [&str; 12] = ["a", "e", "i", "o", "u", "k", "l", "m", "n", "p", "s", "t"];

pub struct ToyLanguage {
    pub words: Vec<String>,
    pub lexicon: PronLexicon,
    pub sentences: Vec<Vec<String>>,
}

impl ToyLanguage {
    /// `n_words` prefix-free words (so every phoneme string splits into words
    /// one way only) and `n_sents` sentences that between them use every word.
    pub fn generate<R: Rng>(rng: &mut R, n_words: usize, n_sents: usize) -> Self {
        let mut words: Vec<String> = Vec::new();
        while words.len() < n_words {
            let len = rng.gen_range(2..=4);
            let w: String = (0..len).map(|_| *PHONEMES.choose(rng).unwrap()).collect();
            if words.iter().all(|o| !o.starts_with(&w) && !w.starts_with(o.as_str())) {
                words.push(w);
            }
        }
        let mut lexicon = PronLexicon::new();
        for w in &words {
            lexicon.add(w, w.chars().map(String::from).collect());
        }
        let sentences = (0..n_sents)
            .map(|i| {
                let len = rng.gen_range(2..=7);
                let mut s: Vec<String> =
                    (0..len).map(|_| words.choose(rng).unwrap().clone()).collect();
                if i < words.len() {
                    let at = rng.gen_range(0..len);
                    s[at] = words[i].clone();
                }
                s
            })
            .collect();
        ToyLanguage {
            words,
            lexicon,
            sentences,
        }
    }

    pub fn corpus(&self) -> Corpus {
        Corpus {
            utterances: self.sentences.clone(),
        }
    }

    /// Corpus restricted to `keep`: other words are deleted from each sentence.
    pub fn truncated_corpus(&self, keep: &[String]) -> Corpus {
        Corpus {
            utterances: self
                .sentences
                .iter()
                .map(|s| s.iter().filter(|w| keep.contains(w)).cloned().collect::<Vec<_>>())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn phonemes_of(&self, sentence: &[String]) -> Vec<String> {
        sentence
            .iter()
            .flat_map(|w| self.lexicon.get(w).unwrap()[0].clone())
            .collect()
    }

    pub fn graph(&self, corpus: &Corpus, order: usize) -> DecoderGraph {
        let model = estimate(&count(corpus, order).unwrap());
        build_decoder_graph(&model, &self.lexicon, &BuildOptions::default()).unwrap()
    }

    /// Oracle logits for `sentence` with columns in `graph`'s order. Every
    /// phoneme of the sentence must be in the graph's table.
    pub fn oracle(&self, graph: &DecoderGraph, sentence: &[String]) -> LogitMatrix {
        oracle_logits(&self.phonemes_of(sentence), &graph.phonemes, ORACLE_HI, ORACLE_LO).unwrap()
    }

    /// A random half of the words whose pronunciations still use every phoneme.
    pub fn covering_half<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        loop {
            let mut w = self.words.clone();
            w.shuffle(rng);
            w.truncate(self.words.len() / 2);
            let used: std::collections::BTreeSet<char> = w.iter().flat_map(|x| x.chars()).collect();
            if used.len() == PHONEMES.len() {
                w.sort();
                return w;
            }
        }
    }

    pub fn corpus_text(&self) -> String {
        self.sentences.iter().map(|s| s.join(" ") + "\n").collect()
    }

    pub fn lexicon_text(&self) -> String {
        let mut out = Vec::new();
        self.lexicon.write(&mut out).unwrap();
        String::from_utf8(out).unwrap()
    }
}

/// Overwrites a fraction `q` of frames with a one-hot on a random column.
/// `order` and `targets` are drawn once per utterance, so the flipped sets
/// are nested as `q` grows.
pub fn flip_frames(m: &LogitMatrix, order: &[usize], targets: &[usize], q: f64) -> LogitMatrix {
    let frames = m.frames();
    let cols = m.num_symbols();
    let n = (q * frames as f64).round() as usize;
    let mut values = m.values().to_vec();
    for &t in &order[..n.min(frames)] {
        for c in 0..cols {
            values[t * cols + c] = if c == targets[t] { ORACLE_HI } else { ORACLE_LO };
        }
    }
    LogitMatrix::new(m.symbols().to_vec(), frames, values, false).unwrap()
}

pub fn flip_plan<R: Rng>(rng: &mut R, frames: usize, cols: usize) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..frames).collect();
    order.shuffle(rng);
    let targets = (0..frames).map(|_| rng.gen_range(0..cols)).collect();
    (order, targets)
}

pub fn hlgkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hlgkit"))
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning hlgkit");
    assert!(
        out.status.success(),
        "hlgkit failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Writes a corpus + lexicon config for `lang` into `dir` and returns its path.
pub fn write_toy_inputs(dir: &Path, lang: &ToyLanguage) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("corpus.txt"), lang.corpus_text()).unwrap();
    fs::write(dir.join("lexicon.txt"), lang.lexicon_text()).unwrap();
    let cfg = dir.join("toy.cfg");
    fs::write(
        &cfg,
        "language=toy\nlm.corpus=corpus.txt\nlm.order=3\nlexicon=lexicon.txt\n",
    )
    .unwrap();
    cfg
}

/// Saves one logit file per sentence plus a manifest; returns the manifest path.
pub fn write_logit_batch(dir: &Path, mats: &[(String, LogitMatrix)], binary: bool) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let mut manifest = String::new();
    for (id, m) in mats {
        let name = format!("{id}.lgt");
        m.save(&dir.join(&name), binary).unwrap();
        manifest.push_str(&format!("{id}\t{name}\n"));
    }
    let p = dir.join("manifest.tsv");
    fs::write(&p, manifest).unwrap();
    p
}

pub fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
    }
    out
}
