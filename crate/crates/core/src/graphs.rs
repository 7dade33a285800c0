//! H (CTC topology), L (lexicon) and the composed HLG decoding graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc as Shared;

use thiserror::Error;

use crate::allophone::BLANK_SYMBOL;
use crate::fst::{self, compose, Arc, FstError, Label, SymbolTable, Weight, Wfst, EPS};
use crate::g2p::PronLexicon;
use crate::lm::{to_grammar_fst, LmError, NgramModel};

/// Label of the blank in every phoneme table.
pub const BLANK: Label = 1;

pub const HLG_FILE: &str = "HLG.fst";
pub const PHONEMES_FILE: &str = "phonemes.txt";
pub const WORDS_FILE: &str = "words.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("phoneme table must have {BLANK_SYMBOL} at id {BLANK}")]
    MissingBlank,
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("word {word:?}: phoneme {phoneme:?} is not in the phoneme table")]
    UnknownPhoneme { word: String, phoneme: String },
    #[error("word {0:?} is not in the word table")]
    UnknownWord(String),
    #[error("graph directory: {0}")]
    Layout(String),
    #[error(transparent)]
    Fst(#[from] FstError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Phoneme table in graph order: `<eps>`, `<blk>`, then `phonemes` sorted.
pub fn phoneme_table<'a>(phonemes: impl IntoIterator<Item = &'a String>) -> SymbolTable {
    let mut t = SymbolTable::new();
    t.add(BLANK_SYMBOL);
    let sorted: BTreeSet<&String> = phonemes.into_iter().collect();
    for p in sorted {
        t.add(p);
    }
    t
}

fn check_blank(phonemes: &SymbolTable) -> Result<(), GraphError> {
    if phonemes.id(BLANK_SYMBOL) != Some(BLANK) {
        return Err(GraphError::MissingBlank);
    }
    Ok(())
}

/// CTC topology over `phonemes` (blank at id 1, real phonemes from id 2).
///
/// State 0 is the blank state and state `p - 1` is "last emitted phoneme p".
/// Entering a phoneme state emits the phoneme; repeats and blanks emit nothing.
/// With `blank_loop` off the blank state has no self-loop, so runs of more
/// than one blank frame are rejected.
pub fn build_ctc_topology(
    phonemes: &Shared<SymbolTable>,
    blank_loop: bool,
) -> Result<Wfst, GraphError> {
    check_blank(phonemes)?;
    let n = phonemes.len() as Label;
    let state = |p: Label| p - 1;
    let mut h = Wfst::new();
    h.add_states((n - 1) as usize);
    h.set_start(0);
    let one = Weight::ONE;
    if blank_loop {
        h.add_arc(0, Arc::new(BLANK, EPS, one, 0));
    }
    for p in 2..n {
        h.add_arc(0, Arc::new(p, p, one, state(p)));
    }
    for p in 2..n {
        let s = state(p);
        h.add_arc(s, Arc::new(BLANK, EPS, one, 0));
        h.add_arc(s, Arc::new(p, EPS, one, s));
        for q in (2..n).filter(|&q| q != p) {
            h.add_arc(s, Arc::new(q, q, one, state(q)));
        }
    }
    for s in 0..n - 1 {
        h.set_final(s, one);
    }
    h.set_isymbols(Some(phonemes.clone()));
    h.set_osymbols(Some(phonemes.clone()));
    Ok(h)
}

/// Lexicon transducer: a loop through state 0 with one chain per pronunciation.
///
/// The word is emitted on the first arc. Pronunciations shared by several
/// entries end in a disambiguation symbol `#k`; these are appended to a copy
/// of the phoneme table that becomes the input table of the result.
pub fn build_lexicon_fst(
    lex: &PronLexicon,
    phonemes: &Shared<SymbolTable>,
    words: &Shared<SymbolTable>,
) -> Result<Wfst, GraphError> {
    check_blank(phonemes)?;
    if lex.is_empty() {
        return Err(GraphError::EmptyLexicon);
    }
    let mut entries = Vec::new();
    for (word, prons) in lex.entries() {
        let w = words
            .id(word)
            .ok_or_else(|| GraphError::UnknownWord(word.clone()))?;
        for pron in prons {
            let labels = pron
                .iter()
                .map(|p| match phonemes.id(p) {
                    Some(id) if id > BLANK => Ok(id),
                    _ => Err(GraphError::UnknownPhoneme {
                        word: word.clone(),
                        phoneme: p.clone(),
                    }),
                })
                .collect::<Result<Vec<Label>, _>>()?;
            entries.push((w, labels));
        }
    }

    let mut sharing: BTreeMap<&[Label], usize> = BTreeMap::new();
    for (_, labels) in &entries {
        *sharing.entry(labels.as_slice()).or_default() += 1;
    }
    let mut ext = (**phonemes).clone();
    let mut next_k: BTreeMap<&[Label], usize> = BTreeMap::new();
    let mut l = Wfst::new();
    l.add_state();
    l.set_start(0);
    l.set_final(0, Weight::ONE);
    for (w, labels) in &entries {
        let disambig = if sharing[labels.as_slice()] > 1 {
            let k = next_k.entry(labels.as_slice()).or_insert(0);
            *k += 1;
            Some(ext.add(&format!("#{k}")))
        } else {
            None
        };
        let mut arcs: Vec<(Label, Label)> = labels
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, if i == 0 { *w } else { EPS }))
            .collect();
        if let Some(d) = disambig {
            arcs.push((d, EPS));
        }
        let mut src = 0;
        for (i, (il, ol)) in arcs.iter().enumerate() {
            let dst = if i + 1 == arcs.len() { 0 } else { l.add_state() };
            l.add_arc(src, Arc::new(*il, *ol, Weight::ONE, dst));
            src = dst;
        }
    }
    l.set_isymbols(Some(Shared::new(ext)));
    l.set_osymbols(Some(words.clone()));
    Ok(l)
}

/// Decoding graph with its symbol tables and build provenance.
#[derive(Clone, Debug)]
pub struct DecoderGraph {
    pub hlg: Wfst,
    pub phonemes: Shared<SymbolTable>,
    pub words: Shared<SymbolTable>,
    pub provenance: BTreeMap<String, String>,
}

/// Composes `h ∘ (l ∘ g)`, trimming both products and erasing the
/// lexicon's disambiguation symbols in between.
pub fn build_hlg(
    h: &Wfst,
    l: &Wfst,
    g: &Wfst,
    provenance: BTreeMap<String, String>,
) -> Result<DecoderGraph, GraphError> {
    let phonemes = h
        .osymbols()
        .cloned()
        .ok_or_else(|| GraphError::Layout("H has no output symbol table".into()))?;
    let words = g
        .osymbols()
        .cloned()
        .ok_or_else(|| GraphError::Layout("G has no output symbol table".into()))?;
    let base = phonemes.len() as Label;
    let mut lg = compose(l, g)?.connect();
    lg.map_labels(|i| if i >= base { EPS } else { i }, |o| o);
    lg.set_isymbols(Some(phonemes.clone()));
    let hlg = compose(h, &lg)?.connect();
    debug_assert!(!hlg.has_negative_weights());
    debug_assert!(hlg.labels_within(phonemes.len(), words.len()));
    Ok(DecoderGraph {
        hlg,
        phonemes,
        words,
        provenance,
    })
}

/// Options for [`build_decoder_graph`].
#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub blank_loop: bool,
    pub lm_source: String,
    pub lexicon_source: String,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            blank_loop: true,
            lm_source: String::new(),
            lexicon_source: String::new(),
        }
    }
}

/// Full build from an n-gram model and a lexicon. Lexicon words outside the
/// model vocabulary are left out.
pub fn build_decoder_graph(
    model: &NgramModel,
    lex: &PronLexicon,
    opts: &BuildOptions,
) -> Result<DecoderGraph, GraphError> {
    let words = Shared::new(model.word_table());
    let mut kept = PronLexicon::new();
    let mut skipped = 0;
    for (w, prons) in lex.entries() {
        if words.contains(w) {
            for p in prons {
                kept.add(w, p.clone());
            }
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} lexicon words are outside the language model vocabulary");
    }
    let phonemes = Shared::new(phoneme_table(&kept.phoneme_inventory()));
    let h = build_ctc_topology(&phonemes, opts.blank_loop)?;
    let l = build_lexicon_fst(&kept, &phonemes, &words)?;
    let g = to_grammar_fst(model, &words)?;
    let provenance = BTreeMap::from([
        ("lm_source".to_string(), opts.lm_source.clone()),
        ("lexicon_source".to_string(), opts.lexicon_source.clone()),
        ("ngram_order".to_string(), model.order().to_string()),
        ("blank_loop".to_string(), opts.blank_loop.to_string()),
        ("lexicon_words".to_string(), kept.len().to_string()),
        ("phonemes".to_string(), (phonemes.len() - 2).to_string()),
    ]);
    build_hlg(&h, &l, &g, provenance)
}

impl DecoderGraph {
    /// Writes the four graph files into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<(), GraphError> {
        fs::create_dir_all(dir)?;
        fst::text::write_text(&self.hlg, BufWriter::new(File::create(dir.join(HLG_FILE))?))?;
        self.phonemes
            .write_text(BufWriter::new(File::create(dir.join(PHONEMES_FILE))?))?;
        self.words
            .write_text(BufWriter::new(File::create(dir.join(WORDS_FILE))?))?;
        let mut m = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        for (k, v) in &self.provenance {
            writeln!(m, "{k}={v}")?;
        }
        writeln!(m, "hlg_states={}", self.hlg.num_states())?;
        writeln!(m, "hlg_arcs={}", self.hlg.num_arcs())?;
        m.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, GraphError> {
        let open = |name: &str| -> Result<BufReader<File>, GraphError> {
            let p = dir.join(name);
            File::open(&p)
                .map(BufReader::new)
                .map_err(|e| GraphError::Layout(format!("{}: {e}", p.display())))
        };
        let phonemes = Shared::new(SymbolTable::read_text(open(PHONEMES_FILE)?)?);
        let words = Shared::new(SymbolTable::read_text(open(WORDS_FILE)?)?);
        check_blank(&phonemes)?;
        let mut hlg = fst::text::read_text(open(HLG_FILE)?)?;
        if !hlg.labels_within(phonemes.len(), words.len()) {
            return Err(GraphError::Layout(
                "HLG labels fall outside the symbol tables".into(),
            ));
        }
        hlg.set_isymbols(Some(phonemes.clone()));
        hlg.set_osymbols(Some(words.clone()));
        let mut provenance = BTreeMap::new();
        for line in open(MANIFEST_FILE)?.lines() {
            let line = line?;
            if let Some((k, v)) = line.split_once('=') {
                if k != "hlg_states" && k != "hlg_arcs" {
                    provenance.insert(k.to_string(), v.to_string());
                }
            }
        }
        Ok(DecoderGraph {
            hlg,
            phonemes,
            words,
            provenance,
        })
    }
}
