//! N-gram counting, interpolated Witten-Bell estimation, ARPA I/O, and the
//! backoff grammar acceptor G.
//!
//! Interpolation: for a context `h` with `N` successor tokens over `T`
//! distinct types, `P(w|h) = (c(h,w) + T·P(w|h')) / (N + T)` where `h'` drops
//! the oldest word. Written as a backoff model, every seen n-gram stores that
//! interpolated probability and the context's backoff weight is `T / (N + T)`.
//! At the unigram level the `T / (N + T)` mass is shared uniformly by the
//! vocabulary entries with no count (always `<unk>`, and `</s>` for models
//! built from statistics files).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::Arc as Shared;

use thiserror::Error;

use crate::fst::{Arc, Label, StateId, SymbolTable, Weight, Wfst, EPS};
use crate::ingest::{BigramStats, Corpus, UnigramStats};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// log10 probability written for n-grams that exist only as contexts.
const ABSENT_LOGPROB: f64 = -99.0;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("n-gram order must be 1..=3, got {0}")]
    Order(usize),
    #[error("cannot count n-grams of an empty corpus")]
    EmptyCorpus,
    #[error("unigram statistics are empty")]
    EmptyUnigrams,
    #[error("word {0:?} is missing from the word symbol table")]
    MissingSymbol(String),
    #[error("ARPA line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Successors = BTreeMap<String, u64>;

/// Raw n-gram counts. `tables[k - 1]` maps each `(k-1)`-word context to its
/// successor counts. Corpus counts pad each utterance with `k - 1` `<s>`
/// markers for the order-`k` table and append `</s>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgramCounts {
    pub order: usize,
    pub tables: Vec<BTreeMap<Vec<String>, Successors>>,
}

impl NgramCounts {
    /// Total k-gram tokens in table `k`.
    pub fn total(&self, k: usize) -> u64 {
        self.tables[k - 1].values().flat_map(|s| s.values()).sum()
    }
}

pub fn count(corpus: &Corpus, order: usize) -> Result<NgramCounts, LmError> {
    if !(1..=3).contains(&order) {
        return Err(LmError::Order(order));
    }
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut tables = vec![BTreeMap::new(); order];
    for utt in &corpus.utterances {
        for k in 1..=order {
            let mut padded: Vec<&str> = vec![BOS; k - 1];
            padded.extend(utt.iter().map(String::as_str));
            padded.push(EOS);
            for i in (k - 1)..padded.len() {
                let ctx: Vec<String> = padded[i + 1 - k..i].iter().map(|s| s.to_string()).collect();
                *tables[k - 1]
                    .entry(ctx)
                    .or_insert_with(Successors::new)
                    .entry(padded[i].to_string())
                    .or_insert(0) += 1;
            }
        }
    }
    Ok(NgramCounts { order, tables })
}

/// Order-2 counts from unigram and bigram statistics. No sentence boundary
/// counts are synthesized. Words seen only in bigrams enter the vocabulary
/// with the total count of the bigram entries they occur in.
pub fn from_stats(uni: &UnigramStats, bi: &BigramStats) -> Result<NgramCounts, LmError> {
    if uni.entries.is_empty() {
        return Err(LmError::EmptyUnigrams);
    }
    let mut unigrams: Successors = uni.entries.clone();
    let mut marginal: BTreeMap<&str, u64> = BTreeMap::new();
    for ((a, b), &c) in &bi.entries {
        *marginal.entry(a).or_insert(0) += c;
        if a != b {
            *marginal.entry(b).or_insert(0) += c;
        }
    }
    for (w, c) in marginal {
        unigrams.entry(w.to_string()).or_insert(c);
    }
    let mut bigrams: BTreeMap<Vec<String>, Successors> = BTreeMap::new();
    for ((a, b), &c) in &bi.entries {
        bigrams
            .entry(vec![a.clone()])
            .or_default()
            .insert(b.clone(), c);
    }
    let mut first = BTreeMap::new();
    first.insert(Vec::new(), unigrams);
    Ok(NgramCounts {
        order: 2,
        tables: vec![first, bigrams],
    })
}

/// Conditional distribution stored for one context.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextProbs {
    /// log10 P(w | context) for words observed after this context.
    pub probs: BTreeMap<String, f64>,
    /// log10 backoff weight.
    pub backoff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    order: usize,
    vocab: BTreeSet<String>,
    contexts: BTreeMap<Vec<String>, ContextProbs>,
}

pub fn estimate(counts: &NgramCounts) -> NgramModel {
    let unigram_counts = counts
        .tables
        .first()
        .and_then(|t| t.get(&Vec::new()))
        .cloned()
        .unwrap_or_default();
    let mut vocab: BTreeSet<String> = unigram_counts.keys().cloned().collect();
    vocab.remove(BOS);
    vocab.insert(EOS.to_string());
    vocab.insert(UNK.to_string());

    let mut model = NgramModel {
        order: counts.order,
        vocab,
        contexts: BTreeMap::new(),
    };

    let seen: Successors = unigram_counts
        .into_iter()
        .filter(|(w, _)| w != BOS)
        .collect();
    let n: u64 = seen.values().sum();
    let t = seen.len() as u64;
    let unseen: Vec<&String> = model.vocab.iter().filter(|w| !seen.contains_key(*w)).collect();
    let mut probs = BTreeMap::new();
    if unseen.is_empty() {
        for (w, &c) in &seen {
            probs.insert(w.clone(), (c as f64 / n as f64).log10());
        }
    } else {
        let denom = (n + t) as f64;
        let share = if t == 0 {
            1.0 / unseen.len() as f64
        } else {
            t as f64 / denom / unseen.len() as f64
        };
        for (w, &c) in &seen {
            probs.insert(w.clone(), (c as f64 / denom).log10());
        }
        for w in unseen {
            probs.insert(w.clone(), share.log10());
        }
    }
    model
        .contexts
        .insert(Vec::new(), ContextProbs { probs, backoff: 0.0 });

    for k in 2..=counts.order {
        let mut level = Vec::new();
        for (ctx, succ) in &counts.tables[k - 1] {
            let n: u64 = succ.values().sum();
            let t = succ.len() as f64;
            let denom = n as f64 + t;
            let lower = &ctx[1..];
            let probs = succ
                .iter()
                .map(|(w, &c)| {
                    let p_lower = model.cond_prob(lower, w);
                    (w.clone(), ((c as f64 + t * p_lower) / denom).log10())
                })
                .collect();
            level.push((
                ctx.clone(),
                ContextProbs {
                    probs,
                    backoff: (t / denom).log10(),
                },
            ));
        }
        model.contexts.extend(level);
    }
    model
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Predictable words: everything but `<s>`.
    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn contexts(&self) -> &BTreeMap<Vec<String>, ContextProbs> {
        &self.contexts
    }

    fn map_oov<'a>(&self, w: &'a str) -> &'a str {
        if self.vocab.contains(w) {
            w
        } else {
            UNK
        }
    }

    /// log10 P(word | context), backing off through missing contexts.
    /// Only the last `order - 1` context words are used.
    pub fn cond_logprob<S: AsRef<str>>(&self, context: &[S], word: &str) -> f64 {
        let word = self.map_oov(word);
        let keep = context.len().min(self.order - 1);
        let ctx: Vec<String> = context[context.len() - keep..]
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        self.logprob_inner(&ctx, word)
    }

    fn logprob_inner(&self, ctx: &[String], word: &str) -> f64 {
        match self.contexts.get(ctx) {
            Some(cp) => match cp.probs.get(word) {
                Some(&lp) => lp,
                None if ctx.is_empty() => f64::NEG_INFINITY,
                None => cp.backoff + self.logprob_inner(&ctx[1..], word),
            },
            None if ctx.is_empty() => f64::NEG_INFINITY,
            None => self.logprob_inner(&ctx[1..], word),
        }
    }

    fn cond_prob(&self, ctx: &[String], word: &str) -> f64 {
        10f64.powf(self.logprob_inner(ctx, word))
    }

    /// log10 probability of a sentence including `</s>`; OOV words count as `<unk>`.
    pub fn sequence_logprob<S: AsRef<str>>(&self, sentence: &[S]) -> f64 {
        let mut history: Vec<String> = vec![BOS.to_string(); self.order - 1];
        let mut total = 0.0;
        for w in sentence.iter().map(|s| self.map_oov(s.as_ref())).chain([EOS]) {
            let start = history.len() - (self.order - 1);
            total += self.logprob_inner(&history[start..], w);
            history.push(w.to_string());
        }
        total
    }

    /// Longest suffix of `history` (at most `order - 1` words) that is a stored context.
    fn state_context<'a>(&self, history: &'a [String]) -> &'a [String] {
        let mut h = &history[history.len() - history.len().min(self.order - 1)..];
        while !self.contexts.contains_key(h) {
            h = &h[1..];
        }
        h
    }

    /// Writes the textual ARPA format (log10 probabilities and backoffs).
    pub fn write_arpa<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut levels: Vec<BTreeMap<Vec<String>, (f64, Option<f64>)>> =
            vec![BTreeMap::new(); self.order];
        for (ctx, cp) in &self.contexts {
            for (word, &lp) in &cp.probs {
                let mut ng = ctx.clone();
                ng.push(word.clone());
                levels[ng.len() - 1].insert(ng, (lp, None));
            }
        }
        for (ctx, cp) in &self.contexts {
            if ctx.is_empty() {
                continue;
            }
            let e = levels[ctx.len() - 1]
                .entry(ctx.clone())
                .or_insert((ABSENT_LOGPROB, None));
            e.1 = Some(cp.backoff);
        }
        writeln!(w, "\\data\\")?;
        for (i, l) in levels.iter().enumerate() {
            writeln!(w, "ngram {}={}", i + 1, l.len())?;
        }
        for (i, l) in levels.iter().enumerate() {
            writeln!(w, "\n\\{}-grams:", i + 1)?;
            for (ng, (lp, bo)) in l {
                match bo {
                    Some(bo) => writeln!(w, "{lp}\t{}\t{bo}", ng.join(" "))?,
                    None => writeln!(w, "{lp}\t{}", ng.join(" "))?,
                }
            }
        }
        writeln!(w, "\n\\end\\")
    }

    pub fn read_arpa<R: BufRead>(r: R) -> Result<NgramModel, LmError> {
        let mut order = 0;
        let mut level = 0usize;
        let mut contexts: BTreeMap<Vec<String>, ContextProbs> = BTreeMap::new();
        let mut vocab = BTreeSet::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let t = line.trim();
            if t.is_empty() || t == "\\data\\" || t == "\\end\\" {
                continue;
            }
            if let Some(rest) = t.strip_prefix("ngram ") {
                let (k, _) = rest.split_once('=').ok_or_else(|| LmError::Parse {
                    line: lineno,
                    message: format!("bad count line {t:?}"),
                })?;
                let k: usize = k.trim().parse().map_err(|_| LmError::Parse {
                    line: lineno,
                    message: format!("bad order in {t:?}"),
                })?;
                order = order.max(k);
                continue;
            }
            if t.starts_with('\\') && t.ends_with("-grams:") {
                level = t[1..t.len() - 7].parse().map_err(|_| LmError::Parse {
                    line: lineno,
                    message: format!("bad section header {t:?}"),
                })?;
                continue;
            }
            let fields: Vec<&str> = t.split('\t').collect();
            let bad = |m: &str| LmError::Parse {
                line: lineno,
                message: m.to_string(),
            };
            if level == 0 || fields.len() < 2 || fields.len() > 3 {
                return Err(bad("expected `logprob<TAB>ngram[<TAB>backoff]`"));
            }
            let lp: f64 = fields[0].parse().map_err(|_| bad("bad logprob"))?;
            let ng: Vec<String> = fields[1].split(' ').map(str::to_string).collect();
            if ng.len() != level {
                return Err(bad("n-gram length does not match its section"));
            }
            let (ctx, word) = ng.split_at(level - 1);
            if lp > ABSENT_LOGPROB {
                if level == 1 {
                    vocab.insert(word[0].clone());
                }
                contexts
                    .entry(ctx.to_vec())
                    .or_insert_with(|| ContextProbs {
                        probs: BTreeMap::new(),
                        backoff: 0.0,
                    })
                    .probs
                    .insert(word[0].clone(), lp);
            }
            if fields.len() == 3 {
                let bo: f64 = fields[2].parse().map_err(|_| bad("bad backoff"))?;
                contexts
                    .entry(ng.clone())
                    .or_insert_with(|| ContextProbs {
                        probs: BTreeMap::new(),
                        backoff: 0.0,
                    })
                    .backoff = bo;
            }
        }
        if order == 0 || !contexts.contains_key(&Vec::new()) {
            return Err(LmError::Parse {
                line: 0,
                message: "no unigram section".into(),
            });
        }
        Ok(NgramModel {
            order,
            vocab,
            contexts,
        })
    }

    /// Word symbol table holding every model word in sorted order.
    pub fn word_table(&self) -> SymbolTable {
        let mut t = SymbolTable::new();
        for w in &self.vocab {
            if w != EOS {
                t.add(w);
            }
        }
        t
    }
}

/// Backoff acceptor over `words`: one state per stored context, word arcs
/// weighted `-ln P(w|h)`, epsilon backoff arcs weighted `-ln α(h)`, and final
/// weight `-ln P(</s>|h)` at every state. The start state is the `<s>` context.
pub fn to_grammar_fst(model: &NgramModel, words: &Shared<SymbolTable>) -> Result<Wfst, LmError> {
    let ln10 = std::f64::consts::LN_10;
    let ids: BTreeMap<&Vec<String>, StateId> = model
        .contexts
        .keys()
        .enumerate()
        .map(|(i, c)| (c, i as StateId))
        .collect();
    let state_of = |history: &[String]| ids[&model.state_context(history).to_vec()];

    let mut g = Wfst::new();
    g.add_states(ids.len());
    g.set_isymbols(Some(words.clone()));
    g.set_osymbols(Some(words.clone()));
    let bos: Vec<String> = vec![BOS.to_string(); model.order - 1];
    g.set_start(state_of(&bos));

    for (ctx, cp) in &model.contexts {
        let src = ids[ctx];
        for (w, &lp) in &cp.probs {
            if w == EOS {
                continue;
            }
            let label = words
                .id(w)
                .ok_or_else(|| LmError::MissingSymbol(w.clone()))?;
            let mut next = ctx.clone();
            next.push(w.clone());
            g.add_arc(
                src,
                Arc::new(label, label, Weight::new((-lp * ln10).max(0.0)), state_of(&next)),
            );
        }
        if !ctx.is_empty() {
            let lower = state_of(&ctx[1..]);
            g.add_arc(
                src,
                Arc::new(EPS, EPS, Weight::new((-cp.backoff * ln10).max(0.0)), lower),
            );
        }
        let lp_end = model.logprob_inner(ctx, EOS);
        g.set_final(src, Weight::new((-lp_end * ln10).max(0.0)));
    }
    Ok(g)
}

/// Cost of `labels` through a backoff acceptor when epsilon arcs are taken
/// only as failure transitions (the exact model path).
pub fn backoff_path_cost(g: &Wfst, labels: &[Label]) -> Option<Weight> {
    let mut s = g.start()?;
    let mut cost = Weight::ONE;
    for &l in labels {
        loop {
            if let Some(a) = g.arcs(s).iter().find(|a| a.ilabel == l) {
                cost = cost.times(a.weight);
                s = a.nextstate;
                break;
            }
            let back = g.arcs(s).iter().find(|a| a.ilabel == EPS)?;
            cost = cost.times(back.weight);
            s = back.nextstate;
        }
    }
    Some(cost.times(g.final_weight(s)))
}
