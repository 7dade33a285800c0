//! Frame-synchronous Viterbi beam search over a decoding graph.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::allophone::LogitMatrix;
use crate::fst::{Label, StateId, Weight, Wfst, EPS};
use crate::graphs::{DecoderGraph, BLANK};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("logit symbols do not match the graph phoneme table: {0}")]
    SymbolMismatch(String),
    #[error("no surviving path reaches a final state")]
    NoPath,
    #[error("invalid beam configuration: {0}")]
    Config(String),
}

/// Pruning parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    /// Cost width kept around the best token each frame.
    pub search_beam: f64,
    /// Cost width of alternatives kept for n-best output.
    pub output_beam: f64,
    pub min_active: usize,
    pub max_active: usize,
    /// Multiplier on the acoustic (−logit) cost.
    pub acoustic_scale: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            search_beam: 20.0,
            output_beam: 8.0,
            min_active: 30,
            max_active: 10000,
            acoustic_scale: 1.0,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        let pos = |x: f64| x > 0.0 && !x.is_nan();
        if !pos(self.search_beam) || !pos(self.output_beam) || !pos(self.acoustic_scale) {
            return Err(DecodeError::Config(
                "beams and acoustic scale must be positive".into(),
            ));
        }
        if self.min_active == 0 || self.min_active > self.max_active {
            return Err(DecodeError::Config(format!(
                "need 0 < min_active ({}) <= max_active ({})",
                self.min_active, self.max_active
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub words: Vec<String>,
    /// Best-path phonemes after CTC collapse.
    pub phonemes: Vec<String>,
    pub total_cost: Weight,
    pub frames: usize,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Token {
    cost: f64,
    state: StateId,
    back: u32,
    ilabel: Label,
    olabel: Label,
}

/// Survivors of one frame, as token indices sorted by state.
type Frame = Vec<u32>;

struct Search<'a> {
    fst: &'a Wfst,
    logits: &'a LogitMatrix,
    cfg: &'a BeamConfig,
    tokens: Vec<Token>,
    slot: Vec<u32>,
}

impl<'a> Search<'a> {
    fn new(fst: &'a Wfst, logits: &'a LogitMatrix, cfg: &'a BeamConfig) -> Self {
        Search {
            fst,
            logits,
            cfg,
            tokens: Vec::new(),
            slot: vec![NONE; fst.num_states()],
        }
    }

    /// Acoustic cost of consuming `ilabel` at frame `t`.
    fn acoustic(&self, t: usize, ilabel: Label) -> f64 {
        -self.cfg.acoustic_scale * self.logits.get(t, ilabel as usize - 1)
    }

    /// Offers a path into this frame's slot for `state`; keeps the cheaper one.
    fn relax(&mut self, active: &mut Vec<StateId>, tok: Token) -> Option<u32> {
        let s = tok.state as usize;
        let cur = self.slot[s];
        if cur == NONE {
            active.push(tok.state);
        } else if self.tokens[cur as usize].cost <= tok.cost {
            return None;
        }
        self.tokens.push(tok);
        let id = (self.tokens.len() - 1) as u32;
        self.slot[s] = id;
        Some(id)
    }

    /// Dijkstra over epsilon-input arcs from the states already active.
    fn closure(&mut self, active: &mut Vec<StateId>) {
        let mut heap: BinaryHeap<Reverse<(Weight, StateId, u32)>> = active
            .iter()
            .map(|&s| {
                let id = self.slot[s as usize];
                Reverse((Weight::new(self.tokens[id as usize].cost), s, id))
            })
            .collect();
        while let Some(Reverse((_, s, id))) = heap.pop() {
            if self.slot[s as usize] != id {
                continue;
            }
            let cost = self.tokens[id as usize].cost;
            for a in self.fst.input_epsilon_arcs(s) {
                let tok = Token {
                    cost: cost + a.weight.value(),
                    state: a.nextstate,
                    back: id,
                    ilabel: EPS,
                    olabel: a.olabel,
                };
                if let Some(nid) = self.relax(active, tok) {
                    heap.push(Reverse((Weight::new(tok.cost), a.nextstate, nid)));
                }
            }
        }
    }

    /// Beam plus max/min-active pruning on `score(token)`. Clears the slots.
    fn prune(&mut self, active: &[StateId], score: impl Fn(&Token) -> f64) -> Frame {
        let mut cands: Vec<(f64, StateId, u32)> = active
            .iter()
            .map(|&s| {
                let id = self.slot[s as usize];
                (score(&self.tokens[id as usize]), s, id)
            })
            .filter(|c| c.0.is_finite())
            .collect();
        for &s in active {
            self.slot[s as usize] = NONE;
        }
        if cands.is_empty() {
            return Vec::new();
        }
        let best = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let in_beam = cands
            .iter()
            .filter(|c| c.0 <= best + self.cfg.search_beam)
            .count();
        let keep = in_beam.clamp(self.cfg.min_active.min(cands.len()), self.cfg.max_active);
        if keep < cands.len() {
            cands.select_nth_unstable_by(keep, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cands.truncate(keep);
        }
        cands.sort_by_key(|c| c.1);
        cands.into_iter().map(|c| c.2).collect()
    }

    /// Runs all frames; returns the survivors of every frame 0..=T. With
    /// `reached` set, also records every state reached in each frame before pruning.
    fn run(&mut self, mut reached: Option<&mut Vec<Vec<StateId>>>) -> Vec<Frame> {
        let mut frames = Vec::with_capacity(self.logits.frames() + 1);
        let Some(start) = self.fst.start() else {
            if let Some(r) = reached.as_deref_mut() {
                r.push(Vec::new());
            }
            return vec![Vec::new()];
        };
        let mut active = Vec::new();
        let tok = Token {
            cost: 0.0,
            state: start,
            back: NONE,
            ilabel: EPS,
            olabel: EPS,
        };
        self.relax(&mut active, tok);
        self.closure(&mut active);
        let last = self.logits.frames();
        if let Some(r) = reached.as_deref_mut() {
            r.push(active.clone());
        }
        frames.push(self.prune_frame(&active, last == 0));

        for t in 0..last {
            let mut active = Vec::new();
            let prev = frames.last().unwrap().clone();
            for id in prev {
                let from = self.tokens[id as usize];
                for a in self.fst.arcs(from.state) {
                    if a.ilabel == EPS {
                        continue;
                    }
                    let ac = self.acoustic(t, a.ilabel);
                    if ac == f64::INFINITY {
                        continue;
                    }
                    let tok = Token {
                        cost: from.cost + a.weight.value() + ac,
                        state: a.nextstate,
                        back: id,
                        ilabel: a.ilabel,
                        olabel: a.olabel,
                    };
                    self.relax(&mut active, tok);
                }
            }
            self.closure(&mut active);
            if let Some(r) = reached.as_deref_mut() {
                r.push(active.clone());
            }
            frames.push(self.prune_frame(&active, t + 1 == last));
        }
        frames
    }

    /// On the last frame only final states count, scored with their final weight.
    fn prune_frame(&mut self, active: &[StateId], last: bool) -> Frame {
        if last {
            let fst = self.fst;
            self.prune(active, |t| t.cost + fst.final_weight(t.state).value())
        } else {
            self.prune(active, |t| t.cost)
        }
    }

    fn total(&self, id: u32) -> f64 {
        let t = &self.tokens[id as usize];
        t.cost + self.fst.final_weight(t.state).value()
    }

    fn trace(&self, mut id: u32) -> (Vec<Label>, Vec<Label>) {
        let mut il = Vec::new();
        let mut ol = Vec::new();
        while id != NONE {
            let t = &self.tokens[id as usize];
            if t.ilabel != EPS {
                il.push(t.ilabel);
            }
            if t.olabel != EPS {
                ol.push(t.olabel);
            }
            id = t.back;
        }
        il.reverse();
        ol.reverse();
        (il, ol)
    }
}

fn check_symbols(graph: &DecoderGraph, logits: &LogitMatrix) -> Result<(), DecodeError> {
    let expect = graph.phonemes.len() - 1;
    if logits.num_symbols() != expect {
        return Err(DecodeError::SymbolMismatch(format!(
            "{} logit columns, graph has {} phonemes including the blank",
            logits.num_symbols(),
            expect
        )));
    }
    for (c, s) in logits.symbols().iter().enumerate() {
        if graph.phonemes.symbol(c as Label + 1) != Some(s.as_str()) {
            return Err(DecodeError::SymbolMismatch(format!(
                "column {c} is {s:?}, graph expects {:?}",
                graph.phonemes.symbol(c as Label + 1).unwrap_or("")
            )));
        }
    }
    Ok(())
}

fn result(graph: &DecoderGraph, frames: usize, il: &[Label], ol: &[Label], cost: f64) -> DecodeResult {
    let mut phonemes = Vec::new();
    let mut prev = None;
    for &l in il {
        if Some(l) != prev && l != BLANK {
            phonemes.push(graph.phonemes.symbol(l).unwrap_or("").to_string());
        }
        prev = Some(l);
    }
    DecodeResult {
        words: ol
            .iter()
            .map(|&w| graph.words.symbol(w).unwrap_or("").to_string())
            .collect(),
        phonemes,
        total_cost: Weight::new(cost),
        frames,
    }
}

/// Lowest-cost accepting path that survives pruning.
pub fn decode(
    graph: &DecoderGraph,
    logits: &LogitMatrix,
    cfg: &BeamConfig,
) -> Result<DecodeResult, DecodeError> {
    cfg.validate()?;
    check_symbols(graph, logits)?;
    let mut search = Search::new(&graph.hlg, logits, cfg);
    let frames = search.run(None);
    best_of(&search, graph, frames.last().unwrap())
}

fn best_of(search: &Search, graph: &DecoderGraph, last: &Frame) -> Result<DecodeResult, DecodeError> {
    let best = last
        .iter()
        .map(|&id| (search.total(id), search.tokens[id as usize].state, id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or(DecodeError::NoPath)?;
    let (il, ol) = search.trace(best.2);
    Ok(result(graph, search.logits.frames(), &il, &ol, best.0))
}

/// Up to `n` distinct word sequences in ascending cost, drawn from the
/// lattice of surviving states and kept within `output_beam` of the best.
/// The first entry is always the `decode` result.
pub fn decode_nbest(
    graph: &DecoderGraph,
    logits: &LogitMatrix,
    cfg: &BeamConfig,
    n: usize,
) -> Result<Vec<DecodeResult>, DecodeError> {
    cfg.validate()?;
    check_symbols(graph, logits)?;
    let mut search = Search::new(&graph.hlg, logits, cfg);
    let mut reached = Vec::new();
    let frames = search.run(Some(&mut reached));
    let first = best_of(&search, graph, frames.last().unwrap())?;
    if n <= 1 {
        return Ok(vec![first]);
    }
    let lattice = Lattice::build(&search, &frames, &reached);
    let first_words: Vec<Label> = first
        .words
        .iter()
        .map(|w| graph.words.id(w).unwrap_or(EPS))
        .collect();
    let limit = first.total_cost.value() + cfg.output_beam;
    let mut out = vec![first];
    for (il, ol, cost) in lattice.nbest(n - 1, limit, &first_words) {
        out.push(result(graph, logits.frames(), &il, &ol, cost));
    }
    Ok(out)
}

struct LatArc {
    to: usize,
    cost: f64,
    ilabel: Label,
    olabel: Label,
}

/// Arcs between surviving (frame, state) nodes.
struct Lattice {
    arcs: Vec<Vec<LatArc>>,
    finals: Vec<f64>,
    start: usize,
    /// Exact cost from each node to a final.
    beta: Vec<f64>,
}

/// Cap on A* pops; a safety valve for very dense lattices.
const MAX_POPS: usize = 1_000_000;

impl Lattice {
    /// Nodes are all states reached in a frame; only survivors emit into the
    /// next frame, mirroring the search. Finals are the last frame's survivors.
    fn build(search: &Search, frames: &[Frame], reached: &[Vec<StateId>]) -> Lattice {
        let fst = search.fst;
        let mut index: Vec<HashMap<StateId, usize>> = Vec::with_capacity(reached.len());
        let mut nodes: Vec<(usize, StateId)> = Vec::new();
        for (t, r) in reached.iter().enumerate() {
            let mut m = HashMap::new();
            for &s in r {
                m.insert(s, nodes.len());
                nodes.push((t, s));
            }
            index.push(m);
        }
        let survives: Vec<HashSet<StateId>> = frames
            .iter()
            .map(|f| f.iter().map(|&id| search.tokens[id as usize].state).collect())
            .collect();
        let last = frames.len() - 1;
        let mut arcs: Vec<Vec<LatArc>> = (0..nodes.len()).map(|_| Vec::new()).collect();
        let mut finals = vec![f64::INFINITY; nodes.len()];
        for (n, &(t, s)) in nodes.iter().enumerate() {
            let alive = survives[t].contains(&s);
            if t == last && alive {
                finals[n] = fst.final_weight(s).value();
            }
            for a in fst.arcs(s) {
                let (to, cost) = if a.ilabel == EPS {
                    match index[t].get(&a.nextstate) {
                        Some(&to) => (to, a.weight.value()),
                        None => continue,
                    }
                } else if t < last && alive {
                    match index[t + 1].get(&a.nextstate) {
                        Some(&to) => (to, a.weight.value() + search.acoustic(t, a.ilabel)),
                        None => continue,
                    }
                } else {
                    continue;
                };
                if cost.is_finite() {
                    arcs[n].push(LatArc {
                        to,
                        cost,
                        ilabel: a.ilabel,
                        olabel: a.olabel,
                    });
                }
            }
        }

        // Backward costs, one frame at a time: cross-frame arcs may be
        // negative, but within a frame only graph weights (≥ 0) appear.
        let mut beta = finals.clone();
        let mut rev_eps: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
        for (n, list) in arcs.iter().enumerate() {
            for a in list {
                if a.ilabel == EPS {
                    rev_eps[a.to].push((n, a.cost));
                }
            }
        }
        let mut lo = nodes.len();
        for t in (0..reached.len()).rev() {
            let hi = lo;
            lo -= reached[t].len();
            for n in lo..hi {
                for a in &arcs[n] {
                    if a.ilabel != EPS {
                        beta[n] = beta[n].min(a.cost + beta[a.to]);
                    }
                }
            }
            let mut heap: BinaryHeap<Reverse<(Weight, usize)>> = (lo..hi)
                .filter(|&n| beta[n].is_finite())
                .map(|n| Reverse((Weight::new(beta[n]), n)))
                .collect();
            while let Some(Reverse((w, n))) = heap.pop() {
                if w.value() > beta[n] {
                    continue;
                }
                for &(p, c) in &rev_eps[n] {
                    if beta[n] + c < beta[p] {
                        beta[p] = beta[n] + c;
                        heap.push(Reverse((Weight::new(beta[p]), p)));
                    }
                }
            }
        }
        Lattice {
            arcs,
            finals,
            start: 0,
            beta,
        }
    }

    /// A* over (node, word prefix); each word sequence is reported once, at its best cost.
    fn nbest(&self, n: usize, limit: f64, skip: &[Label]) -> Vec<(Vec<Label>, Vec<Label>, f64)> {
        #[derive(PartialEq, Eq, PartialOrd, Ord)]
        struct Entry {
            f: Weight,
            seq: usize,
            node: Option<usize>,
            trail: u32,
        }
        let mut out = Vec::new();
        if self.beta.is_empty() || !self.beta[self.start].is_finite() {
            return out;
        }
        // Trail arena: (parent, ilabel, olabel).
        let mut trail: Vec<(u32, Label, Label)> = Vec::new();
        let mut words_of: Vec<Vec<Label>> = Vec::new();
        let mut g_of: Vec<f64> = Vec::new();
        let mut heap = BinaryHeap::new();
        let mut seen: HashSet<(usize, Vec<Label>)> = HashSet::new();
        let mut emitted: HashSet<Vec<Label>> = HashSet::from([skip.to_vec()]);
        let mut seq = 0;
        let mut push = |heap: &mut BinaryHeap<Reverse<Entry>>, f: f64, node, tr| {
            seq += 1;
            heap.push(Reverse(Entry {
                f: Weight::new(f),
                seq,
                node,
                trail: tr,
            }));
        };
        trail.push((NONE, EPS, EPS));
        words_of.push(Vec::new());
        g_of.push(0.0);
        // Entry trail ids index words_of / g_of; node None marks a completed path.
        push(&mut heap, self.beta[self.start], Some(self.start), 0);
        let mut pops = 0;
        while let Some(Reverse(e)) = heap.pop() {
            pops += 1;
            if e.f.value() > limit + 1e-9 || out.len() >= n || pops > MAX_POPS {
                if pops > MAX_POPS {
                    log::warn!("n-best search stopped after {MAX_POPS} expansions");
                }
                break;
            }
            let tr = e.trail as usize;
            match e.node {
                None => {
                    if emitted.insert(words_of[tr].clone()) {
                        let (mut il, mut ol) = (Vec::new(), Vec::new());
                        let mut i = e.trail;
                        while i != NONE {
                            let (p, a, b) = trail[i as usize];
                            if a != EPS {
                                il.push(a);
                            }
                            if b != EPS {
                                ol.push(b);
                            }
                            i = p;
                        }
                        il.reverse();
                        ol.reverse();
                        out.push((il, ol, e.f.value()));
                    }
                }
                Some(node) => {
                    if !seen.insert((node, words_of[tr].clone())) {
                        continue;
                    }
                    let g = g_of[tr];
                    if self.finals[node].is_finite() && !emitted.contains(&words_of[tr]) {
                        push(&mut heap, g + self.finals[node], None, e.trail);
                    }
                    for a in &self.arcs[node] {
                        if !self.beta[a.to].is_finite() {
                            continue;
                        }
                        let mut w = words_of[tr].clone();
                        if a.olabel != EPS {
                            w.push(a.olabel);
                        }
                        if seen.contains(&(a.to, w.clone())) {
                            continue;
                        }
                        trail.push((e.trail, a.ilabel, a.olabel));
                        words_of.push(w);
                        g_of.push(g + a.cost);
                        let id = (trail.len() - 1) as u32;
                        push(&mut heap, g + a.cost + self.beta[a.to], Some(a.to), id);
                    }
                }
            }
        }
        out
    }
}
