//! Brute-force reference implementations used by the property and
//! acceptance tests. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hlgkit::fst::{Arc, Label, StateId, Weight, Wfst, EPS};
use rand::Rng;

/// A successful path: eps-free input string, eps-free output string, cost.
pub type PathRec = (Vec<Label>, Vec<Label>, f64);

/// Random machine with `n` states. When `acyclic`, arcs only go to higher ids.
pub fn random_wfst<R: Rng>(rng: &mut R, max_states: usize, alphabet: u32, acyclic: bool) -> Wfst {
    let n = rng.gen_range(1..=max_states);
    let mut f = Wfst::new();
    f.add_states(n);
    f.set_start(0);
    for s in 0..n {
        let narcs = rng.gen_range(0..=3);
        for _ in 0..narcs {
            let dst = if acyclic {
                if s + 1 >= n {
                    continue;
                }
                rng.gen_range(s + 1..n)
            } else {
                rng.gen_range(0..n)
            };
            let il = rng.gen_range(0..=alphabet);
            let ol = rng.gen_range(0..=alphabet);
            let w = (rng.gen_range(0..40) as f64) * 0.25;
            f.add_arc(s as StateId, Arc::new(il, ol, Weight::new(w), dst as StateId));
        }
        if rng.gen_bool(0.4) || s + 1 == n {
            f.set_final(s as StateId, Weight::new((rng.gen_range(0..8) as f64) * 0.5));
        }
    }
    f
}

/// Every successful path with at most `max_len` arcs.
pub fn enumerate_paths(f: &Wfst, max_len: usize) -> Vec<PathRec> {
    let mut out = Vec::new();
    let Some(start) = f.start() else {
        return out;
    };
    let mut stack: Vec<(StateId, Vec<Label>, Vec<Label>, f64, usize)> =
        vec![(start, vec![], vec![], 0.0, 0)];
    while let Some((s, i, o, w, len)) = stack.pop() {
        let fw = f.final_weight(s);
        if !fw.is_zero() {
            out.push((i.clone(), o.clone(), w + fw.value()));
        }
        if len == max_len {
            continue;
        }
        for a in f.arcs(s) {
            let mut i2 = i.clone();
            let mut o2 = o.clone();
            if a.ilabel != EPS {
                i2.push(a.ilabel);
            }
            if a.olabel != EPS {
                o2.push(a.olabel);
            }
            stack.push((a.nextstate, i2, o2, w + a.weight.value(), len + 1));
        }
    }
    out
}

/// Composition by pairing every path of `a` with every path of `b` whose
/// input string equals `a`'s output string.
pub fn compose_by_pairs(a: &[PathRec], b: &[PathRec]) -> Vec<PathRec> {
    let mut out = Vec::new();
    for (ai, ao, aw) in a {
        for (bi, bo, bw) in b {
            if ao == bi {
                out.push((ai.clone(), bo.clone(), aw + bw));
            }
        }
    }
    out
}

/// Canonical sorted multiset, weights rounded to 1e-6 buckets.
pub fn canonical(mut v: Vec<PathRec>) -> Vec<(Vec<Label>, Vec<Label>, i64)> {
    let mut c: Vec<_> = v
        .drain(..)
        .map(|(i, o, w)| (i, o, (w * 1e6).round() as i64))
        .collect();
    c.sort();
    c
}

/// Minimum weight per (input, output) string pair.
pub fn min_by_pair(v: &[PathRec]) -> BTreeMap<(Vec<Label>, Vec<Label>), f64> {
    let mut m = BTreeMap::new();
    for (i, o, w) in v {
        let e = m.entry((i.clone(), o.clone())).or_insert(f64::INFINITY);
        if *w < *e {
            *e = *w;
        }
    }
    m
}

/// Classic O(nm) Levenshtein distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// CTC collapse: merge repeats, then drop blanks.
pub fn ctc_collapse(labels: &[Label], blank: Label) -> Vec<Label> {
    let mut out = Vec::new();
    let mut prev = None;
    for &l in labels {
        if Some(l) != prev && l != blank {
            out.push(l);
        }
        prev = Some(l);
    }
    out
}

/// Exhaustive Viterbi over frames × states. `frame_cost(t, ilabel)` is the
/// acoustic cost of consuming `ilabel` at frame `t`. Epsilon-input arcs are
/// relaxed to a fixed point by repeated sweeps, without a priority queue.
pub fn viterbi_cost(
    f: &Wfst,
    frames: usize,
    frame_cost: impl Fn(usize, Label) -> f64,
) -> f64 {
    let Some(start) = f.start() else {
        return f64::INFINITY;
    };
    let n = f.num_states();
    let relax_eps = |d: &mut Vec<f64>| loop {
        let mut changed = false;
        for s in 0..n {
            if d[s].is_infinite() {
                continue;
            }
            for a in f.arcs(s as StateId) {
                if a.ilabel == EPS {
                    let c = d[s] + a.weight.value();
                    if c < d[a.nextstate as usize] - 1e-12 {
                        d[a.nextstate as usize] = c;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    };
    let mut d = vec![f64::INFINITY; n];
    d[start as usize] = 0.0;
    relax_eps(&mut d);
    for t in 0..frames {
        let mut next = vec![f64::INFINITY; n];
        for s in 0..n {
            if d[s].is_infinite() {
                continue;
            }
            for a in f.arcs(s as StateId) {
                if a.ilabel != EPS {
                    let c = d[s] + a.weight.value() + frame_cost(t, a.ilabel);
                    if c < next[a.nextstate as usize] {
                        next[a.nextstate as usize] = c;
                    }
                }
            }
        }
        relax_eps(&mut next);
        d = next;
    }
    (0..n)
        .map(|s| d[s] + f.final_weight(s as StateId).value())
        .fold(f64::INFINITY, f64::min)
}

/// Pearson correlation from the textbook covariance formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}
