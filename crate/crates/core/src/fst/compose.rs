//! Offline composition with the three-state epsilon filter.
//!
//! Filter states: `0` = no pending epsilon move, `1` = the left machine last
//! moved alone on an output epsilon, `2` = the right machine last moved alone
//! on an input epsilon. A left-alone move is forbidden from `2`, a right-alone
//! move from `1`, and a simultaneous epsilon move only allowed from `0`, so
//! each pair of aligned paths yields exactly one composed path.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};

use super::{Arc, FstError, StateId, Wfst, EPS};

type Triple = (StateId, StateId, u8);

/// Composes `a` with `b`. The result is not trimmed; call [`Wfst::connect`].
pub fn compose(a: &Wfst, b: &Wfst) -> Result<Wfst, FstError> {
    if let (Some(out), Some(inp)) = (a.osymbols(), b.isymbols()) {
        if out != inp {
            return Err(FstError::SymbolMismatch(format!(
                "left output table ({} symbols) differs from right input table ({} symbols)",
                out.len(),
                inp.len()
            )));
        }
    }

    let mut result = Wfst::new();
    result.set_isymbols(a.isymbols().cloned());
    result.set_osymbols(b.osymbols().cloned());
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Ok(result);
    };

    let b_sorted;
    let b = if b.is_sorted(super::SortBy::Input) {
        b
    } else {
        b_sorted = b.arcsort(super::SortBy::Input);
        &b_sorted
    };

    let mut ids: HashMap<Triple, StateId> = HashMap::new();
    let mut queue: VecDeque<Triple> = VecDeque::new();
    let mut intern = |t: Triple, result: &mut Wfst, queue: &mut VecDeque<Triple>| -> StateId {
        match ids.entry(t) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let s = result.add_state();
                e.insert(s);
                queue.push_back(t);
                s
            }
        }
    };

    let start = intern((sa, sb, 0), &mut result, &mut queue);
    result.set_start(start);

    let mut pending: Vec<(u32, u32, super::Weight, Triple)> = Vec::new();
    let mut next_id: StateId = 0;
    while let Some((qa, qb, filter)) = queue.pop_front() {
        let src = next_id;
        next_id += 1;
        result.set_final(src, a.final_weight(qa).times(b.final_weight(qb)));

        let b_arcs = b.arcs(qb);
        let b_eps_end = b_arcs.partition_point(|x| x.ilabel == EPS);
        let (b_eps, b_rest) = b_arcs.split_at(b_eps_end);

        pending.clear();
        for ea in a.arcs(qa) {
            if ea.olabel == EPS {
                if filter != 2 {
                    pending.push((ea.ilabel, EPS, ea.weight, (ea.nextstate, qb, 1)));
                }
                if filter == 0 {
                    for eb in b_eps {
                        pending.push((
                            ea.ilabel,
                            eb.olabel,
                            ea.weight.times(eb.weight),
                            (ea.nextstate, eb.nextstate, 0),
                        ));
                    }
                }
            } else {
                let lo = b_rest.partition_point(|x| x.ilabel < ea.olabel);
                for eb in b_rest[lo..].iter().take_while(|x| x.ilabel == ea.olabel) {
                    pending.push((
                        ea.ilabel,
                        eb.olabel,
                        ea.weight.times(eb.weight),
                        (ea.nextstate, eb.nextstate, 0),
                    ));
                }
            }
        }
        if filter != 1 {
            for eb in b_eps {
                pending.push((EPS, eb.olabel, eb.weight, (qa, eb.nextstate, 2)));
            }
        }

        for &(il, ol, w, t) in &pending {
            let dst = intern(t, &mut result, &mut queue);
            result.add_arc(src, Arc::new(il, ol, w, dst));
        }
    }
    Ok(result)
}
