use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Label, StateId, Weight, Wfst, EPS};

/// One successful path with epsilons stripped from both label sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
    pub weight: Weight,
}

const FINAL: StateId = StateId::MAX;

struct Node {
    state: StateId,
    cost: Weight,
    parent: u32,
    ilabel: Label,
    olabel: Label,
}

/// Up to `n` lowest-cost successful paths in nondecreasing cost order.
///
/// Paths are not deduplicated by label sequence. A* over the exact distance
/// to a final state, with each state expanded at most `n` times.
pub fn shortest_path(fst: &Wfst, n: usize) -> Vec<Path> {
    let mut out = Vec::new();
    let Some(start) = fst.start() else {
        return out;
    };
    if n == 0 {
        return out;
    }
    let dist = fst.distance_to_final();
    if dist[start as usize].is_zero() {
        return out;
    }

    let mut nodes: Vec<Node> = vec![Node {
        state: start,
        cost: Weight::ONE,
        parent: u32::MAX,
        ilabel: EPS,
        olabel: EPS,
    }];
    let mut visits = vec![0usize; fst.num_states()];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Reverse((dist[start as usize], seq, 0u32)));

    while let Some(Reverse((_, _, idx))) = heap.pop() {
        let (state, cost) = (nodes[idx as usize].state, nodes[idx as usize].cost);
        if state == FINAL {
            out.push(trace(&nodes, idx, cost));
            if out.len() == n {
                break;
            }
            continue;
        }
        visits[state as usize] += 1;
        if visits[state as usize] > n {
            continue;
        }
        let fw = fst.final_weight(state);
        if !fw.is_zero() {
            let c = cost.times(fw);
            nodes.push(Node {
                state: FINAL,
                cost: c,
                parent: idx,
                ilabel: EPS,
                olabel: EPS,
            });
            seq += 1;
            heap.push(Reverse((c, seq, (nodes.len() - 1) as u32)));
        }
        for arc in fst.arcs(state) {
            let h = dist[arc.nextstate as usize];
            if h.is_zero() {
                continue;
            }
            let c = cost.times(arc.weight);
            nodes.push(Node {
                state: arc.nextstate,
                cost: c,
                parent: idx,
                ilabel: arc.ilabel,
                olabel: arc.olabel,
            });
            seq += 1;
            heap.push(Reverse((c.times(h), seq, (nodes.len() - 1) as u32)));
        }
    }
    out
}

fn trace(nodes: &[Node], mut idx: u32, weight: Weight) -> Path {
    let mut ilabels = Vec::new();
    let mut olabels = Vec::new();
    while idx != u32::MAX {
        let node = &nodes[idx as usize];
        if node.ilabel != EPS {
            ilabels.push(node.ilabel);
        }
        if node.olabel != EPS {
            olabels.push(node.olabel);
        }
        idx = node.parent;
    }
    ilabels.reverse();
    olabels.reverse();
    Path {
        ilabels,
        olabels,
        weight,
    }
}
