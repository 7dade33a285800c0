use std::sync::Arc as Shared;

use super::{Label, SymbolTable, Weight, EPS};

pub type StateId = u32;

/// A transition: `ilabel:olabel/weight -> nextstate`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: Weight,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: Weight, nextstate: StateId) -> Self {
        Arc {
            ilabel,
            olabel,
            weight,
            nextstate,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct State {
    arcs: Vec<Arc>,
    final_weight: Weight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SortBy {
    Input,
    Output,
}

/// Weighted finite-state transducer over the tropical semiring.
///
/// States are dense ids `0..num_states()`. A machine with zero states has no
/// start state and accepts nothing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Wfst {
    start: Option<StateId>,
    states: Vec<State>,
    isymbols: Option<Shared<SymbolTable>>,
    osymbols: Option<Shared<SymbolTable>>,
}

impl Wfst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(State {
            arcs: Vec::new(),
            final_weight: Weight::ZERO,
        });
        (self.states.len() - 1) as StateId
    }

    pub fn add_states(&mut self, n: usize) {
        for _ in 0..n {
            self.add_state();
        }
    }

    pub fn set_start(&mut self, s: StateId) {
        assert!((s as usize) < self.states.len(), "start {s} out of range");
        self.start = Some(s);
    }

    pub fn set_final(&mut self, s: StateId, w: Weight) {
        self.states[s as usize].final_weight = w;
    }

    pub fn add_arc(&mut self, src: StateId, arc: Arc) {
        assert!(
            (arc.nextstate as usize) < self.states.len(),
            "arc destination {} out of range",
            arc.nextstate
        );
        self.states[src as usize].arcs.push(arc);
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(|s| s.arcs.len()).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.states.len() as StateId
    }

    pub fn arcs(&self, s: StateId) -> &[Arc] {
        &self.states[s as usize].arcs
    }

    pub fn final_weight(&self, s: StateId) -> Weight {
        self.states[s as usize].final_weight
    }

    pub fn is_final(&self, s: StateId) -> bool {
        !self.final_weight(s).is_zero()
    }

    pub fn isymbols(&self) -> Option<&Shared<SymbolTable>> {
        self.isymbols.as_ref()
    }

    pub fn osymbols(&self) -> Option<&Shared<SymbolTable>> {
        self.osymbols.as_ref()
    }

    pub fn set_isymbols(&mut self, table: Option<Shared<SymbolTable>>) {
        self.isymbols = table;
    }

    pub fn set_osymbols(&mut self, table: Option<Shared<SymbolTable>>) {
        self.osymbols = table;
    }

    /// Linear acceptor (or transducer when `olabels` differs) over `labels`.
    pub fn linear(ilabels: &[Label], olabels: &[Label]) -> Wfst {
        assert_eq!(ilabels.len(), olabels.len());
        let mut f = Wfst::new();
        let mut s = f.add_state();
        f.set_start(s);
        for (&i, &o) in ilabels.iter().zip(olabels) {
            let n = f.add_state();
            f.add_arc(s, Arc::new(i, o, Weight::ONE, n));
            s = n;
        }
        f.set_final(s, Weight::ONE);
        f
    }

    pub fn linear_acceptor(labels: &[Label]) -> Wfst {
        Wfst::linear(labels, labels)
    }

    /// Rewrites labels in place through `map_in` / `map_out`.
    pub fn map_labels(
        &mut self,
        map_in: impl Fn(Label) -> Label,
        map_out: impl Fn(Label) -> Label,
    ) {
        for st in &mut self.states {
            for arc in &mut st.arcs {
                arc.ilabel = map_in(arc.ilabel);
                arc.olabel = map_out(arc.olabel);
            }
        }
    }

    /// Copy with each state's arcs stably sorted by the chosen label.
    pub fn arcsort(&self, by: SortBy) -> Wfst {
        let mut out = self.clone();
        for st in &mut out.states {
            match by {
                SortBy::Input => st.arcs.sort_by_key(|a| a.ilabel),
                SortBy::Output => st.arcs.sort_by_key(|a| a.olabel),
            }
        }
        out
    }

    pub fn is_sorted(&self, by: SortBy) -> bool {
        self.states.iter().all(|st| {
            st.arcs.windows(2).all(|w| match by {
                SortBy::Input => w[0].ilabel <= w[1].ilabel,
                SortBy::Output => w[0].olabel <= w[1].olabel,
            })
        })
    }

    /// Removes every state that is not on some start→final path.
    pub fn connect(&self) -> Wfst {
        let n = self.states.len();
        let mut out = Wfst {
            start: None,
            states: Vec::new(),
            isymbols: self.isymbols.clone(),
            osymbols: self.osymbols.clone(),
        };
        let Some(start) = self.start else {
            return out;
        };

        let mut access = vec![false; n];
        let mut stack = vec![start];
        access[start as usize] = true;
        while let Some(s) = stack.pop() {
            for arc in self.arcs(s) {
                let d = arc.nextstate as usize;
                if !access[d] {
                    access[d] = true;
                    stack.push(arc.nextstate);
                }
            }
        }

        let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for s in self.states() {
            for arc in self.arcs(s) {
                reverse[arc.nextstate as usize].push(s);
            }
        }
        let mut coaccess = vec![false; n];
        for s in self.states() {
            if self.is_final(s) {
                coaccess[s as usize] = true;
                stack.push(s);
            }
        }
        while let Some(s) = stack.pop() {
            for &p in &reverse[s as usize] {
                if !coaccess[p as usize] {
                    coaccess[p as usize] = true;
                    stack.push(p);
                }
            }
        }

        if !(access[start as usize] && coaccess[start as usize]) {
            return out;
        }
        let mut remap = vec![u32::MAX; n];
        for s in 0..n {
            if access[s] && coaccess[s] {
                remap[s] = out.add_state();
            }
        }
        for s in 0..n {
            let new = remap[s];
            if new == u32::MAX {
                continue;
            }
            out.states[new as usize].final_weight = self.states[s].final_weight;
            for arc in &self.states[s].arcs {
                let d = remap[arc.nextstate as usize];
                if d != u32::MAX {
                    out.states[new as usize].arcs.push(Arc { nextstate: d, ..*arc });
                }
            }
        }
        out.start = Some(remap[start as usize]);
        out
    }

    /// Smallest cost from each state to a final state (`Weight::ZERO` if none).
    pub fn distance_to_final(&self) -> Vec<Weight> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        let n = self.states.len();
        let mut reverse: Vec<Vec<(StateId, Weight)>> = vec![Vec::new(); n];
        for s in self.states() {
            for arc in self.arcs(s) {
                reverse[arc.nextstate as usize].push((s, arc.weight));
            }
        }
        let mut dist = vec![Weight::ZERO; n];
        let mut heap = BinaryHeap::new();
        for s in self.states() {
            let fw = self.final_weight(s);
            if !fw.is_zero() {
                dist[s as usize] = fw;
                heap.push(Reverse((fw, s)));
            }
        }
        while let Some(Reverse((d, s))) = heap.pop() {
            if d > dist[s as usize] {
                continue;
            }
            for &(p, w) in &reverse[s as usize] {
                let nd = w.times(d);
                if nd < dist[p as usize] {
                    dist[p as usize] = nd;
                    heap.push(Reverse((nd, p)));
                }
            }
        }
        dist
    }

    /// Whether every arc label is below the given input / output table sizes.
    pub fn labels_within(&self, in_len: usize, out_len: usize) -> bool {
        self.states.iter().all(|st| {
            st.arcs
                .iter()
                .all(|a| (a.ilabel as usize) < in_len && (a.olabel as usize) < out_len)
        })
    }

    pub fn has_negative_weights(&self) -> bool {
        self.states.iter().any(|st| {
            st.final_weight.value() < 0.0 || st.arcs.iter().any(|a| a.weight.value() < 0.0)
        })
    }

    pub fn input_epsilon_arcs(&self, s: StateId) -> impl Iterator<Item = &Arc> {
        self.arcs(s).iter().filter(|a| a.ilabel == EPS)
    }
}
