//! Text arc-list format.
//!
//! ```text
//! #start<TAB>0
//! 0<TAB>1<TAB>ilabel<TAB>olabel<TAB>weight
//! 1<TAB>final-weight
//! ```

use std::io::{BufRead, Write};

use super::{Arc, FstError, StateId, Weight, Wfst};

pub fn write_text<W: Write>(fst: &Wfst, mut w: W) -> std::io::Result<()> {
    let Some(start) = fst.start() else {
        return Ok(());
    };
    writeln!(w, "#start\t{start}")?;
    for s in fst.states() {
        for arc in fst.arcs(s) {
            writeln!(
                w,
                "{s}\t{}\t{}\t{}\t{}",
                arc.nextstate, arc.ilabel, arc.olabel, arc.weight
            )?;
        }
        let fw = fst.final_weight(s);
        if !fw.is_zero() {
            writeln!(w, "{s}\t{fw}")?;
        }
    }
    Ok(())
}

pub fn read_text<R: BufRead>(r: R) -> Result<Wfst, FstError> {
    enum Rec {
        Arc(StateId, Arc),
        Final(StateId, Weight),
    }
    let mut start: Option<StateId> = None;
    let mut records = Vec::new();
    let mut max_state: Option<StateId> = None;
    let bump = |m: &mut Option<StateId>, s: StateId| *m = Some(m.map_or(s, |x| x.max(s)));

    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |message: String| FstError::Parse {
            line: lineno,
            message,
        };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] == "#start" {
            let s = fields
                .get(1)
                .and_then(|x| x.trim().parse().ok())
                .ok_or_else(|| err(format!("bad start line {line:?}")))?;
            start = Some(s);
            bump(&mut max_state, s);
            continue;
        }
        let state = |x: &str| -> Result<StateId, FstError> {
            x.trim()
                .parse()
                .map_err(|_| err(format!("bad state id {x:?}")))
        };
        let weight = |x: &str| -> Result<Weight, FstError> {
            let v: f64 = x
                .trim()
                .parse()
                .map_err(|_| err(format!("bad weight {x:?}")))?;
            if v.is_nan() || v < 0.0 {
                return Err(err(format!("weight must be a non-negative cost, got {v}")));
            }
            Ok(Weight::new(v))
        };
        match fields.len() {
            5 => {
                let src = state(fields[0])?;
                let dst = state(fields[1])?;
                let il = fields[2]
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad input label {:?}", fields[2])))?;
                let ol = fields[3]
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad output label {:?}", fields[3])))?;
                let w = weight(fields[4])?;
                bump(&mut max_state, src);
                bump(&mut max_state, dst);
                records.push(Rec::Arc(src, Arc::new(il, ol, w, dst)));
            }
            2 => {
                let s = state(fields[0])?;
                bump(&mut max_state, s);
                records.push(Rec::Final(s, weight(fields[1])?));
            }
            n => return Err(err(format!("expected 2 or 5 fields, found {n}"))),
        }
    }

    let mut fst = Wfst::new();
    let Some(max_state) = max_state else {
        return Ok(fst);
    };
    let Some(start) = start else {
        return Err(FstError::Parse {
            line: 1,
            message: "missing #start line".into(),
        });
    };
    fst.add_states(max_state as usize + 1);
    fst.set_start(start);
    for rec in records {
        match rec {
            Rec::Arc(s, a) => fst.add_arc(s, a),
            Rec::Final(s, w) => fst.set_final(s, w),
        }
    }
    Ok(fst)
}
