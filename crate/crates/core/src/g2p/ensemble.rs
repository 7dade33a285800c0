use super::G2pError;

/// One column of the confusion network: each hypothesis's entry, `None` for epsilon.
type Slot = Vec<Option<String>>;

/// Merges hypotheses into a confusion network and votes each slot.
///
/// Hypotheses are aligned in ascending distance order (input order breaks ties).
/// The winning entry of a slot is the one with the most votes; on a tie the
/// entry from the closest hypothesis wins. An epsilon win deletes the slot.
pub fn ensemble(hypotheses: &[(Vec<String>, usize)]) -> Result<Vec<String>, G2pError> {
    if hypotheses.is_empty() {
        return Err(G2pError::EmptyHypotheses);
    }
    let mut order: Vec<usize> = (0..hypotheses.len()).collect();
    order.sort_by_key(|&i| (hypotheses[i].1, i));

    let mut slots: Vec<Slot> = Vec::new();
    for (added, &h) in order.iter().enumerate() {
        slots = align_into(slots, added, &hypotheses[h].0);
    }

    let mut out = Vec::new();
    for slot in &slots {
        // Candidates in rank order, so the first maximum is the closest one.
        let mut best: Option<(&Option<String>, usize)> = None;
        for entry in slot {
            let votes = slot.iter().filter(|e| *e == entry).count();
            if best.is_none_or(|(_, v)| votes > v) {
                best = Some((entry, votes));
            }
        }
        if let Some((Some(p), _)) = best {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Aligns `tokens` against the network (which already holds `width` hypotheses)
/// by edit distance, where a token matches a slot at no cost if any
/// hypothesis already put it there.
fn align_into(slots: Vec<Slot>, width: usize, tokens: &[String]) -> Vec<Slot> {
    let n = slots.len();
    let m = tokens.len();
    let sub = |i: usize, j: usize| -> usize {
        usize::from(!slots[i].iter().any(|e| e.as_deref() == Some(tokens[j].as_str())))
    };
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            d[i][j] = (d[i - 1][j - 1] + sub(i - 1, j - 1))
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j] + 1);
        }
    }

    // Backtrace preferring substitution, then insertion, then deletion.
    enum Op {
        Both,
        Token,
        Slot,
    }
    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + sub(i - 1, j - 1) {
            ops.push(Op::Both);
            i -= 1;
            j -= 1;
        } else if j > 0 && d[i][j] == d[i][j - 1] + 1 {
            ops.push(Op::Token);
            j -= 1;
        } else {
            ops.push(Op::Slot);
            i -= 1;
        }
    }
    ops.reverse();

    let mut merged = Vec::with_capacity(ops.len());
    let mut old = slots.into_iter();
    let mut tok = tokens.iter();
    for op in ops {
        match op {
            Op::Both => {
                let mut s = old.next().unwrap();
                s.push(tok.next().cloned());
                merged.push(s);
            }
            Op::Token => {
                let mut s = vec![None; width];
                s.push(tok.next().cloned());
                merged.push(s);
            }
            Op::Slot => {
                let mut s = old.next().unwrap();
                s.push(None);
                merged.push(s);
            }
        }
    }
    merged
}
