//! Error rates, oracle logits and the observed = am/pm + lm decomposition.

use std::fmt;

use thiserror::Error;

use crate::allophone::{AllophoneError, LogitMatrix, BLANK_SYMBOL};
use crate::fst::{Label, SymbolTable};

/// Oracle log-probability of the target symbol in its frame.
pub const ORACLE_HI: f64 = 0.0;
/// Oracle log-probability of every other symbol.
pub const ORACLE_LO: f64 = -1e4;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no utterances to score")]
    NoUtterances,
    #[error("references are empty")]
    EmptyReference,
    #[error("reference mismatch: {0}")]
    ReferenceMismatch(String),
    #[error("phoneme {0:?} is not in the symbol table")]
    UnknownPhoneme(String),
    #[error("symbol table must have {BLANK_SYMBOL} at id 1")]
    MissingBlank,
    #[error("need at least 3 rows, got {0}")]
    TooFewRows(usize),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error(transparent)]
    Logits(#[from] AllophoneError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Unit {
    Phoneme,
    Char,
    #[default]
    Word,
}

impl Unit {
    pub fn rate_name(self) -> &'static str {
        match self {
            Unit::Phoneme => "PER",
            Unit::Char => "CER",
            Unit::Word => "WER",
        }
    }

    /// Splits a transcript into scoring tokens. Characters skip whitespace.
    pub fn tokens(self, text: &str) -> Vec<String> {
        match self {
            Unit::Char => text
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(String::from)
                .collect(),
            Unit::Phoneme | Unit::Word => text.split_whitespace().map(str::to_string).collect(),
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "phoneme" | "per" => Ok(Unit::Phoneme),
            "char" | "cer" => Ok(Unit::Char),
            "word" | "wer" => Ok(Unit::Word),
            _ => Err(format!("unknown unit {s:?} (phoneme, char or word)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorReport {
    pub unit: Unit,
    pub ref_len: usize,
    pub ins: usize,
    pub del: usize,
    pub sub: usize,
}

impl ErrorReport {
    pub fn errors(&self) -> usize {
        self.ins + self.del + self.sub
    }

    fn ratio(&self, n: usize) -> f64 {
        if self.ref_len == 0 {
            if n == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            n as f64 / self.ref_len as f64
        }
    }

    pub fn rate(&self) -> f64 {
        self.ratio(self.errors())
    }

    pub fn ins_rate(&self) -> f64 {
        self.ratio(self.ins)
    }

    pub fn del_rate(&self) -> f64 {
        self.ratio(self.del)
    }

    pub fn sub_rate(&self) -> f64 {
        self.ratio(self.sub)
    }

    fn add(&mut self, o: &ErrorReport) {
        self.ref_len += o.ref_len;
        self.ins += o.ins;
        self.del += o.del;
        self.sub += o.sub;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Aligned<T> {
    Match(T),
    Sub(T, T),
    Ins(T),
    Del(T),
}

/// Unit-cost Levenshtein alignment. On equal cost the backtrace prefers
/// substitution (or match), then insertion, then deletion.
pub fn edit_align<T: PartialEq + Clone>(
    reference: &[T],
    hyp: &[T],
    unit: Unit,
) -> (ErrorReport, Vec<Aligned<T>>) {
    let (n, m) = (reference.len(), hyp.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[i - 1][j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            d[i][j] = diag.min(d[i][j - 1] + 1).min(d[i - 1][j] + 1);
        }
    }
    let mut rep = ErrorReport {
        unit,
        ref_len: n,
        ..ErrorReport::default()
    };
    let mut ali = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
                if same {
                    ali.push(Aligned::Match(hyp[j - 1].clone()));
                } else {
                    rep.sub += 1;
                    ali.push(Aligned::Sub(reference[i - 1].clone(), hyp[j - 1].clone()));
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i][j] == d[i][j - 1] + 1 {
            rep.ins += 1;
            ali.push(Aligned::Ins(hyp[j - 1].clone()));
            j -= 1;
        } else {
            rep.del += 1;
            ali.push(Aligned::Del(reference[i - 1].clone()));
            i -= 1;
        }
    }
    ali.reverse();
    (rep, ali)
}

/// Scores one transcript pair.
pub fn score_pair(reference: &str, hyp: &str, unit: Unit) -> ErrorReport {
    edit_align(&unit.tokens(reference), &unit.tokens(hyp), unit).0
}

/// Micro-averaged report: summed edits over summed reference lengths.
pub fn score_corpus<R: AsRef<str>, H: AsRef<str>>(
    pairs: &[(R, H)],
    unit: Unit,
) -> Result<ErrorReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoUtterances);
    }
    let mut total = ErrorReport {
        unit,
        ..ErrorReport::default()
    };
    for (r, h) in pairs {
        total.add(&score_pair(r.as_ref(), h.as_ref(), unit));
    }
    if total.ref_len == 0 {
        return Err(EvalError::EmptyReference);
    }
    Ok(total)
}

/// Unweighted mean of per-language rates: (total, ins, del, sub).
pub fn macro_average(reports: &[ErrorReport]) -> Option<[f64; 4]> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mut acc = [0.0; 4];
    for r in reports {
        acc[0] += r.rate();
        acc[1] += r.ins_rate();
        acc[2] += r.del_rate();
        acc[3] += r.sub_rate();
    }
    Some(acc.map(|x| x / n))
}

/// Blank-interleaved one-frame-per-symbol logits: `<blk> p1 <blk> ... pn <blk>`.
/// `table` is a graph phoneme table (`<eps>` at 0, `<blk>` at 1); its
/// symbols from id 1 become the columns.
pub fn oracle_logits<S: AsRef<str>>(
    phonemes: &[S],
    table: &SymbolTable,
    hi: f64,
    lo: f64,
) -> Result<LogitMatrix, EvalError> {
    if table.symbol(1) != Some(BLANK_SYMBOL) {
        return Err(EvalError::MissingBlank);
    }
    let cols: Vec<String> = table.iter().skip(1).map(|(_, s)| s.to_string()).collect();
    let mut targets: Vec<Label> = vec![1];
    for p in phonemes {
        let id = table
            .id(p.as_ref())
            .filter(|&id| id > 1)
            .ok_or_else(|| EvalError::UnknownPhoneme(p.as_ref().to_string()))?;
        targets.push(id);
        targets.push(1);
    }
    let mut values = Vec::with_capacity(targets.len() * cols.len());
    for &t in &targets {
        values.extend((1..=cols.len() as Label).map(|c| if c == t { hi } else { lo }));
    }
    Ok(LogitMatrix::new(cols, targets.len(), values, false)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition {
    pub observed: ErrorReport,
    pub lm: ErrorReport,
    pub am_pm_rate: f64,
}

/// Splits the observed error rate into the oracle (language model) part and the rest.
/// Both lists must pair the same references in the same order.
pub fn decompose<R: AsRef<str>, H: AsRef<str>>(
    observed: &[(R, H)],
    oracle: &[(R, H)],
    unit: Unit,
) -> Result<Decomposition, EvalError> {
    if observed.len() != oracle.len() {
        return Err(EvalError::ReferenceMismatch(format!(
            "{} observed vs {} oracle utterances",
            observed.len(),
            oracle.len()
        )));
    }
    for (i, ((a, _), (b, _))) in observed.iter().zip(oracle).enumerate() {
        if unit.tokens(a.as_ref()) != unit.tokens(b.as_ref()) {
            return Err(EvalError::ReferenceMismatch(format!(
                "utterance {} has different references",
                i + 1
            )));
        }
    }
    let observed = score_corpus(observed, unit)?;
    let lm = score_corpus(oracle, unit)?;
    Ok(Decomposition {
        observed,
        lm,
        am_pm_rate: observed.rate() - lm.rate(),
    })
}

/// Pearson correlation between (wer − cer) and average token length.
pub fn gap_length_correlation(rows: &[(f64, f64, f64)]) -> Result<f64, EvalError> {
    if rows.len() < 3 {
        return Err(EvalError::TooFewRows(rows.len()));
    }
    let n = rows.len() as f64;
    let gap: Vec<f64> = rows.iter().map(|(c, w, _)| w - c).collect();
    let len: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let mg = gap.iter().sum::<f64>() / n;
    let ml = len.iter().sum::<f64>() / n;
    let (mut sgl, mut sgg, mut sll) = (0.0, 0.0, 0.0);
    for (g, l) in gap.iter().zip(&len) {
        sgl += (g - mg) * (l - ml);
        sgg += (g - mg) * (g - mg);
        sll += (l - ml) * (l - ml);
    }
    // Relative test: constant columns leave rounding residue in the mean.
    let flat = |ss: f64, xs: &[f64]| ss <= 1e-20 * xs.iter().map(|x| x * x).sum::<f64>();
    if flat(sgg, &gap) {
        return Err(EvalError::ZeroVariance("wer - cer"));
    }
    if flat(sll, &len) {
        return Err(EvalError::ZeroVariance("token length"));
    }
    Ok(sgl / (sgg.sqrt() * sll.sqrt()))
}

/// Per-language rows with one column group per unit and a macro-average footer.
#[derive(Clone, Debug, Default)]
pub struct ScoreTable {
    pub units: Vec<Unit>,
    pub rows: Vec<(String, Vec<ErrorReport>)>,
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

impl fmt::Display for ScoreTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .rows
            .iter()
            .map(|(l, _)| l.chars().count())
            .chain(["Language".len(), "Average".len()])
            .max()
            .unwrap_or(8);
        write!(f, "{:<width$}", "Language")?;
        for u in &self.units {
            write!(f, " {:>7} {:>6} {:>6} {:>6}", u.rate_name(), "Ins", "Del", "Sub")?;
        }
        writeln!(f)?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, vals: &[[f64; 4]]| -> fmt::Result {
            write!(f, "{name:<width$}")?;
            for v in vals {
                write!(
                    f,
                    " {:>7} {:>6} {:>6} {:>6}",
                    pct(v[0]),
                    pct(v[1]),
                    pct(v[2]),
                    pct(v[3])
                )?;
            }
            writeln!(f)
        };
        for (lang, reps) in &self.rows {
            let vals: Vec<[f64; 4]> = reps
                .iter()
                .map(|r| [r.rate(), r.ins_rate(), r.del_rate(), r.sub_rate()])
                .collect();
            row(f, lang, &vals)?;
        }
        if self.rows.len() > 1 {
            let avg: Vec<[f64; 4]> = (0..self.units.len())
                .map(|k| {
                    let col: Vec<ErrorReport> = self.rows.iter().map(|(_, r)| r[k]).collect();
                    macro_average(&col).unwrap()
                })
                .collect();
            row(f, "Average", &avg)?;
        }
        Ok(())
    }
}

/// REF/HYP line pair; deletions are bracketed, gaps shown as `*`.
pub fn format_alignment<T: fmt::Display>(ali: &[Aligned<T>]) -> String {
    let mut r = Vec::with_capacity(ali.len());
    let mut h = Vec::with_capacity(ali.len());
    for a in ali {
        let (x, y) = match a {
            Aligned::Match(t) => (t.to_string(), t.to_string()),
            Aligned::Sub(a, b) => (a.to_string(), b.to_string()),
            Aligned::Ins(t) => ("*".to_string(), t.to_string()),
            Aligned::Del(t) => (format!("[{t}]"), "*".to_string()),
        };
        let w = x.chars().count().max(y.chars().count());
        r.push(format!("{x:<w$}"));
        h.push(format!("{y:<w$}"));
    }
    format!(
        "REF: {}\nHYP: {}\n",
        r.join(" ").trim_end(),
        h.join(" ").trim_end()
    )
}
