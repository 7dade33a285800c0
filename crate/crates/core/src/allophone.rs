//! Phone posteriors → phoneme posteriors, and the logit matrix container.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fst::SymbolTable;

/// CTC blank; always column 0 of a logit matrix.
pub const BLANK_SYMBOL: &str = "<blk>";

const MAGIC: &[u8; 4] = b"LGT1";

/// Tolerance for declaring a row normalized.
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum AllophoneError {
    #[error("phoneme {phoneme:?} refers to unknown phone {phone:?}")]
    UnknownPhone { phoneme: String, phone: String },
    #[error("logits have no column for {0:?}")]
    MissingColumn(String),
    #[error("symbol column 0 must be {BLANK_SYMBOL}")]
    MissingBlank,
    #[error("duplicate symbol {0:?}")]
    DuplicateSymbol(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("not a logit file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PoolMode {
    #[default]
    Sum,
    Max,
}

/// Phoneme → allophone phones for one language, in file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllophoneMap {
    pub language: String,
    pub mapping: Vec<(String, Vec<String>)>,
}

impl AllophoneMap {
    /// Reads `phoneme<TAB>phone phone ...` lines; `#` starts a comment line.
    pub fn read<R: BufRead>(language: impl Into<String>, r: R) -> Result<Self, AllophoneError> {
        let mut mapping: Vec<(String, Vec<String>)> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| AllophoneError::Parse {
                line: i + 1,
                message,
            };
            let (p, phones) = line
                .split_once('\t')
                .ok_or_else(|| err(format!("expected `phoneme<TAB>phones`, got {line:?}")))?;
            let p = p.trim().to_string();
            let phones: Vec<String> = phones.split_whitespace().map(str::to_string).collect();
            if p.is_empty() || phones.is_empty() {
                return Err(err("phoneme and phone set must be non-empty".into()));
            }
            if mapping.iter().any(|(q, _)| *q == p) {
                return Err(err(format!("phoneme {p:?} listed twice")));
            }
            mapping.push((p, phones));
        }
        Ok(AllophoneMap {
            language: language.into(),
            mapping,
        })
    }

    /// Each phoneme mapped to the phone of the same name.
    pub fn identity<S: AsRef<str>>(language: impl Into<String>, phonemes: &[S]) -> Self {
        AllophoneMap {
            language: language.into(),
            mapping: phonemes
                .iter()
                .map(|p| (p.as_ref().to_string(), vec![p.as_ref().to_string()]))
                .collect(),
        }
    }
}

/// T×S natural-log probabilities, row-major. Column 0 is the blank.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitMatrix {
    symbols: Vec<String>,
    frames: usize,
    values: Vec<f64>,
    normalized: bool,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl LogitMatrix {
    /// `symbols[0]` must be the blank. `normalized` is only kept if every row checks out.
    pub fn new(
        symbols: Vec<String>,
        frames: usize,
        values: Vec<f64>,
        normalized: bool,
    ) -> Result<Self, AllophoneError> {
        if symbols.first().map(String::as_str) != Some(BLANK_SYMBOL) {
            return Err(AllophoneError::MissingBlank);
        }
        let mut seen = HashMap::new();
        for s in &symbols {
            if seen.insert(s.as_str(), ()).is_some() {
                return Err(AllophoneError::DuplicateSymbol(s.clone()));
            }
        }
        if values.len() != frames * symbols.len() {
            return Err(AllophoneError::Shape(format!(
                "{} values for {} frames × {} symbols",
                values.len(),
                frames,
                symbols.len()
            )));
        }
        let mut m = LogitMatrix {
            symbols,
            frames,
            values,
            normalized: false,
        };
        m.normalized = normalized && m.rows_normalized(NORM_TOLERANCE);
        Ok(m)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn column(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let s = self.symbols.len();
        &self.values[t * s..(t + 1) * s]
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.values[t * self.symbols.len() + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Whether every row's log-sum-exp is within `tol` of zero.
    pub fn rows_normalized(&self, tol: f64) -> bool {
        (0..self.frames).all(|t| log_sum_exp(self.row(t).iter().copied()).abs() <= tol)
    }

    /// Graph-style symbol table: `<eps>` at 0, then the columns in order.
    pub fn phoneme_table(&self) -> SymbolTable {
        let mut t = SymbolTable::new();
        for s in &self.symbols {
            t.add(s);
        }
        t
    }

    /// Reorders columns to `symbols` by name. Columns not listed are dropped,
    /// which clears the normalized flag unless rows still sum to one.
    pub fn select(&self, symbols: &[String]) -> Result<LogitMatrix, AllophoneError> {
        let cols = symbols
            .iter()
            .map(|s| {
                self.column(s)
                    .ok_or_else(|| AllophoneError::MissingColumn(s.clone()))
            })
            .collect::<Result<Vec<usize>, _>>()?;
        let mut values = Vec::with_capacity(self.frames * cols.len());
        for t in 0..self.frames {
            let row = self.row(t);
            values.extend(cols.iter().map(|&c| row[c]));
        }
        LogitMatrix::new(symbols.to_vec(), self.frames, values, self.normalized)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.frames as u32).to_le_bytes())?;
        w.write_all(&(self.symbols.len() as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.flush()
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.frames, self.symbols.len())?;
        for t in 0..self.frames {
            let row: Vec<String> = self.row(t).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        w.flush()
    }

    /// Parses either format, picking binary when the magic is present.
    pub fn from_bytes(bytes: &[u8], symbols: Vec<String>) -> Result<Self, AllophoneError> {
        let (frames, s, values) = if bytes.starts_with(MAGIC) {
            parse_binary(bytes)?
        } else {
            parse_text(bytes)?
        };
        if s != symbols.len() {
            return Err(AllophoneError::Shape(format!(
                "matrix has {s} columns but the symbol table has {}",
                symbols.len()
            )));
        }
        LogitMatrix::new(symbols, frames, values, true)
    }

    /// Loads a matrix file. Symbols come from the `<file>.syms` sidecar when it
    /// exists, otherwise from `fallback`.
    pub fn load(path: &Path, fallback: Option<&[String]>) -> Result<Self, AllophoneError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let side = sidecar_path(path);
        let symbols = if side.exists() {
            read_symbols(BufReader::new(File::open(&side)?))?
        } else {
            match fallback {
                Some(s) => s.to_vec(),
                None => {
                    return Err(AllophoneError::Format(format!(
                        "no symbol table {} for {}",
                        side.display(),
                        path.display()
                    )))
                }
            }
        };
        Self::from_bytes(&bytes, symbols)
    }

    /// Writes the matrix and its sidecar symbol file.
    pub fn save(&self, path: &Path, binary: bool) -> std::io::Result<()> {
        let w = BufWriter::new(File::create(path)?);
        if binary {
            self.write_binary(w)?;
        } else {
            self.write_text(w)?;
        }
        write_symbols(&self.symbols, BufWriter::new(File::create(sidecar_path(path))?))
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".syms");
    PathBuf::from(s)
}

/// Sidecar symbols use the symbol-table text format (`<eps>` at 0); the
/// columns are the entries from id 1 on, so a graph's phoneme table works as-is.
pub fn read_symbols<R: BufRead>(r: R) -> Result<Vec<String>, AllophoneError> {
    let table = SymbolTable::read_text(r).map_err(|e| AllophoneError::Format(e.to_string()))?;
    Ok(table.iter().skip(1).map(|(_, s)| s.to_string()).collect())
}

pub fn write_symbols<W: Write>(symbols: &[String], w: W) -> std::io::Result<()> {
    let mut t = SymbolTable::new();
    for s in symbols {
        t.add(s);
    }
    t.write_text(w)
}

fn parse_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), AllophoneError> {
    let u32_at = |o: usize| -> Result<usize, AllophoneError> {
        bytes
            .get(o..o + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| AllophoneError::Format("truncated header".into()))
    };
    let frames = u32_at(4)?;
    let s = u32_at(8)?;
    let body = &bytes[12..];
    let n = frames
        .checked_mul(s)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| AllophoneError::Format("header size overflow".into()))?;
    if body.len() != n {
        return Err(AllophoneError::Format(format!(
            "expected {n} value bytes for {frames}×{s}, found {}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((frames, s, values))
}

fn parse_text(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), AllophoneError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| AllophoneError::Format("neither LGT1 binary nor UTF-8 text".into()))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| AllophoneError::Format("empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|x| x.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| AllophoneError::Parse {
            line: 1,
            message: format!("bad header {header:?}"),
        })?;
    let [frames, s] = dims[..] else {
        return Err(AllophoneError::Parse {
            line: 1,
            message: format!("header must be `T S`, got {header:?}"),
        });
    };
    let mut values = Vec::with_capacity(frames * s);
    let mut rows = 0;
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AllophoneError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if row.len() != s || row.iter().any(|v| v.is_nan()) {
            return Err(AllophoneError::Parse {
                line: i + 1,
                message: format!("expected {s} numeric values, got {}", row.len()),
            });
        }
        values.extend(row);
        rows += 1;
    }
    if rows != frames {
        return Err(AllophoneError::Shape(format!(
            "header says {frames} rows, found {rows}"
        )));
    }
    Ok((frames, s, values))
}

/// Pools phone log-probabilities into phoneme log-probabilities per frame.
/// The blank column passes through unchanged. Output columns are the blank
/// followed by the map's phonemes in order.
pub fn map_logits(
    phones: &LogitMatrix,
    map: &AllophoneMap,
    mode: PoolMode,
) -> Result<LogitMatrix, AllophoneError> {
    let mut cols: Vec<Vec<usize>> = Vec::with_capacity(map.mapping.len());
    let mut claims = vec![0usize; phones.num_symbols()];
    for (phoneme, set) in &map.mapping {
        let mut c: Vec<usize> = Vec::with_capacity(set.len());
        for phone in set {
            match phones.column(phone) {
                Some(i) if i > 0 => {
                    if !c.contains(&i) {
                        c.push(i);
                        claims[i] += 1;
                    }
                }
                _ => {
                    return Err(AllophoneError::UnknownPhone {
                        phoneme: phoneme.clone(),
                        phone: phone.clone(),
                    })
                }
            }
        }
        cols.push(c);
    }

    let mut symbols = vec![BLANK_SYMBOL.to_string()];
    symbols.extend(map.mapping.iter().map(|(p, _)| p.clone()));
    let mut values = Vec::with_capacity(phones.frames() * symbols.len());
    for t in 0..phones.frames() {
        let row = phones.row(t);
        values.push(row[0]);
        for c in &cols {
            let it = c.iter().map(|&i| row[i]);
            values.push(match mode {
                PoolMode::Sum => log_sum_exp(it),
                PoolMode::Max => it.fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    let partition = claims[1..].iter().all(|&n| n == 1);
    let normalized = phones.is_normalized() && mode == PoolMode::Sum && partition;
    LogitMatrix::new(symbols, phones.frames(), values, normalized)
}
