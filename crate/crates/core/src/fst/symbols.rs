use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::FstError;

pub type Label = u32;

/// Label reserved for epsilon in every table.
pub const EPS: Label = 0;
pub const EPS_SYMBOL: &str = "<eps>";

/// Bijection between UTF-8 symbols and dense integer labels. Label 0 is `<eps>`.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    symbols: Vec<String>,
    ids: HashMap<String, Label>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for SymbolTable {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Eq for SymbolTable {}

impl SymbolTable {
    pub fn new() -> Self {
        let mut table = SymbolTable {
            symbols: Vec::new(),
            ids: HashMap::new(),
        };
        table.add(EPS_SYMBOL);
        table
    }

    /// Registers `symbol` if absent and returns its label.
    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&id) = self.ids.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as Label;
        self.symbols.push(symbol.to_string());
        self.ids.insert(symbol.to_string(), id);
        id
    }

    pub fn id(&self, symbol: &str) -> Option<Label> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: Label) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.ids.contains_key(symbol)
    }

    /// Number of entries, `<eps>` included.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (i as Label, s.as_str()))
    }

    /// Copy holding only the first `len` entries.
    pub fn truncated(&self, len: usize) -> SymbolTable {
        let mut out = SymbolTable::new();
        for s in self.symbols.iter().take(len).skip(1) {
            out.add(s);
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, sym) in self.iter() {
            writeln!(w, "{sym}\t{id}")?;
        }
        Ok(())
    }

    /// Reads `symbol<TAB>id` lines. Ids must be dense and id 0 must be `<eps>`.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, FstError> {
        let mut entries: Vec<(Label, String, usize)> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (sym, id) = line.rsplit_once('\t').ok_or_else(|| FstError::Parse {
                line: lineno,
                message: format!("expected `symbol<TAB>id`, got {line:?}"),
            })?;
            let id: Label = id.trim().parse().map_err(|_| FstError::Parse {
                line: lineno,
                message: format!("bad symbol id {id:?}"),
            })?;
            entries.push((id, sym.to_string(), lineno));
        }
        entries.sort_by_key(|e| e.0);
        let mut table = SymbolTable {
            symbols: Vec::with_capacity(entries.len()),
            ids: HashMap::with_capacity(entries.len()),
        };
        for (expected, (id, sym, lineno)) in entries.into_iter().enumerate() {
            if id as usize != expected {
                return Err(FstError::Parse {
                    line: lineno,
                    message: format!("symbol ids are not dense: expected {expected}, found {id}"),
                });
            }
            if id == EPS && sym != EPS_SYMBOL {
                return Err(FstError::Parse {
                    line: lineno,
                    message: format!("id 0 must be {EPS_SYMBOL}, found {sym:?}"),
                });
            }
            if table.ids.insert(sym.clone(), id).is_some() {
                return Err(FstError::Parse {
                    line: lineno,
                    message: format!("duplicate symbol {sym:?}"),
                });
            }
            table.symbols.push(sym);
        }
        if table.symbols.is_empty() {
            table.add(EPS_SYMBOL);
        }
        Ok(table)
    }
}
