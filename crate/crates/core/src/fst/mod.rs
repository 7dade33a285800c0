//! Tropical-semiring weighted finite-state transducers.

mod compose;
mod paths;
mod symbols;
pub mod text;
mod weight;
mod wfst;

pub use compose::compose;
pub use paths::{shortest_path, Path};
pub use symbols::{Label, SymbolTable, EPS, EPS_SYMBOL};
pub use weight::Weight;
pub use wfst::{Arc, SortBy, StateId, Wfst};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FstError {
    #[error("symbol table mismatch: {0}")]
    SymbolMismatch(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
