//! Word-level speech decoders for languages without audio data.
//!
//! The pipeline turns raw text or unigram/bigram statistics into an HLG
//! decoding graph (CTC topology ∘ lexicon ∘ n-gram grammar), decodes phoneme
//! log-probability matrices through it, and scores the results.

pub mod allophone;
pub mod decoder;
pub mod eval;
pub mod fst;
pub mod g2p;
pub mod graphs;
pub mod ingest;
pub mod lm;
