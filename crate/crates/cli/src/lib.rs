//! Command implementations behind the `hlgkit` binary.

pub mod commands;
pub mod config;
