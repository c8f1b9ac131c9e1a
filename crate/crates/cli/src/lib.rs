//! Experiment harness for network zero-sum extensive form games: game files, CSV
//! output and the `run`, `sweep` and `verify` commands.

pub mod cli;
pub mod commands;
pub mod experiment;
pub mod format;
