//! Experiment plumbing behind the `ergoport` binary: TOML configs, file
//! formats and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
