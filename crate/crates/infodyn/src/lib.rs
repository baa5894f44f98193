//! Command-line pipelines and file formats around `infodyn-core`.
//!
//! The binary is a thin wrapper over [`cli::run_from`]; the subcommands are
//! also callable from Rust through [`cli::execute`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::{CliError, CliResult};
