// SPDX-License-Identifier: MIT OR Apache-2.0

//! Library side of the `strucbreak` command: configuration, CSV ingestion,
//! the test pipeline and the renderers for each subcommand.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;

pub use error::CliError;
