// SPDX-License-Identifier: MIT OR Apache-2.0

use strucbreak::error::ErrorKind;
use strucbreak::BreakError;
use thiserror::Error;

use crate::ingest::IngestError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    /// 2 config, 3 data, 4 numerical, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Output(_) => 1,
        }
    }

    /// Wrap a library error, tagging the message with the stage it came from.
    pub fn from_break(stage: &str, e: BreakError) -> Self {
        let msg = format!("[{stage}] {e}");
        match e.kind() {
            ErrorKind::Config => CliError::Config(msg),
            ErrorKind::Data => CliError::Data(msg),
            ErrorKind::Numerical => CliError::Numerical(msg),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(format!("[ingest] {e}"))
    }
}
