// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the break-testing pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BreakError {
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error(
        "design is numerically rank deficient (smallest singular value {smallest_singular:e})"
    )]
    RankDeficient { smallest_singular: f64 },

    #[error("sample too short: need more than {required} observations, got {actual}")]
    SampleTooShort { required: usize, actual: usize },

    #[error(
        "break fraction {gamma} is infeasible: regimes have {first} and {second} rows, need at least {min_rows}"
    )]
    BreakGridInfeasible {
        gamma: f64,
        first: usize,
        second: usize,
        min_rows: usize,
    },

    #[error("invalid trimming: gamma_star={gamma_star}, step={step}")]
    InvalidTrim { gamma_star: f64, step: f64 },

    #[error("break variance matrix is not positive definite at gamma={gamma}")]
    SingularVariance { gamma: f64 },

    #[error("full-sample variance matrix is singular")]
    SingularOmega,

    #[error("null distribution mismatch: {0}")]
    FunctionalMismatch(String),

    #[error("unknown design in catalog: {0}")]
    CatalogUnknown(String),

    #[error("power never reaches one half on the c grid (max power {max_power})")]
    NoCrossing { max_power: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl BreakError {
    /// Coarse classification used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            BreakError::InvalidTrim { .. }
            | BreakError::FunctionalMismatch(_)
            | BreakError::CatalogUnknown(_)
            | BreakError::InvalidConfig(_) => ErrorKind::Config,
            BreakError::NonFiniteInput(_)
            | BreakError::SampleTooShort { .. }
            | BreakError::BreakGridInfeasible { .. } => ErrorKind::Data,
            BreakError::RankDeficient { .. }
            | BreakError::SingularVariance { .. }
            | BreakError::SingularOmega
            | BreakError::NoCrossing { .. } => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

pub type Result<T> = std::result::Result<T, BreakError>;
