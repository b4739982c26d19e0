//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

/// Broad failure category, used by callers (notably the CLI) to map
/// errors onto exit codes without matching every variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Invalid configuration or parameters.
    Config,
    /// Missing, malformed, or inconsistent data.
    Data,
    /// Numerical failure (singular matrix, non-finite intermediate, ...).
    Numerical,
}

impl ErrorCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Data => "data",
            ErrorCategory::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("file not found: {path}")]
    MissingFile { path: PathBuf },

    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: non-finite sample value")]
    NonFiniteSample { path: PathBuf, line: usize },

    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },

    #[error("malformed stored model: {reason}")]
    MalformedModel { reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("group {group} has {count} samples, need at least {min}")]
    GroupTooSmall {
        group: String,
        count: usize,
        min: usize,
    },

    #[error("need at least {min} groups, got {got}")]
    TooFewGroups { min: usize, got: usize },

    #[error("grouping by {mode} requested but sample {index} carries no such label")]
    MissingLabel { mode: &'static str, index: usize },

    #[error("no footstep events detected in dataset")]
    NoEvents,

    #[error("degenerate dataset: {reason}")]
    DegenerateData { reason: String },

    #[error("numerical failure: {reason}")]
    Numerical { reason: String },

    #[error("stale decision: model version {model} but decision was made at version {decision}")]
    StaleDecision { model: u64, decision: u64 },

    #[error("non-finite value in input vector")]
    NonFiniteInput,
}

impl Error {
    /// Category used for CLI exit codes.
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidParameter { .. } => ErrorCategory::Config,
            MissingFile { .. }
            | MalformedRow { .. }
            | NonFiniteSample { .. }
            | MalformedManifest { .. }
            | MalformedModel { .. }
            | Io { .. }
            | DimensionMismatch { .. }
            | GroupTooSmall { .. }
            | TooFewGroups { .. }
            | MissingLabel { .. }
            | NoEvents
            | DegenerateData { .. }
            | NonFiniteInput => ErrorCategory::Data,
            Numerical { .. } | StaleDecision { .. } => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
