use std::io;
use std::path::PathBuf;

use thiserror::Error;
use topoquench_core::{Error as CoreError, WorstLink};

use crate::summary::RunSummary;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },

    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey { key: String, line: usize, first: usize },

    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { key: String, line: usize, message: String },

    #[error("`{key}` out of range: {message}")]
    Range { key: String, message: String },

    #[error("missing `{key}`: {reason}")]
    Missing { key: String, reason: String },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SYMMETRY: i32 = 2;
pub const EXIT_INADMISSIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },

    #[error("config {}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },

    #[error(transparent)]
    Core(#[from] CoreError),

    /// An index that must stay constant changed between samples. On an
    /// otherwise admissible grid this means the grid is too coarse.
    #[error(
        "{index} series is not constant ({values}); smallest link overlap {:.3e} at k = {} \
         along direction {} at t = {}; a denser discretization is required",
        worst.overlap, worst.k, worst.direction, worst.time
    )]
    NotConstant {
        index: &'static str,
        values: String,
        worst: WorstLink,
        summary: Box<RunSummary>,
    },

    #[error("{count} check(s) failed: {names}")]
    ChecksFailed {
        count: usize,
        names: String,
        symmetry: bool,
        summary: Box<RunSummary>,
    },

    #[error("writing {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Usage(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) if e.is_symmetry_violation() => EXIT_SYMMETRY,
            RunError::Core(e) if e.is_inadmissible() => EXIT_INADMISSIBLE,
            RunError::NotConstant { .. } => EXIT_INADMISSIBLE,
            RunError::ChecksFailed { symmetry: true, .. } => EXIT_SYMMETRY,
            _ => EXIT_FAILURE,
        }
    }

    /// The partial summary a failed run produced before failing, if any.
    pub fn summary(&self) -> Option<&RunSummary> {
        match self {
            RunError::NotConstant { summary, .. } | RunError::ChecksFailed { summary, .. } => Some(summary),
            _ => None,
        }
    }
}
