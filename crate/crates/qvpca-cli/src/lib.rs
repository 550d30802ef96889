//! Library portion of the command-line tool: configuration, CSV
//! ingestion/emission, and the command runners.

// Negated comparisons like `!(x > 0.0)` are used on purpose: they treat
// NaN as a failure, unlike the inverted operator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod io;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0}")]
    Estimation(#[from] qvpca::Error),
}

impl CliError {
    /// Machine-readable JSON form written to stderr on failure.
    pub fn to_json(&self) -> String {
        let kind = match self {
            CliError::Parse(_) => "parse",
            CliError::Shape(_) => "shape",
            CliError::Io(_) => "io",
            CliError::Estimation(_) => "estimation",
        };
        serde_json::json!({ "error": { "kind": kind, "message": self.to_string() } }).to_string()
    }
}
