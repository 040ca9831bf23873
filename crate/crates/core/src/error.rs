//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by loading, parsing, analysis, and reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file is not valid notebook JSON or lacks the `cells` array.
    #[error("malformed notebook container {path}: {reason}")]
    MalformedContainer { path: PathBuf, reason: String },

    /// Notebook declares a kernel language other than Python. The unit is
    /// flagged and skipped, never analyzed.
    #[error("unsupported kernel language \"{language}\" in {path}")]
    UnsupportedKernel { path: PathBuf, language: String },

    /// Unsupported file extension (only `.py` and `.ipynb` are accepted).
    #[error("unsupported file type: {path}")]
    UnsupportedFileType { path: PathBuf },

    /// The analyzable source text does not parse as Python.
    #[error("syntax error in {path}: {message}")]
    Syntax { path: PathBuf, message: String },

    /// A scope has no countable statements; ratio-style metrics are absent.
    #[error("scope \"{scope}\" has no countable statements")]
    EmptyScope { scope: String },

    /// No `.py` or `.ipynb` files were found under the corpus root.
    #[error("empty corpus: no .py or .ipynb files under {root}")]
    EmptyCorpus { root: PathBuf },

    /// Safety guard for the fixpoint loop; cannot trigger for a correct
    /// transfer function over the finite line-set lattice.
    #[error("dataflow failed to stabilize within {limit} iterations in scope \"{scope}\"")]
    NonTermination { scope: String, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid mutation spec table at line {line}: {reason}")]
    SpecTable { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code convention: 2 for an empty corpus, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyCorpus { .. } => 2,
            _ => 1,
        }
    }
}
