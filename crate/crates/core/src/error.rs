//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants carry
//! enough context (paths, record ids, row indices) that a CLI can print the
//! error chain and exit without re-wrapping.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for corpus, embedding, metric and filter operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An underlying I/O operation failed. The path names the file involved.
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents do not match the expected format.
    #[error("malformed {what} in {path}: {detail}")]
    Malformed {
        /// Short noun for the artifact ("annotation file", "corpus tsv", ...).
        what: &'static str,
        path: PathBuf,
        detail: String,
    },

    /// A lexicon violates its structural invariants.
    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    /// A caller supplied an argument outside an operation's contract
    /// (k out of range, empty input, unknown preset, mismatched dimensions...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An id was referenced but is not present in the relevant collection.
    #[error("unknown {kind} id: {id}")]
    UnknownId {
        /// What namespace the id belongs to ("image", "embedding", "caption").
        kind: &'static str,
        id: String,
    },

    /// A record is internally inconsistent or violates a corpus invariant.
    #[error("record {id}: {detail}")]
    Record { id: String, detail: String },

    /// An embedding store failed validation (length mismatch, duplicate ids,
    /// non-finite values, broken normalization claim).
    #[error("invalid embedding store: {0}")]
    Embedding(String),
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Shorthand for a [`Error::Malformed`] with formatted detail.
    pub fn malformed(
        what: &'static str,
        path: impl Into<PathBuf>,
        detail: impl Into<String>,
    ) -> Self {
        Error::Malformed {
            what,
            path: path.into(),
            detail: detail.into(),
        }
    }
}
