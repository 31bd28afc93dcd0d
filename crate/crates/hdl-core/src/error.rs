//! Crate-wide error type.
//!
//! Every fallible operation returns [`enum@Error`]. Variants carry enough context
//! (paths, row numbers, sizes) for a front end to print a one-line diagnosis
//! that names the offending file or parameter.

use std::path::PathBuf;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// File I/O failed (open, read, write, create). The cause is carried as
    /// a source (not embedded in the message) so error-chain printers do not
    /// repeat it.
    #[error("i/o failure on {path}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file violates its documented layout (bad magic, truncation,
    /// missing header, out-of-order index column, ...).
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    /// An embedding value is NaN or infinite.
    #[error("non-finite embedding value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    /// An embedding row is the zero vector, for which cosine distance is
    /// undefined. Rejected at load time regardless of the metric in use.
    #[error("embedding row {row} has zero norm")]
    ZeroNormRow { row: usize },

    /// A row count does not match the count required by the caller.
    #[error("count mismatch: expected {expected} rows, found {found}")]
    CountMismatch { expected: usize, found: usize },

    /// A label field parsed as a negative integer.
    #[error("negative label at row {row}")]
    NegativeLabel { row: usize },

    /// A label field is not an integer at all.
    #[error("non-integer label {text:?} at row {row}")]
    NonIntegerLabel { row: usize, text: String },

    /// A label vector needs at least two classes to vote over.
    #[error("label set has {found} class(es); at least two are required")]
    TooFewClasses { found: usize },

    /// A label value lies outside the declared class range.
    #[error("label {label} at row {row} is out of range for {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },

    /// Two embedding sets that must share a dimension do not.
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    /// The requested neighbor count is outside the feasible range for the
    /// available candidate pool (the query itself is never a candidate).
    #[error("k = {requested} is outside the valid range 1..={available}")]
    KTooLarge { requested: usize, available: usize },

    /// A vote was requested over zero voters.
    #[error("cannot vote over an empty voter set")]
    EmptyVoterSet,

    /// A numeric parameter lies outside its documented domain.
    #[error("parameter out of domain: {what}")]
    DomainError { what: String },

    /// The sample fraction rounds down to zero centers.
    #[error("sample fraction p = {p} yields an empty center sample over {n} points")]
    EmptySample { p: f64, n: usize },

    /// A synthetic-data spec is internally inconsistent.
    #[error("invalid synthetic spec: {reason}")]
    InvalidSpec { reason: String },
}

impl Error {
    /// Wraps an [`std::io::Error`] together with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }

    /// Shorthand for a [`Error::MalformedFile`] with an owned reason.
    pub fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
