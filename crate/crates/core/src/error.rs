use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum TursError {
    /// A brute-force oracle was asked to enumerate more label sequences than allowed.
    EnumerationTooLarge { sequences: f64, limit: u64 },
    /// A dataset violates a structural invariant (lengths, label range, ...).
    InvalidDataset(String),
    /// An instance does not conform to the model schema.
    SchemaMismatch(String),
    /// A model is internally inconsistent (e.g. stored counts disagree with coverage atoms).
    InvalidModel(String),
    /// AUC is undefined because the labels contain a single class.
    UndefinedAuc(String),
    /// Bad argument to a metric or search routine.
    InvalidArgument(String),
}

impl fmt::Display for TursError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TursError::EnumerationTooLarge { sequences, limit } => write!(
                f,
                "refusing to enumerate {sequences} label sequences (limit {limit})"
            ),
            TursError::InvalidDataset(msg) => write!(f, "invalid dataset: {msg}"),
            TursError::SchemaMismatch(msg) => write!(f, "schema mismatch: {msg}"),
            TursError::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            TursError::UndefinedAuc(msg) => write!(f, "AUC undefined: {msg}"),
            TursError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for TursError {}
