//! Error type shared across the crate.
//!
//! Every fallible public operation returns [`Result`]. Variants are grouped by
//! the kind of misuse or failure they report: shape and validation problems,
//! file format problems, and numerical failures.

use crate::region::Norm;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two arrays (or an array and a model/region) disagree on a dimension.
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// An input that must be non-empty was empty.
    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    /// A NaN or infinity was found where a finite value is required.
    #[error("{what} must be finite")]
    NonFinite { what: &'static str },

    /// A parameter was outside its legal range, or otherwise malformed.
    #[error("invalid {what}: {why}")]
    InvalidArgument { what: &'static str, why: String },

    /// A norm that the requested distance computation does not support.
    #[error("the {region} region does not support the {norm}-norm for distances")]
    UnsupportedNorm { region: &'static str, norm: Norm },

    /// A malformed CSV cell or header. Line and column are 1-based and count
    /// the header line as line 1.
    #[error("csv: line {line}, column {column}: {message}")]
    Csv {
        line: usize,
        column: usize,
        message: String,
    },

    /// A malformed region specification file.
    #[error("region spec: {0}")]
    RegionSpec(String),

    /// A malformed or incompatible serialized model file.
    #[error("model file: {0}")]
    ModelFormat(String),

    /// A malformed configuration file or an inconsistent set of options.
    #[error("config: {0}")]
    Config(String),

    /// The normal equations could not be factorized.
    #[error("normal equations are singular; increase the ridge penalty")]
    SingularSystem,

    /// Model training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    /// The clipping constant is too small to dominate the learned score range,
    /// which would break the guarantee that in-region calibration points
    /// outrank every test score.
    #[error(
        "clipping constant {big_m} is too small: learned scores reach magnitude {max_abs}, \
         so the constant must exceed twice that"
    )]
    BigMTooSmall { big_m: f64, max_abs: f64 },

    /// An underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
