use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("{what} must be finite")]
    NonFinite { what: &'static str },

    #[error("{what} must be nonempty")]
    Empty { what: &'static str },

    #[error("{what} must be nonnegative")]
    Negative { what: &'static str },

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("model order d={d} out of range for {m} channels (need 1 <= d < m)")]
    ModelOrder { d: usize, m: usize },

    #[error("basis columns are not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },

    #[error("probability {p} outside {domain}")]
    InvalidProbability { p: f64, domain: &'static str },

    #[error("need at least {min} Monte Carlo trials, got {got}")]
    TooFewTrials { got: usize, min: usize },

    #[error("need at least {needed} columns, got {got}")]
    TooFewColumns { needed: usize, got: usize },

    #[error("column index {index} out of range for {ncols} columns")]
    ColumnOutOfRange { index: usize, ncols: usize },

    #[error("{what} is only implemented for a one-dimensional subspace, got d={d}")]
    UnsupportedModelOrder { what: &'static str, d: usize },

    #[error("max_iterations must be at least 1")]
    ZeroIterations,

    #[error("dataset file malformed: {reason}")]
    MalformedDataset { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
