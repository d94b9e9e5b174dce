use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: left is {}x{}, right is {}x{}", left.0, left.1, right.0, right.1)]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value {value} at ({row}, {col}) in {context}")]
    NonFinite {
        context: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("invalid sparse matrix: {0}")]
    InvalidSparse(String),

    #[error("matrix is not positive definite: pivot {pivot:e} at row {row} (condition estimate {condition:e})")]
    NotPositiveDefinite { row: usize, pivot: f64, condition: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed matrix data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
