//! Deterministic dense and sparse linear algebra, the Adam optimizer and a
//! central-difference gradient oracle.
//!
//! Every kernel here accumulates in a fixed order (row-major, left to right
//! over the inner dimension), so identical inputs always produce
//! bit-identical outputs, whether or not a kernel fans rows out over threads.

mod activation;
mod adam;
mod dense;
mod error;
mod gradcheck;
mod linalg;
mod sparse;

pub use activation::{relu, relu_backward};
pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use dense::DenseMatrix;
pub use error::NumericsError;
pub use gradcheck::{finite_difference_grad, max_relative_error, DEFAULT_FD_STEP};
pub use linalg::{cholesky, solve_spd};
pub use sparse::SparseMatrix;

pub type Result<T> = std::result::Result<T, NumericsError>;
