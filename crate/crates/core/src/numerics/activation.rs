use super::{DenseMatrix, Result};

/// Elementwise `max(0, x)`.
pub fn relu(x: &DenseMatrix) -> DenseMatrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes `upstream` through where `x > 0`. The subgradient at exactly zero
/// is zero.
pub fn relu_backward(x: &DenseMatrix, upstream: &DenseMatrix) -> Result<DenseMatrix> {
    x.require_same_shape("relu_backward", upstream)?;
    let data = x
        .as_slice()
        .iter()
        .zip(upstream.as_slice())
        .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
        .collect();
    DenseMatrix::from_vec(x.rows(), x.cols(), data)
}
