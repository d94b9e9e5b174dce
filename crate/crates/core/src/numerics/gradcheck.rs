use super::{DenseMatrix, NumericsError, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference gradient of `loss` at `params`:
/// `(loss(p + h·eᵢ) − loss(p − h·eᵢ)) / 2h` for every entry.
pub fn finite_difference_grad<F>(mut loss: F, params: &DenseMatrix, h: f64) -> Result<DenseMatrix>
where
    F: FnMut(&DenseMatrix) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(NumericsError::InvalidArgument(format!(
            "step size {h} must be positive"
        )));
    }
    let mut probe = params.clone();
    let mut grad = DenseMatrix::zeros(params.rows(), params.cols());
    for r in 0..params.rows() {
        for c in 0..params.cols() {
            let orig = params.get(r, c);
            probe.set(r, c, orig + h);
            let up = loss(&probe);
            probe.set(r, c, orig - h);
            let down = loss(&probe);
            probe.set(r, c, orig);
            for v in [up, down] {
                if !v.is_finite() {
                    return Err(NumericsError::NonFinite {
                        context: "loss under finite difference",
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
            grad.set(r, c, (up - down) / (2.0 * h));
        }
    }
    Ok(grad)
}

/// Largest entrywise `|a − b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &DenseMatrix, b: &DenseMatrix, floor: f64) -> Result<f64> {
    a.require_same_shape("max_relative_error", b)?;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max))
}
