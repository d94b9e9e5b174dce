use super::{DenseMatrix, NumericsError, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Moment estimates for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: DenseMatrix,
    second_moment: DenseMatrix,
    step_count: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            first_moment: DenseMatrix::zeros(rows, cols),
            second_moment: DenseMatrix::zeros(rows, cols),
            step_count: 0,
        }
    }

    pub fn for_params(params: &DenseMatrix) -> Self {
        Self::new(params.rows(), params.cols())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &DenseMatrix {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &DenseMatrix {
        &self.second_moment
    }

    /// One bias-corrected Adam update of `params` in place.
    ///
    /// Gradients are checked before anything is touched, so a rejected call
    /// leaves both the parameters and the state unchanged.
    pub fn step(&mut self, params: &mut DenseMatrix, grads: &DenseMatrix, lr: f64) -> Result<()> {
        params.require_same_shape("adam_step", grads)?;
        params.require_same_shape("adam_step", &self.first_moment)?;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NumericsError::InvalidArgument(format!(
                "learning rate {lr} must be positive"
            )));
        }
        grads.ensure_finite("adam gradient")?;

        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - ADAM_BETA1.powi(t);
        let bias2 = 1.0 - ADAM_BETA2.powi(t);
        let m = self.first_moment.as_mut_slice();
        let v = self.second_moment.as_mut_slice();
        for (((p, &g), m), v) in params.as_mut_slice().iter_mut().zip(grads.as_slice()).zip(m).zip(v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_fresh_params() {
        let mut p = DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]).unwrap();
        let before = p.clone();
        let mut s = AdamState::for_params(&p);
        s.step(&mut p, &DenseMatrix::zeros(2, 2), 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = g, v̂ = g², so the first step is lr·g/(|g| + ε).
        let mut p = DenseMatrix::from_rows(&[[1.0]]).unwrap();
        let mut s = AdamState::for_params(&p);
        s.step(&mut p, &DenseMatrix::from_rows(&[[2.0]]).unwrap(), 0.001)
            .unwrap();
        let expected = 1.0 - 0.001 * 2.0 / (2.0 + 1e-8);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!((p.get(0, 0) - 0.999).abs() < 1e-6);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut p = DenseMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let g = DenseMatrix::from_rows(&[[1.5, -0.5]]).unwrap();
        let mut s = AdamState::for_params(&p);
        let mut prev = p.clone();
        for _ in 0..2 {
            s.step(&mut p, &g, 0.01).unwrap();
            assert!(p.get(0, 0) < prev.get(0, 0));
            assert!(p.get(0, 1) > prev.get(0, 1));
            prev = p.clone();
        }
    }

    #[test]
    fn non_finite_gradient_names_index_and_leaves_state() {
        let mut p = DenseMatrix::zeros(2, 2);
        let mut g = DenseMatrix::zeros(2, 2);
        g.set(1, 0, f64::NAN);
        let mut s = AdamState::for_params(&p);
        let err = s.step(&mut p, &g, 0.1).unwrap_err();
        assert!(matches!(err, NumericsError::NonFinite { row: 1, col: 0, .. }), "{err}");
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = DenseMatrix::zeros(2, 2);
        let mut s = AdamState::for_params(&p);
        assert!(s.step(&mut p, &DenseMatrix::zeros(2, 3), 0.1).is_err());
    }
}
