use super::{DenseMatrix, NumericsError, Result};

/// Lower-triangular Cholesky factor `L` with `a = L·Lᵀ`.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(NumericsError::DimensionMismatch {
            op: "cholesky",
            left: a.shape(),
            right: a.shape(),
        });
    }
    let mut l = DenseMatrix::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot: f64 = 0.0;
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) || !d.is_finite() {
            let condition = if min_pivot.is_finite() && d > 0.0 {
                max_pivot / d
            } else {
                f64::INFINITY
            };
            return Err(NumericsError::NotPositiveDefinite {
                row: j,
                pivot: d,
                condition,
            });
        }
        min_pivot = min_pivot.min(d);
        max_pivot = max_pivot.max(d);
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Solves `a·x = b` for symmetric positive-definite `a`, column by column.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch {
            op: "solve_spd",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let mut x = DenseMatrix::zeros(n, b.cols());
    let mut y = vec![0.0; n];
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = b.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = DenseMatrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[2.0], [1.0]]).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        let back = a.matmul(&x).unwrap();
        assert!(back.max_abs_diff(&b).unwrap() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&a),
            Err(NumericsError::NotPositiveDefinite { row: 1, .. })
        ));
    }
}
