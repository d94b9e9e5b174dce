use rayon::prelude::*;

use super::{DenseMatrix, NumericsError, Result};

const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

/// Square compressed-sparse-row matrix.
///
/// Column indices are strictly increasing within each row and every stored
/// value is finite. Stored zeros are allowed and count as structural entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_offsets: vec![0; dim + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_offsets: (0..=dim).collect(),
            col_indices: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    /// Validates and wraps raw CSR arrays.
    pub fn from_raw(dim: usize, row_offsets: Vec<usize>, col_indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(NumericsError::InvalidSparse(msg));
        if row_offsets.len() != dim + 1 {
            return bad(format!("{} row offsets for dimension {dim}", row_offsets.len()));
        }
        if row_offsets[0] != 0 || row_offsets[dim] != values.len() || col_indices.len() != values.len() {
            return bad("row offsets do not span the stored values".into());
        }
        for i in 0..dim {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if start > end {
                return bad(format!("row offsets decrease at row {i}"));
            }
            let cols = &col_indices[start..end];
            if cols.iter().any(|&c| c >= dim) {
                return bad(format!("column index out of range in row {i}"));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("columns not strictly increasing in row {i}"));
            }
            if let Some(p) = values[start..end].iter().position(|v| !v.is_finite()) {
                return Err(NumericsError::NonFinite {
                    context: "sparse value",
                    row: i,
                    col: cols[p],
                    value: values[start + p],
                });
            }
        }
        Ok(Self {
            dim,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets in any order. Duplicate
    /// coordinates are rejected.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= dim || c >= dim {
                return Err(NumericsError::InvalidSparse(format!(
                    "entry ({r}, {c}) outside a {dim}x{dim} matrix"
                )));
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(NumericsError::InvalidSparse(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_offsets = vec![0usize; dim + 1];
        for &(r, _, _) in &entries {
            row_offsets[r + 1] += 1;
        }
        for i in 0..dim {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Self::from_raw(dim, row_offsets, col_indices, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored `(col, value)` pairs of row `i`, in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// All stored entries as `(row, col, value)`, row-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|p| self.values[range.start + p])
    }

    pub fn densify(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            out.set(i, j, v);
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (j, i, v)))
            .expect("transpose of a valid matrix is valid")
    }

    /// Exact structural and numeric symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.triplets()
            .all(|(i, j, v)| self.get(j, i).is_some_and(|w| w.to_bits() == v.to_bits()))
    }

    pub fn has_diagonal_entries(&self) -> bool {
        (0..self.dim).any(|i| self.get(i, i).is_some())
    }

    /// Sparse-times-dense product. Row `i` of the result sums the stored
    /// entries of row `i` in column order.
    pub fn spmm(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if self.dim != d.rows() {
            return Err(NumericsError::DimensionMismatch {
                op: "spmm",
                left: (self.dim, self.dim),
                right: d.shape(),
            });
        }
        let m = d.cols();
        let mut out = vec![0.0; self.dim * m];
        if m == 0 {
            return DenseMatrix::from_vec(self.dim, 0, out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for (j, a) in self.row(i) {
                for (o, &b) in out_row.iter_mut().zip(d.row(j)) {
                    *o += a * b;
                }
            }
        };
        if self.nnz() * m >= PARALLEL_WORK_THRESHOLD {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        DenseMatrix::from_vec(self.dim, m, out)
    }

    /// Permutes rows and columns: entry `(i, j)` moves to `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Result<SparseMatrix> {
        if perm.len() != self.dim {
            return Err(NumericsError::InvalidArgument("permutation length".into()));
        }
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (perm[i], perm[j], v)))
    }
}
