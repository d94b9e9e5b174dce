use std::io::{BufRead, Read, Write};

use rayon::prelude::*;

use super::{NumericsError, Result};

/// Output elements above which `matmul` spreads rows over the thread pool.
/// Each output element is still summed in the same order, so the result
/// does not depend on the split.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

const BINARY_MAGIC: &[u8; 4] = b"KGDM";
const BINARY_VERSION: u8 = 1;

/// Row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NumericsError::InvalidArgument(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NumericsError::InvalidArgument(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-column matrix still has rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Standard product `self × other`. Each output element is summed over
    /// the inner index in ascending order.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, inner, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        if m == 0 {
            return Self::from_vec(n, m, out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a_row = &self.data[i * inner..(i + 1) * inner];
            for (k, &a) in a_row.iter().enumerate() {
                let b_row = &other.data[k * m..(k + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if n * m * inner.max(1) >= PARALLEL_WORK_THRESHOLD {
            out.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(kernel);
        }
        Self::from_vec(n, m, out)
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, other: &DenseMatrix, alpha: f64) -> Result<()> {
        self.require_same_shape("add_scaled", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        self.map(|v| alpha * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.require_same_shape("sub", other)?;
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Concatenates matrices along the column axis.
    pub fn hstack(parts: &[&DenseMatrix]) -> Result<DenseMatrix> {
        let Some(first) = parts.first() else {
            return Err(NumericsError::InvalidArgument("hstack of zero matrices".into()));
        };
        let rows = first.rows;
        for p in parts {
            if p.rows != rows {
                return Err(NumericsError::DimensionMismatch {
                    op: "hstack",
                    left: first.shape(),
                    right: p.shape(),
                });
            }
        }
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Copies columns `start..end` into a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> DenseMatrix {
        assert!(start <= end && end <= self.cols, "column block out of range");
        let width = end - start;
        let mut data = Vec::with_capacity(self.rows * width);
        for r in self.row_iter() {
            data.extend_from_slice(&r[start..end]);
        }
        DenseMatrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        self.require_same_shape("max_abs_diff", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Returns the first non-finite entry as an error.
    pub fn ensure_finite(&self, context: &'static str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(p) => Err(NumericsError::NonFinite {
                context,
                row: p / self.cols.max(1),
                col: p % self.cols.max(1),
                value: self.data[p],
            }),
        }
    }

    pub(crate) fn require_same_shape(&self, op: &'static str, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(NumericsError::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// Text form: a `dense <rows> <cols>` header, then one line of
    /// space-separated values per row. Values use the shortest decimal that
    /// parses back to the same double.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dense {} {}", self.rows, self.cols)?;
        for r in self.row_iter() {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(n, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((n + 1, other)),
        });
        let (_, header) = lines
            .next()
            .ok_or_else(|| NumericsError::Format("empty input".into()))?;
        let header = header?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("dense") {
            return Err(NumericsError::Format(format!("bad header `{header}`")));
        }
        let mut dim = || -> Result<usize> {
            parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| NumericsError::Format(format!("bad header `{header}`")))
        };
        let (rows, cols) = (dim()?, dim()?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| NumericsError::Format(format!("expected {rows} rows")))?;
            let line = line?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| NumericsError::Format(format!("line {line_no}: bad number `{tok}`")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(NumericsError::Format(format!(
                    "line {line_no}: expected {cols} values, found {}",
                    data.len() - before
                )));
            }
        }
        if lines.next().is_some() {
            return Err(NumericsError::Format(format!("more than {rows} rows")));
        }
        let m = Self::from_vec(rows, cols, data)?;
        m.ensure_finite("read_text")?;
        Ok(m)
    }

    /// Binary form: `KGDM`, version byte, rows and cols as little-endian
    /// u64, then the values as little-endian doubles in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&[BINARY_VERSION])?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(NumericsError::Format("missing KGDM magic".into()));
        }
        let mut version = [0u8; 1];
        r.read_exact(&mut version)?;
        if version[0] != BINARY_VERSION {
            return Err(NumericsError::Format(format!(
                "unsupported KGDM version {}",
                version[0]
            )));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| NumericsError::Format("dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(len.min(1 << 24));
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        let m = Self::from_vec(rows, cols, data)?;
        m.ensure_finite("read_binary")?;
        Ok(m)
    }

    pub fn to_binary_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21 + 8 * self.data.len());
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
