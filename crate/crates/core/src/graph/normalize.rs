use sha2::{Digest, Sha256};

use super::{hash_sparse, GraphError, Result};
use crate::numerics::SparseMatrix;

/// `D̂^{-1/2}(I + A)D̂^{-1/2}` together with a digest of what it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub(crate) matrix: SparseMatrix,
    pub(crate) source_fingerprint: String,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn source_fingerprint(&self) -> &str {
        &self.source_fingerprint
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Adds self-loops and applies symmetric degree normalisation, with `D̂`
/// the weighted degree (row sums of `I + A`).
///
/// Rejects asymmetric input, diagonal entries, and any node whose weighted
/// degree is not positive (possible when cosine weights are negative).
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<NormalizedAdjacency> {
    let n = a.dim();
    for (i, j, v) in a.triplets() {
        if i == j {
            return Err(GraphError::DiagonalEntry(i));
        }
        if a.get(j, i).map(f64::to_bits) != Some(v.to_bits()) {
            return Err(GraphError::Asymmetric { row: i, col: j });
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| a.row(i).fold(1.0, |s, (_, v)| s + v)).collect();
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(GraphError::NonPositiveDegree {
            node: i,
            degree: degrees[i],
        });
    }

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(a.nnz() + n);
    let mut values = Vec::with_capacity(a.nnz() + n);
    row_offsets.push(0);
    for i in 0..n {
        let mut self_loop_done = false;
        for (j, v) in a.row(i) {
            if !self_loop_done && j > i {
                cols.push(i);
                values.push(1.0 / degrees[i]);
                self_loop_done = true;
            }
            cols.push(j);
            // d_i·d_j commutes exactly, so (i, j) and (j, i) stay bit-equal.
            values.push(v / (degrees[i] * degrees[j]).sqrt());
        }
        if !self_loop_done {
            cols.push(i);
            values.push(1.0 / degrees[i]);
        }
        row_offsets.push(cols.len());
    }
    let matrix = SparseMatrix::from_raw(n, row_offsets, cols, values)?;

    let mut h = Sha256::new();
    hash_sparse(&mut h, a);
    Ok(NormalizedAdjacency {
        matrix,
        source_fingerprint: hex::encode(h.finalize()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edgeless_graph_normalises_to_identity() {
        let n = normalize_adjacency(&SparseMatrix::zeros(4)).unwrap();
        assert_eq!(n.matrix().densify(), crate::numerics::DenseMatrix::identity(4));
    }

    #[test]
    fn single_unit_edge_gives_halves() {
        let a = SparseMatrix::from_triplets(2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let n = normalize_adjacency(&a).unwrap();
        let d = n.matrix().densify();
        assert_eq!(d.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn rejects_asymmetric_and_diagonal() {
        let a = SparseMatrix::from_triplets(2, [(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            normalize_adjacency(&a),
            Err(GraphError::Asymmetric { row: 0, col: 1 })
        ));
        let d = SparseMatrix::from_triplets(2, [(1, 1, 1.0)]).unwrap();
        assert!(matches!(normalize_adjacency(&d), Err(GraphError::DiagonalEntry(1))));
    }

    #[test]
    fn rejects_non_positive_degree() {
        let a = SparseMatrix::from_triplets(2, [(0, 1, -1.0), (1, 0, -1.0)]).unwrap();
        assert!(matches!(
            normalize_adjacency(&a),
            Err(GraphError::NonPositiveDegree { node: 0, .. })
        ));
    }

    #[test]
    fn fingerprint_tracks_source() {
        let a = SparseMatrix::from_triplets(2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, [(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        assert_ne!(
            normalize_adjacency(&a).unwrap().source_fingerprint(),
            normalize_adjacency(&b).unwrap().source_fingerprint()
        );
    }
}
