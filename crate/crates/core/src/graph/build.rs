use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{GraphError, Result};
use crate::numerics::{DenseMatrix, SparseMatrix};

const MIN_NORM: f64 = 1e-12;

/// `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(GraphError::LengthMismatch {
            what: "vector length",
            expected: u.len(),
            got: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu <= MIN_NORM {
        return Err(GraphError::ZeroNorm { node: "left".into() });
    }
    if nv <= MIN_NORM {
        return Err(GraphError::ZeroNorm { node: "right".into() });
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// All-pairs cosine similarities. Entry `(i, j)` and `(j, i)` are computed
/// once, so the matrix is exactly symmetric.
fn similarity_matrix(features: &DenseMatrix) -> Result<Vec<f64>> {
    let n = features.rows();
    let norms: Vec<f64> = features.row_iter().map(norm).collect();
    if let Some(i) = norms.iter().position(|&x| x <= MIN_NORM) {
        return Err(GraphError::ZeroNorm {
            node: format!("row {i}"),
        });
    }
    let mut sims = vec![0.0; n * n];
    for i in 0..n {
        sims[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = (dot(features.row(i), features.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            sims[i * n + j] = s;
            sims[j * n + i] = s;
        }
    }
    Ok(sims)
}

/// Higher similarity first; equal similarities go to the lower index.
fn rank(sims_row: &[f64], candidates: &mut [usize]) {
    candidates.sort_by(|&a, &b| match sims_row[b].total_cmp(&sims_row[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
}

/// Symmetric union of per-node selections.
fn union_edges(n: usize, sims: &[f64], selections: &[Vec<usize>]) -> Result<SparseMatrix> {
    let mut edges = BTreeMap::new();
    for (i, chosen) in selections.iter().enumerate() {
        for &j in chosen {
            let w = sims[i * n + j];
            edges.insert((i, j), w);
            edges.insert((j, i), w);
        }
    }
    Ok(SparseMatrix::from_triplets(
        n,
        edges.into_iter().map(|((i, j), w)| (i, j, w)),
    )?)
}

/// Joins every node to its `top_n` most similar other nodes, then
/// symmetrises by union. Every node ends with degree at least `top_n`.
pub fn build_fc_adjacency(features: &DenseMatrix, top_n: usize) -> Result<SparseMatrix> {
    let n = features.rows();
    if top_n == 0 {
        return Err(GraphError::ZeroTopN);
    }
    if n < 2 {
        return Err(GraphError::TooFewNodes { needed: 2, got: n });
    }
    if top_n >= n {
        return Err(GraphError::TopNTooLarge {
            top_n,
            available: n - 1,
        });
    }
    let sims = similarity_matrix(features)?;
    let selections: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut cands: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            rank(&sims[i * n..(i + 1) * n], &mut cands);
            cands.truncate(top_n);
            cands
        })
        .collect();
    union_edges(n, &sims, &selections)
}

/// Joins every node to its `top_n` most similar nodes on the other side of
/// `partition`, then symmetrises. No edge stays within one side.
pub fn build_bipartite_adjacency(features: &DenseMatrix, partition: &[bool], top_n: usize) -> Result<SparseMatrix> {
    let n = features.rows();
    if partition.len() != n {
        return Err(GraphError::LengthMismatch {
            what: "partition flags",
            expected: n,
            got: partition.len(),
        });
    }
    if top_n == 0 {
        return Err(GraphError::ZeroTopN);
    }
    let side_b = partition.iter().filter(|&&p| p).count();
    let side_a = n - side_b;
    if side_a == 0 || side_b == 0 {
        return Err(GraphError::EmptyPartition);
    }
    if top_n > side_a.min(side_b) {
        return Err(GraphError::TopNTooLarge {
            top_n,
            available: side_a.min(side_b),
        });
    }
    let sims = similarity_matrix(features)?;
    let selections: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut cands: Vec<usize> = (0..n).filter(|&j| partition[j] != partition[i]).collect();
            rank(&sims[i * n..(i + 1) * n], &mut cands);
            cands.truncate(top_n);
            cands
        })
        .collect();
    union_edges(n, &sims, &selections)
}
