use std::cmp::Ordering;

use super::metrics::{argmax_rows, mean_average_precision, mean_class_accuracy, EvaluationReport};
use super::{BankSource, ClassifierBank, FeatureSet, PipelineError, Result};
use crate::graph::{cosine_similarity, KnowledgeGraph, NodeRole};
use crate::numerics::{solve_spd, DenseMatrix};

/// Neighbours used by the linear-combination baseline.
pub const LINEAR_COMBINATION_K: usize = 4;

/// Predicts each unseen class as the similarity-weighted average of the
/// classifier rows of its `k` most similar seen classes.
///
/// Similarity is the cosine between node descriptors, the same quantity
/// that weights graph edges, taken over every seen class rather than only
/// stored edges. Seen classes with non-positive similarity are ignored so
/// the result stays a convex combination. Rows follow the graph's test
/// node order.
pub fn linear_combination_baseline(graph: &KnowledgeGraph, bank: &ClassifierBank, k: usize) -> Result<DenseMatrix> {
    if k == 0 {
        return Err(PipelineError::InvalidConfig("linear combination needs k >= 1".into()));
    }
    let train = graph.nodes_with_role(NodeRole::Train);
    let test = graph.nodes_with_role(NodeRole::Test);
    let f = graph.features();
    let mut out = DenseMatrix::zeros(test.len(), bank.dim());
    for (row, &t) in test.iter().enumerate() {
        let mut cands = Vec::with_capacity(train.len());
        for &j in &train {
            let s = cosine_similarity(f.row(t), f.row(j))?;
            if s > 0.0 {
                cands.push((j, s));
            }
        }
        cands.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        });
        cands.truncate(k);
        if cands.is_empty() {
            return Err(PipelineError::IsolatedTestNode(graph.labels()[t].clone()));
        }
        let total: f64 = cands.iter().map(|c| c.1).sum();
        let acc = out.row_mut(row);
        for (j, s) in cands {
            let label = &graph.labels()[j];
            let w = bank
                .get(label)
                .ok_or_else(|| PipelineError::MissingBankRow(label.clone()))?;
            for (a, v) in acc.iter_mut().zip(w) {
                *a += s * v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= total);
    }
    Ok(out)
}

/// Per-class mean of the support samples, for `classes` in order.
pub fn class_centers(support: &FeatureSet, classes: &[String]) -> Result<DenseMatrix> {
    let mut data = Vec::with_capacity(classes.len() * support.dim());
    for c in classes {
        let idx = support.samples_of(c);
        if idx.is_empty() {
            return Err(PipelineError::NotEnoughSamples {
                class: c.clone(),
                needed: 1,
                found: 0,
            });
        }
        data.extend(support.mean_of(&idx));
    }
    Ok(DenseMatrix::from_vec(classes.len(), support.dim(), data)?)
}

/// Cosine similarity of each query to each class center.
pub fn cosine_scores(queries: &DenseMatrix, centers: &DenseMatrix, center_names: &[String]) -> Result<DenseMatrix> {
    let norms: Vec<f64> = centers
        .row_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(c) = norms.iter().position(|&n| n <= 1e-12) {
        return Err(PipelineError::ZeroCenter(center_names[c].clone()));
    }
    let mut s = DenseMatrix::zeros(queries.rows(), centers.rows());
    for i in 0..queries.rows() {
        let q = queries.row(i);
        let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (c, center) in centers.row_iter().enumerate() {
            let dot: f64 = q.iter().zip(center).map(|(a, b)| a * b).sum();
            s.set(i, c, if qn > 0.0 { dot / (qn * norms[c]) } else { 0.0 });
        }
    }
    Ok(s)
}

/// Label indices of each sample relative to `classes`.
pub(crate) fn label_indices(set: &FeatureSet, classes: &[String]) -> Result<Vec<Vec<usize>>> {
    set.labels()
        .iter()
        .zip(set.ids())
        .map(|(labels, id)| {
            labels
                .iter()
                .map(|l| {
                    classes
                        .iter()
                        .position(|c| c == l)
                        .ok_or_else(|| PipelineError::UnknownLabel {
                            sample: id.clone(),
                            label: l.clone(),
                        })
                })
                .collect()
        })
        .collect()
}

/// Scores a set against `classes` with the metric its labels call for.
pub fn evaluate_scores(
    scores: &DenseMatrix,
    set: &FeatureSet,
    classes: &[String],
    multilabel: bool,
) -> Result<EvaluationReport> {
    let labels = label_indices(set, classes)?;
    if multilabel {
        mean_average_precision(scores, &labels, classes)
    } else {
        let single: Vec<usize> = labels
            .iter()
            .zip(set.ids())
            .map(|(l, id)| match l.as_slice() {
                [one] => Ok(*one),
                _ => Err(PipelineError::InvalidConfig(format!(
                    "sample `{id}` has {} labels; single-label accuracy needs exactly one",
                    l.len()
                ))),
            })
            .collect::<Result<_>>()?;
        mean_class_accuracy(&argmax_rows(scores), &single, classes)
    }
}

/// Nearest class mean by cosine similarity.
pub fn nearest_neighbor_baseline(
    support: &FeatureSet,
    queries: &FeatureSet,
    classes: &[String],
) -> Result<EvaluationReport> {
    let support_ids: std::collections::HashSet<&str> = support.ids().iter().map(String::as_str).collect();
    if let Some(q) = queries.ids().iter().find(|q| support_ids.contains(q.as_str())) {
        return Err(PipelineError::InvalidConfig(format!(
            "query `{q}` is also a support sample"
        )));
    }
    let centers = class_centers(support, classes)?;
    let scores = cosine_scores(queries.features(), &centers, classes)?;
    evaluate_scores(&scores, queries, classes, queries.is_multilabel())
}

/// Ridge closed form `W = (FᵀF + γI)⁻¹ FᵀY` with one-hot (or multi-hot)
/// `Y` over `classes`; bank row `c` is column `c` of `W`.
pub fn eszsl_targets(train_features: &FeatureSet, classes: &[String], gamma: f64) -> Result<ClassifierBank> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(PipelineError::InvalidConfig(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let f = train_features.features();
    let d = f.cols();
    let labels = label_indices(train_features, classes)?;
    let mut y = DenseMatrix::zeros(f.rows(), classes.len());
    for (i, l) in labels.iter().enumerate() {
        for &c in l {
            y.set(i, c, 1.0);
        }
    }
    let ft = f.transpose();
    let mut gram = ft.matmul(f)?;
    for i in 0..d {
        gram.set(i, i, gram.get(i, i) + gamma);
    }
    let w = solve_spd(&gram, &ft.matmul(&y)?)?;
    ClassifierBank::new(classes.to_vec(), w.transpose(), BankSource::ClosedForm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ConstructionMeta, GraphMode};

    fn fs(ids: &[&str], labels: &[&str], rows: &[[f64; 2]]) -> FeatureSet {
        FeatureSet::new(
            ids.iter().map(|s| s.to_string()).collect(),
            labels.iter().map(|l| vec![l.to_string()]).collect(),
            DenseMatrix::from_rows(rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn eszsl_hand_solved() {
        let f = FeatureSet::new(
            vec!["a".into(), "b".into()],
            vec![vec!["x".into()], vec!["y".into()]],
            DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap(),
        )
        .unwrap();
        let b = eszsl_targets(&f, &["x".into(), "y".into()], 1.0).unwrap();
        assert!((b.get("x").unwrap()[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((b.get("y").unwrap()[0] - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_center_by_cosine() {
        let support = fs(&["s1", "s2"], &["p", "q"], &[[1.0, 0.0], [0.0, 1.0]]);
        let queries = fs(&["q1", "q2"], &["p", "q"], &[[0.9, 0.1], [0.2, 3.0]]);
        let r = nearest_neighbor_baseline(&support, &queries, &["p".into(), "q".into()]).unwrap();
        assert_eq!(r.overall, 1.0);
        assert!(nearest_neighbor_baseline(&support, &support, &["p".into(), "q".into()]).is_err());
    }

    #[test]
    fn linear_combination_two_equal_neighbours() {
        let g = KnowledgeGraph::build(
            vec!["a".into(), "b".into(), "t".into()],
            vec![NodeRole::Train, NodeRole::Train, NodeRole::Test],
            DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap(),
            ConstructionMeta {
                top_n: 1,
                mode: GraphMode::FullyConnected,
            },
        )
        .unwrap();
        let bank = ClassifierBank::new(
            vec!["a".into(), "b".into()],
            DenseMatrix::from_rows(&[[2.0, 0.0, 4.0], [0.0, 2.0, 0.0]]).unwrap(),
            BankSource::IngestedFromModel,
        )
        .unwrap();
        let w = linear_combination_baseline(&g, &bank, 4).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0, 2.0]);
        let w1 = linear_combination_baseline(&g, &bank, 1).unwrap();
        assert_eq!(w1.as_slice(), &[2.0, 0.0, 4.0]);
    }
}
