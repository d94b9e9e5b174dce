use std::fmt::Write as _;
use std::str::FromStr;

use super::{PipelineError, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    MeanClassAccuracy,
    MeanAveragePrecision,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::MeanClassAccuracy => "accuracy",
            MetricKind::MeanAveragePrecision => "map",
        }
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "accuracy" | "acc" => Ok(MetricKind::MeanClassAccuracy),
            "map" | "mAP" => Ok(MetricKind::MeanAveragePrecision),
            other => Err(format!("unknown metric `{other}` (expected accuracy or map)")),
        }
    }
}

/// A class-averaged score with its per-class breakdown. Scores are
/// fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub metric: MetricKind,
    pub overall: f64,
    pub per_class: Vec<(String, f64)>,
    /// Notes such as classes excluded for lack of positives.
    pub warnings: Vec<String>,
    pub config_fingerprint: String,
}

impl EvaluationReport {
    fn from_scores(metric: MetricKind, per_class: Vec<(String, f64)>, warnings: Vec<String>) -> Self {
        let overall = per_class.iter().map(|(_, s)| s).sum::<f64>() / per_class.len() as f64;
        Self {
            metric,
            overall,
            per_class,
            warnings,
            config_fingerprint: String::new(),
        }
    }

    /// `class,score` rows and a closing `OVERALL` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,score\n");
        for (c, v) in &self.per_class {
            let _ = writeln!(s, "{},{v:?}", csv_field(c));
        }
        let _ = writeln!(s, "OVERALL,{:?}", self.overall);
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.per_class.iter().map(|(c, _)| c.len()).max().unwrap_or(0).max(7);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {}", "class", self.metric.as_str());
        for (c, v) in &self.per_class {
            let _ = writeln!(s, "{c:<width$}  {:>7.2}", 100.0 * v);
        }
        let _ = writeln!(s, "{:<width$}  {:>7.2}", "OVERALL", 100.0 * self.overall);
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `scores = features · weightsᵀ`, one column per class row of `weights`.
pub fn predict(features: &DenseMatrix, weights: &DenseMatrix) -> Result<DenseMatrix> {
    if features.cols() != weights.cols() {
        return Err(PipelineError::Shape {
            what: "feature width vs classifier width",
            expected: weights.cols(),
            got: features.cols(),
        });
    }
    Ok(features.matmul(&weights.transpose())?)
}

/// Column of the largest score per row; ties go to the lower column.
pub fn argmax_rows(scores: &DenseMatrix) -> Vec<usize> {
    scores
        .row_iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Per-class accuracy averaged uniformly over `classes`.
pub fn mean_class_accuracy(predictions: &[usize], labels: &[usize], classes: &[String]) -> Result<EvaluationReport> {
    if predictions.len() != labels.len() {
        return Err(PipelineError::Shape {
            what: "predictions vs labels",
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    let mut correct = vec![0usize; classes.len()];
    let mut total = vec![0usize; classes.len()];
    for (&p, &l) in predictions.iter().zip(labels) {
        if l >= classes.len() {
            return Err(PipelineError::Shape {
                what: "label index vs class count",
                expected: classes.len(),
                got: l,
            });
        }
        total[l] += 1;
        correct[l] += usize::from(p == l);
    }
    if let Some(c) = total.iter().position(|&t| t == 0) {
        return Err(PipelineError::EmptyClass(classes[c].clone()));
    }
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(c, name)| (name.clone(), correct[c] as f64 / total[c] as f64))
        .collect();
    Ok(EvaluationReport::from_scores(
        MetricKind::MeanClassAccuracy,
        per_class,
        Vec::new(),
    ))
}

/// Average precision of one ranking: samples sorted by descending score,
/// equal scores kept in sample order.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Mean over classes of average precision. Classes without positives are
/// skipped and noted in the report warnings.
pub fn mean_average_precision(
    scores: &DenseMatrix,
    labels: &[Vec<usize>],
    classes: &[String],
) -> Result<EvaluationReport> {
    if scores.rows() != labels.len() || scores.cols() != classes.len() {
        return Err(PipelineError::Shape {
            what: "score matrix vs labels and classes",
            expected: labels.len(),
            got: scores.rows(),
        });
    }
    let mut per_class = Vec::new();
    let mut warnings = Vec::new();
    for (c, name) in classes.iter().enumerate() {
        let col: Vec<f64> = (0..scores.rows()).map(|i| scores.get(i, c)).collect();
        let pos: Vec<bool> = labels.iter().map(|l| l.contains(&c)).collect();
        match average_precision(&col, &pos) {
            Some(ap) => per_class.push((name.clone(), ap)),
            None => warnings.push(format!("class `{name}` has no positive samples and was excluded")),
        }
    }
    if per_class.is_empty() {
        return Err(PipelineError::EmptyClass("every class".into()));
    }
    Ok(EvaluationReport::from_scores(
        MetricKind::MeanAveragePrecision,
        per_class,
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn predict_hand_case() {
        let f = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let w = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]).unwrap();
        let s = predict(&f, &w).unwrap();
        assert_eq!(s.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(argmax_rows(&s), vec![0, 0]);
    }

    #[test]
    fn class_mean_not_sample_mean() {
        let r = mean_class_accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1], &names(2)).unwrap();
        assert_eq!(r.overall, 0.5);
        let r = mean_class_accuracy(&[0, 0, 0], &[0, 0, 1], &names(2)).unwrap();
        assert_eq!(r.overall, 0.5);
        assert!(matches!(
            mean_class_accuracy(&[0], &[0], &names(2)),
            Err(PipelineError::EmptyClass(_))
        ));
    }

    #[test]
    fn ap_hand_case() {
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        // Ties keep sample order, so the positive listed later ranks second.
        assert_eq!(average_precision(&[1.0, 1.0], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn map_skips_classes_without_positives() {
        let s = DenseMatrix::from_rows(&[[0.9, 0.1], [0.2, 0.3]]).unwrap();
        let r = mean_average_precision(&s, &[vec![0], vec![0]], &names(2)).unwrap();
        assert_eq!(r.overall, 1.0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn csv_has_overall_row() {
        let r = mean_class_accuracy(&[0, 1], &[0, 1], &names(2)).unwrap();
        assert_eq!(r.to_csv(), "class,score\nc0,1.0\nc1,1.0\nOVERALL,1.0\n");
    }
}
