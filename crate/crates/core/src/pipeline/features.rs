use std::collections::HashSet;
use std::io::{BufRead, Write};

use super::bank::read_table;
use super::{PipelineError, Result};
use crate::lexicon::SplitManifest;
use crate::numerics::DenseMatrix;

/// Per-sample visual features with one or more class labels each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    ids: Vec<String>,
    labels: Vec<Vec<String>>,
    features: DenseMatrix,
}

impl FeatureSet {
    pub fn new(ids: Vec<String>, labels: Vec<Vec<String>>, features: DenseMatrix) -> Result<Self> {
        if ids.len() != features.rows() || labels.len() != features.rows() {
            return Err(PipelineError::Shape {
                what: "feature set ids, labels and rows",
                expected: features.rows(),
                got: ids.len().max(labels.len()),
            });
        }
        features.ensure_finite("feature set")?;
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id) {
                return Err(PipelineError::DuplicateId(id.clone()));
            }
        }
        if let Some(i) = labels.iter().position(Vec::is_empty) {
            return Err(PipelineError::Format {
                what: "features",
                line: 0,
                message: format!("sample `{}` has no labels", ids[i]),
            });
        }
        Ok(Self { ids, labels, features })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn is_multilabel(&self) -> bool {
        self.labels.iter().any(|l| l.len() > 1)
    }

    /// `features <count> <dim>` then `id<TAB>l1,l2<TAB>v1 ... vd` per sample.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "features {} {}", self.len(), self.dim())?;
        for ((id, labels), row) in self.ids.iter().zip(&self.labels).zip(self.features.row_iter()) {
            write!(w, "{id}\t{}\t", labels.join(","))?;
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b" ")?;
                }
                write!(w, "{v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (ids, labels, features) = read_table(r, "features", true)?;
        Self::new(ids, labels, features)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(f))
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            features: self.features.select_rows(indices),
        }
    }

    /// Indices of samples carrying `class`.
    pub fn samples_of(&self, class: &str) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i].iter().any(|l| l == class))
            .collect()
    }

    /// Mean feature of the samples at `indices`.
    pub fn mean_of(&self, indices: &[usize]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for &i in indices {
            for (a, v) in acc.iter_mut().zip(self.features.row(i)) {
                *a += v;
            }
        }
        let n = indices.len().max(1) as f64;
        acc.into_iter().map(|a| a / n).collect()
    }

    /// Splits samples into seen-class training data and held-out
    /// evaluation data. A sample with any train label goes to training with
    /// its test labels dropped; the rest go to evaluation.
    pub fn split_for(&self, manifest: &SplitManifest) -> Result<(FeatureSet, FeatureSet)> {
        let train: HashSet<&str> = manifest.train_classes.iter().map(String::as_str).collect();
        let test: HashSet<&str> = manifest.test_classes.iter().map(String::as_str).collect();
        let mut tr = (Vec::new(), Vec::new());
        let mut te = (Vec::new(), Vec::new());
        for (i, labels) in self.labels.iter().enumerate() {
            if let Some(l) = labels
                .iter()
                .find(|l| !train.contains(l.as_str()) && !test.contains(l.as_str()))
            {
                return Err(PipelineError::UnknownLabel {
                    sample: self.ids[i].clone(),
                    label: l.clone(),
                });
            }
            let seen: Vec<String> = labels.iter().filter(|l| train.contains(l.as_str())).cloned().collect();
            if seen.is_empty() {
                te.0.push(i);
                te.1.push(labels.clone());
            } else {
                tr.0.push(i);
                tr.1.push(seen);
            }
        }
        let build = |(idx, labels): (Vec<usize>, Vec<Vec<String>>)| FeatureSet {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            labels,
            features: self.features.select_rows(&idx),
        };
        Ok((build(tr), build(te)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_multilabels() {
        let text = "features 2 2\nv1\tholding a book,reading book\t0.5 1\nv2\tyo yo\t-1 2e-3\n";
        let f = FeatureSet::read_text(text.as_bytes()).unwrap();
        assert!(f.is_multilabel());
        let mut out = Vec::new();
        f.write_text(&mut out).unwrap();
        assert_eq!(FeatureSet::read_text(&out[..]).unwrap(), f);
    }

    #[test]
    fn split_moves_mixed_samples_to_train() {
        let m = SplitManifest::parse("[train]\na\nb\n[test]\nc\n", "m").unwrap();
        let f = FeatureSet::new(
            vec!["s1".into(), "s2".into(), "s3".into()],
            vec![vec!["a".into(), "c".into()], vec!["c".into()], vec!["b".into()]],
            DenseMatrix::zeros(3, 1),
        )
        .unwrap();
        let (tr, te) = f.split_for(&m).unwrap();
        assert_eq!(tr.ids(), &["s1", "s3"]);
        assert_eq!(tr.labels()[0], vec!["a".to_string()]);
        assert_eq!(te.ids(), &["s2"]);
        let bad = FeatureSet::new(vec!["x".into()], vec![vec!["z".into()]], DenseMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(bad.split_for(&m), Err(PipelineError::UnknownLabel { .. })));
    }
}
