//! Synthetic zero-shot instances with known ground truth.
//!
//! Class embeddings are drawn around a few cluster centres, and each class's
//! true classifier row is a fixed random linear map of its embedding plus a
//! little noise. Sample features are noisy copies of the true rows, so a
//! predicted row scores well exactly when it lands near the truth.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::lexicon::{EmbeddingKind, EmbeddingTable, SplitManifest};
use crate::numerics::DenseMatrix;
use crate::pipeline::{BankSource, ClassifierBank, FeatureSet, PipelineError, Result};
use crate::rng::{SeedStreams, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub clusters: usize,
    pub classes_per_cluster: usize,
    /// Held-out classes per cluster.
    pub test_per_cluster: usize,
    pub embedding_dim: usize,
    pub classifier_dim: usize,
    /// Spread of class embeddings around their cluster centre.
    pub cluster_spread: f64,
    /// Noise added to the true classifier rows.
    pub weight_noise: f64,
    /// Noise added to each sample feature, relative to the row norm.
    pub feature_noise: f64,
    pub samples_per_class: usize,
    /// Extra classes outside the dataset, usable as auxiliary nodes.
    pub auxiliary_classes: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            clusters: 6,
            classes_per_cluster: 5,
            test_per_cluster: 1,
            embedding_dim: 16,
            classifier_dim: 32,
            cluster_spread: 0.3,
            weight_noise: 0.01,
            feature_noise: 1.0,
            samples_per_class: 40,
            auxiliary_classes: 0,
            seed: 0,
        }
    }
}

/// A generated instance. `true_bank` holds every class, `bank` only the
/// seen ones.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub manifest: SplitManifest,
    pub embeddings: EmbeddingTable,
    pub bank: ClassifierBank,
    pub auxiliary_bank: Option<ClassifierBank>,
    pub true_bank: ClassifierBank,
    pub features: FeatureSet,
}

fn gaussian(rng: &mut StreamRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

const VERBS: [&str; 12] = [
    "playing", "riding", "throwing", "cutting", "climbing", "swimming", "lifting", "pushing", "kicking", "washing",
    "carrying", "brushing",
];
const NOUNS: [&str; 24] = [
    "guitar", "horse", "ball", "bottle", "rope", "piano", "box", "car", "bike", "dog", "hair", "tree", "drum", "wall",
    "door", "table", "rock", "knife", "cup", "chair", "ladder", "kite", "bag", "shoe",
];

/// Class `c` is `<verb of its cluster> <noun of its rank in the cluster>`,
/// so verb and noun graphs over synthetic classes are meaningful.
fn class_name(c: usize, clusters: usize) -> String {
    format!("{} {}", VERBS[c % clusters], NOUNS[c / clusters])
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticInstance> {
    let streams = SeedStreams::new(config.seed).child("synthetic");
    let (e, d) = (config.embedding_dim, config.classifier_dim);
    let n = config.clusters * config.classes_per_cluster;
    let per_cluster = (n + config.auxiliary_classes).div_ceil(config.clusters.max(1));
    if config.clusters == 0 || config.clusters > VERBS.len() || per_cluster > NOUNS.len() {
        return Err(PipelineError::InvalidConfig(format!(
            "synthetic instances support 1 to {} clusters of up to {} classes",
            VERBS.len(),
            NOUNS.len()
        )));
    }
    if config.test_per_cluster >= config.classes_per_cluster {
        return Err(PipelineError::InvalidConfig("every cluster needs a seen class".into()));
    }

    let mut rng = streams.rng("centres");
    let centres: Vec<Vec<f64>> = (0..config.clusters).map(|_| gaussian(&mut rng, e, 1.0)).collect();
    let map = DenseMatrix::from_vec(e, d, gaussian(&mut streams.rng("map"), e * d, 1.0 / (e as f64).sqrt()))?;

    let mut rng = streams.rng("classes");
    let mut embed_rows = Vec::with_capacity((n + config.auxiliary_classes) * e);
    for c in 0..n + config.auxiliary_classes {
        let centre = &centres[c % config.clusters];
        let jitter = gaussian(&mut rng, e, config.cluster_spread);
        embed_rows.extend(centre.iter().zip(jitter).map(|(a, b)| a + b));
    }
    let x = DenseMatrix::from_vec(n + config.auxiliary_classes, e, embed_rows)?;
    let noise = DenseMatrix::from_vec(
        x.rows(),
        d,
        gaussian(&mut streams.rng("weight-noise"), x.rows() * d, config.weight_noise),
    )?;
    let mut w_true = x.matmul(&map)?;
    w_true.add_scaled(&noise, 1.0)?;

    // Class c belongs to cluster c % clusters; hold out a seeded choice
    // within each cluster.
    let mut rng = streams.rng("split");
    let mut test = Vec::new();
    for k in 0..config.clusters {
        let members: Vec<usize> = (0..n).filter(|c| c % config.clusters == k).collect();
        test.extend(members.choose_multiple(&mut rng, config.test_per_cluster).copied());
    }
    test.sort_unstable();
    let train: Vec<usize> = (0..n).filter(|c| !test.contains(c)).collect();
    let aux: Vec<usize> = (n..n + config.auxiliary_classes).collect();

    let name = |c: usize| class_name(c, config.clusters);
    let names = |idx: &[usize]| idx.iter().map(|&c| name(c)).collect::<Vec<_>>();
    let manifest = SplitManifest {
        dataset_name: "synthetic".into(),
        auxiliary_name: (!aux.is_empty()).then(|| "extra".to_string()),
        multilabel: false,
        train_classes: names(&train),
        test_classes: names(&test),
        overlap: Vec::new(),
        aliases: Vec::new(),
        auxiliary_classes: names(&aux),
    };
    manifest.validate()?;

    // Phrases carry the class embeddings; the verbs, nouns and the
    // fallback verb get unrelated random vectors.
    let mut embeddings = EmbeddingTable::new(e, EmbeddingKind::PhraseLevel);
    for c in 0..x.rows() {
        embeddings
            .insert(&name(c), x.row(c).to_vec())
            .map_err(PipelineError::InvalidConfig)?;
    }
    let mut rng = streams.rng("tokens");
    let tokens = VERBS[..config.clusters]
        .iter()
        .chain(&NOUNS[..per_cluster])
        .chain(&["doing"]);
    for t in tokens {
        embeddings
            .insert(t, gaussian(&mut rng, e, 1.0))
            .map_err(PipelineError::InvalidConfig)?;
    }

    let all: Vec<usize> = (0..x.rows()).collect();
    let true_bank = ClassifierBank::new(names(&all), w_true.clone(), BankSource::ClosedForm)?;
    let bank = ClassifierBank::new(names(&train), w_true.select_rows(&train), BankSource::IngestedFromModel)?;
    let auxiliary_bank = if aux.is_empty() {
        None
    } else {
        Some(ClassifierBank::new(
            names(&aux),
            w_true.select_rows(&aux),
            BankSource::IngestedFromModel,
        )?)
    };

    let mut rng = streams.rng("features");
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for c in 0..n {
        let row = w_true.row(c);
        let scale = config.feature_noise * row.iter().map(|v| v * v).sum::<f64>().sqrt() / (d as f64).sqrt();
        for s in 0..config.samples_per_class {
            ids.push(format!("{}-{s:03}", name(c).replace(' ', "-")));
            labels.push(vec![name(c)]);
            data.extend(row.iter().zip(gaussian(&mut rng, d, scale)).map(|(a, b)| a + b));
        }
    }
    let features = FeatureSet::new(
        ids,
        labels,
        DenseMatrix::from_vec(n * config.samples_per_class, d, data)?,
    )?;

    Ok(SyntheticInstance {
        manifest,
        embeddings,
        bank,
        auxiliary_bank,
        true_bank,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_test_class_per_cluster() {
        let inst = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(inst.manifest.test_classes.len(), 6);
        assert_eq!(inst.manifest.train_classes.len(), 24);
        let verbs: std::collections::BTreeSet<&str> = inst
            .manifest
            .test_classes
            .iter()
            .map(|c| c.split(' ').next().unwrap())
            .collect();
        assert_eq!(verbs.len(), 6);
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate(&SyntheticConfig::default()).unwrap();
        let b = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(a.true_bank.rows(), b.true_bank.rows());
        assert_eq!(a.features.features(), b.features.features());
        assert_eq!(a.manifest, b.manifest);
    }
}
