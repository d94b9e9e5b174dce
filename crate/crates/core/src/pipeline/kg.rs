use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::{FeatureSet, PipelineError, Result};
use crate::graph::{ConstructionMeta, GraphMode, KnowledgeGraph, NodeRole};
use crate::lexicon::{EmbeddingTable, Lexicon, SplitManifest};
use crate::numerics::DenseMatrix;
use crate::rng::SeedStreams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KgKind {
    /// Whole-phrase embeddings.
    Kg1,
    Kg2Verb,
    Kg2Noun,
    /// Mean visual features.
    Kg3,
}

impl KgKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KgKind::Kg1 => "kg1",
            KgKind::Kg2Verb => "kg2-verb",
            KgKind::Kg2Noun => "kg2-noun",
            KgKind::Kg3 => "kg3",
        }
    }
}

impl fmt::Display for KgKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KgKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "kg1" => Ok(KgKind::Kg1),
            "kg2-verb" | "verb" => Ok(KgKind::Kg2Verb),
            "kg2-noun" | "noun" => Ok(KgKind::Kg2Noun),
            "kg3" => Ok(KgKind::Kg3),
            other => Err(format!(
                "unknown graph `{other}` (expected kg1, kg2-verb, kg2-noun or kg3)"
            )),
        }
    }
}

/// How KG3 describes seen classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kg3TrainDescriptor {
    /// Mean over every training sample of the class.
    #[default]
    AllSamples,
    /// Mean over `k` seeded random training samples, like the unseen classes.
    KSamples,
}

/// Node labels and roles over dataset classes, optionally followed by the
/// auxiliary classes.
pub fn node_layout(manifest: &SplitManifest, include_auxiliary: bool) -> (Vec<String>, Vec<NodeRole>) {
    let mut labels = manifest.dataset_classes();
    let mut roles: Vec<NodeRole> = manifest
        .train_classes
        .iter()
        .map(|_| NodeRole::Train)
        .chain(manifest.test_classes.iter().map(|_| NodeRole::Test))
        .collect();
    if include_auxiliary {
        labels.extend(manifest.auxiliary_node_labels());
        roles.extend(manifest.auxiliary_classes.iter().map(|_| NodeRole::Auxiliary));
    }
    (labels, roles)
}

/// Class names to embed, aligned with [`node_layout`].
fn node_phrases(manifest: &SplitManifest, include_auxiliary: bool) -> Vec<String> {
    let mut classes = manifest.dataset_classes();
    if include_auxiliary {
        classes.extend(manifest.auxiliary_classes.iter().cloned());
    }
    classes.iter().map(|c| manifest.embedding_key(c).to_string()).collect()
}

fn embed_all(
    table: &EmbeddingTable,
    classes: impl Iterator<Item = (String, String)>,
) -> Result<(DenseMatrix, Vec<String>)> {
    let mut data = Vec::new();
    let mut warnings = Vec::new();
    let mut rows = 0;
    for (class, phrase) in classes {
        let e = table
            .embed_phrase(&phrase)
            .map_err(|source| PipelineError::Unresolvable {
                class: class.clone(),
                key: phrase.clone(),
                source,
            })?;
        if !e.missing_tokens.is_empty() {
            warnings.push(format!("`{phrase}`: skipped tokens {}", e.missing_tokens.join(", ")));
        }
        data.extend(e.vector);
        rows += 1;
    }
    Ok((DenseMatrix::from_vec(rows, table.dim(), data)?, warnings))
}

/// Phrase-embedding graph over train, test and (optionally) auxiliary
/// classes.
pub fn build_kg1(
    manifest: &SplitManifest,
    embeddings: &EmbeddingTable,
    meta: ConstructionMeta,
    include_auxiliary: bool,
) -> Result<KnowledgeGraph> {
    let (labels, roles) = node_layout(manifest, include_auxiliary);
    let phrases = node_phrases(manifest, include_auxiliary);
    let (features, _) = embed_all(embeddings, labels.iter().cloned().zip(phrases))?;
    Ok(KnowledgeGraph::build(labels, roles, features, meta)?)
}

/// Verb and noun graphs with the same nodes as [`build_kg1`]; node `i`
/// carries the embedding of its label's verb (resp. noun).
pub fn build_kg2(
    manifest: &SplitManifest,
    lexicon: &Lexicon,
    embeddings: &EmbeddingTable,
    meta: ConstructionMeta,
    include_auxiliary: bool,
) -> Result<(KnowledgeGraph, KnowledgeGraph)> {
    let (labels, roles) = node_layout(manifest, include_auxiliary);
    let pairs: Vec<_> = node_phrases(manifest, include_auxiliary)
        .iter()
        .map(|p| lexicon.parse_action_phrase(p))
        .collect();
    let (verbs, _) = embed_all(
        embeddings,
        labels.iter().cloned().zip(pairs.iter().map(|p| p.verb.clone())),
    )?;
    let (nouns, _) = embed_all(
        embeddings,
        labels.iter().cloned().zip(pairs.iter().map(|p| p.noun.clone())),
    )?;
    let verb_graph = KnowledgeGraph::build(labels.clone(), roles.clone(), verbs, meta)?;
    let noun_graph = KnowledgeGraph::build(labels, roles, nouns, meta)?;
    Ok((verb_graph, noun_graph))
}

/// Visual-prototype graph over dataset classes and the support samples it
/// drew for each unseen class.
#[derive(Debug, Clone)]
pub struct Kg3 {
    pub graph: KnowledgeGraph,
    /// Sample ids used as supports, per test class in manifest order.
    pub supports: Vec<Vec<String>>,
}

fn pick(indices: &[usize], k: usize, streams: &SeedStreams, class: &str) -> Vec<usize> {
    let mut picked: Vec<usize> = indices.choose_multiple(&mut streams.rng(class), k).copied().collect();
    picked.sort_unstable();
    picked
}

/// Seeded draw of `k` support samples per test class, as sample indices
/// into `support`, in manifest test-class order.
pub fn choose_supports(manifest: &SplitManifest, support: &FeatureSet, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(PipelineError::InvalidConfig("few-shot k must be at least 1".into()));
    }
    let streams = SeedStreams::new(seed).child("kg3").child("support");
    manifest
        .test_classes
        .iter()
        .map(|class| {
            let all = support.samples_of(class);
            if all.len() < k {
                return Err(PipelineError::NotEnoughSamples {
                    class: class.clone(),
                    needed: k,
                    found: all.len(),
                });
            }
            Ok(pick(&all, k, &streams, class))
        })
        .collect()
}

/// Unseen classes are described by the mean of `k` seeded random samples
/// from `support`; seen classes by the mean of their training features.
pub fn build_kg3(
    manifest: &SplitManifest,
    train_features: &FeatureSet,
    support: &FeatureSet,
    k: usize,
    seed: u64,
    top_n: usize,
    train_descriptor: Kg3TrainDescriptor,
) -> Result<Kg3> {
    if k == 0 {
        return Err(PipelineError::InvalidConfig("few-shot k must be at least 1".into()));
    }
    if train_features.dim() != support.dim() && !train_features.is_empty() {
        return Err(PipelineError::Shape {
            what: "train vs support feature width",
            expected: support.dim(),
            got: train_features.dim(),
        });
    }
    let streams = SeedStreams::new(seed).child("kg3");
    let (labels, roles) = node_layout(manifest, false);
    let mut data = Vec::with_capacity(labels.len() * support.dim());
    for class in &manifest.train_classes {
        let all = train_features.samples_of(class);
        if all.is_empty() {
            return Err(PipelineError::NotEnoughSamples {
                class: class.clone(),
                needed: 1,
                found: 0,
            });
        }
        let chosen = match train_descriptor {
            Kg3TrainDescriptor::AllSamples => all,
            Kg3TrainDescriptor::KSamples => pick(&all, k, &streams.child("train"), class),
        };
        data.extend(train_features.mean_of(&chosen));
    }
    let chosen = choose_supports(manifest, support, k, seed)?;
    for idx in &chosen {
        data.extend(support.mean_of(idx));
    }
    let supports = chosen
        .iter()
        .map(|idx| idx.iter().map(|&i| support.ids()[i].clone()).collect())
        .collect();
    let features = DenseMatrix::from_vec(labels.len(), support.dim(), data)?;
    let graph = KnowledgeGraph::build(
        labels,
        roles,
        features,
        ConstructionMeta {
            top_n,
            mode: GraphMode::FullyConnected,
        },
    )?;
    Ok(Kg3 { graph, supports })
}
