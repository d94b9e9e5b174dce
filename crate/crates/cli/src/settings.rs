//! Experiment settings from a TOML file and command-line flags.
//!
//! Precedence: flags, then the config file, then built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use kgzsl::gcn::{TrainConfig, FEW_SHOT_UCF101_LR};
use kgzsl::graph::GraphMode;
use kgzsl::lexicon::{shipped, EmbeddingKind, EmbeddingTable, SplitManifest};
use kgzsl::pipeline::{
    BankSource, ClassifierBank, ExperimentConfig, FeatureSet, Fusion, Kg3TrainDescriptor, KgKind, LossConfig,
    MetricKind, TargetSource,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every experiment knob. In a config file all keys are optional and
/// unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Shipped dataset manifest: ucf101, hmdb51 or charades.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    /// Split manifest file; takes the place of --dataset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Phrase-level embedding table.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Word-level embedding table, used by the embedding ablation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word_embeddings: Option<PathBuf>,
    /// Classifier rows of the seen classes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bank: Option<PathBuf>,
    /// Classifier rows of the auxiliary classes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auxiliary_bank: Option<PathBuf>,
    /// Sample features with labels.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,

    /// Graphs to train on: kg1, kg2-verb, kg2-noun, kg3 (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graphs: Option<Vec<String>>,
    /// concat or weighted-sum.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fusion: Option<String>,
    /// Weights for weighted-sum fusion, one per graph.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fusion_weights: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_n: Option<usize>,
    /// dataset-only, dataset-loss or both-loss.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    /// fc or bipartite.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_mode: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub few_shot: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub few_shot_k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// Hidden layer widths (comma separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_decoder: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_normalize: Option<bool>,
    /// bank or closed-form.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_source: Option<String>,
    /// Ridge strength for closed-form targets.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Seen-class descriptors in kg3: all or k-samples.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kg3_train_descriptor: Option<String>,
    /// accuracy or map; chosen from the labels when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f),)* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        overlay!(
            self,
            lower,
            dataset,
            manifest,
            embeddings,
            word_embeddings,
            bank,
            auxiliary_bank,
            features,
            graphs,
            fusion,
            fusion_weights,
            top_n,
            loss,
            graph_mode,
            few_shot,
            few_shot_k,
            seed,
            lr,
            decay_rate,
            decay_every,
            epochs,
            hidden_dims,
            encoder_decoder,
            l2_normalize,
            target_source,
            gamma,
            kg3_train_descriptor,
            metric
        )
    }

    /// Resolves relative input paths against `data_dir`.
    pub fn rooted(mut self, data_dir: Option<&Path>) -> Settings {
        if let Some(dir) = data_dir {
            for p in [
                &mut self.manifest,
                &mut self.embeddings,
                &mut self.word_embeddings,
                &mut self.bank,
                &mut self.auxiliary_bank,
                &mut self.features,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        self
    }

    pub fn manifest(&self) -> Result<SplitManifest, CliError> {
        let m = match (&self.manifest, &self.dataset) {
            (Some(path), _) => loaded(path, |p| SplitManifest::load(p).map_err(kgzsl::Error::from))?,
            (None, Some(name)) => shipped::manifest(name).map_err(kgzsl::Error::from)?,
            (None, None) => return Err(CliError::Usage("pass --dataset or --manifest".into())),
        };
        m.validate().map_err(kgzsl::Error::from)?;
        Ok(m)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn few_shot_k(&self) -> usize {
        self.few_shot_k.unwrap_or(5)
    }

    pub fn loss(&self) -> Result<LossConfig, CliError> {
        parse_or(&self.loss, LossConfig::default())
    }

    pub fn graph_mode(&self) -> Result<GraphMode, CliError> {
        parse_or(&self.graph_mode, GraphMode::FullyConnected)
    }

    pub fn embedding_table(&self) -> Result<Option<EmbeddingTable>, CliError> {
        self.embeddings
            .as_deref()
            .map(|p| {
                loaded(p, |p| {
                    EmbeddingTable::load(p, EmbeddingKind::PhraseLevel).map_err(kgzsl::Error::from)
                })
            })
            .transpose()
    }

    pub fn word_embedding_table(&self) -> Result<Option<EmbeddingTable>, CliError> {
        self.word_embeddings
            .as_deref()
            .map(|p| {
                loaded(p, |p| {
                    EmbeddingTable::load(p, EmbeddingKind::WordLevel).map_err(kgzsl::Error::from)
                })
            })
            .transpose()
    }

    pub fn feature_set(&self) -> Result<Option<FeatureSet>, CliError> {
        self.features
            .as_deref()
            .map(|p| loaded(p, |p| FeatureSet::load(p).map_err(kgzsl::Error::from)))
            .transpose()
    }

    pub fn banks(&self) -> Result<(Option<ClassifierBank>, Option<ClassifierBank>), CliError> {
        let load = |p: &Option<PathBuf>| {
            p.as_deref()
                .map(|p| {
                    loaded(p, |p| {
                        ClassifierBank::load(p, BankSource::IngestedFromModel).map_err(kgzsl::Error::from)
                    })
                })
                .transpose()
        };
        Ok((load(&self.bank)?, load(&self.auxiliary_bank)?))
    }

    /// The experiment these settings describe, with defaults filled in.
    pub fn experiment(&self, manifest: &SplitManifest) -> Result<ExperimentConfig, CliError> {
        let base = ExperimentConfig::default();
        let graphs = match &self.graphs {
            Some(g) => g
                .iter()
                .map(|s| s.parse().map_err(CliError::Usage))
                .collect::<Result<Vec<KgKind>, _>>()?,
            None => base.graphs.clone(),
        };
        let fusion = match self.fusion.as_deref() {
            None | Some("concat") => Fusion::Concat,
            Some("weighted-sum") => Fusion::WeightedSum(
                self.fusion_weights
                    .clone()
                    .ok_or_else(|| CliError::Usage("weighted-sum fusion needs --fusion-weights".into()))?,
            ),
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown fusion `{other}` (expected concat or weighted-sum)"
                )))
            }
        };
        let few_shot = self.few_shot.unwrap_or(false);
        let default_lr = if few_shot && manifest.dataset_name.starts_with("ucf101") {
            FEW_SHOT_UCF101_LR
        } else {
            TrainConfig::default().lr0
        };
        let train = TrainConfig {
            lr0: self.lr.unwrap_or(default_lr),
            decay_rate: self.decay_rate.unwrap_or(base.train.decay_rate),
            decay_every: self.decay_every.unwrap_or(base.train.decay_every),
            epochs: self.epochs.unwrap_or(base.train.epochs),
            seed: self.seed(),
        };
        let target_source = match self.target_source.as_deref() {
            None | Some("bank") => TargetSource::Bank,
            Some("closed-form") => TargetSource::ClosedForm {
                gamma: self.gamma.unwrap_or(1.0),
            },
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown target source `{other}` (expected bank or closed-form)"
                )))
            }
        };
        let kg3_train_descriptor = match self.kg3_train_descriptor.as_deref() {
            None | Some("all") => Kg3TrainDescriptor::AllSamples,
            Some("k-samples") => Kg3TrainDescriptor::KSamples,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown kg3 descriptor `{other}` (expected all or k-samples)"
                )))
            }
        };
        let config = ExperimentConfig {
            graphs,
            fusion,
            top_n: self.top_n,
            loss: self.loss()?,
            graph_mode: self.graph_mode()?,
            few_shot,
            few_shot_k: self.few_shot_k(),
            seed: self.seed(),
            train,
            hidden_dims: self.hidden_dims.clone().unwrap_or(base.hidden_dims),
            encoder_decoder: self.encoder_decoder.unwrap_or(false),
            l2_normalize_output: self.l2_normalize.unwrap_or(false),
            target_source,
            kg3_train_descriptor,
            metric: self
                .metric
                .as_deref()
                .map(|m| m.parse::<MetricKind>().map_err(CliError::Usage))
                .transpose()?,
        };
        config.validate().map_err(kgzsl::Error::from)?;
        Ok(config)
    }
}

/// Opens `path` once up front so a missing file is reported by name.
fn loaded<T>(path: &Path, load: impl FnOnce(&Path) -> Result<T, kgzsl::Error>) -> Result<T, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    Ok(load(path)?)
}

fn parse_or<T: std::str::FromStr<Err = String>>(v: &Option<String>, default: T) -> Result<T, CliError> {
    v.as_deref()
        .map(str::parse)
        .transpose()
        .map_err(CliError::Usage)
        .map(|v| v.unwrap_or(default))
}
