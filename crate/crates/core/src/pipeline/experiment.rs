use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::baselines::{label_indices, linear_combination_baseline, LINEAR_COMBINATION_K};
use super::kg::{build_kg1, build_kg2, build_kg3, choose_supports, Kg3TrainDescriptor, KgKind};
use super::metrics::{argmax_rows, mean_average_precision, mean_class_accuracy, predict, EvaluationReport, MetricKind};
use super::targets::{make_targets, LossConfig};
use super::{eszsl_targets, BankSource, ClassifierBank, FeatureSet, PipelineError, Result};
use crate::gcn::{
    forward, fuse_weighted_sum, fused_forward, init_fusion_layer, init_model_with, train, train_fused, Branch,
    EpochRecord, FusedTrainInput, GcnLayer, GcnModel, ModelOptions, TrainConfig,
};
use crate::graph::{ConstructionMeta, GraphMode, KnowledgeGraph, NodeRole};
use crate::lexicon::{generate_random_splits, EmbeddingTable, Lexicon, SplitManifest};
use crate::numerics::DenseMatrix;
use crate::rng::SeedStreams;

#[derive(Debug, Clone, PartialEq)]
pub enum Fusion {
    /// Concatenate graph outputs and mix them with one trained graph layer.
    Concat,
    /// Train each graph alone, then add outputs with fixed weights.
    WeightedSum(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSource {
    /// Rows from the supplied classifier bank.
    Bank,
    /// Ridge closed form over training features.
    ClosedForm { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graphs: Vec<KgKind>,
    pub fusion: Fusion,
    /// Neighbours per node; `None` picks the dataset default.
    pub top_n: Option<usize>,
    pub loss: LossConfig,
    pub graph_mode: GraphMode,
    pub few_shot: bool,
    pub few_shot_k: usize,
    pub seed: u64,
    pub train: TrainConfig,
    /// Widths between the descriptor and the classifier width.
    pub hidden_dims: Vec<usize>,
    pub encoder_decoder: bool,
    pub l2_normalize_output: bool,
    pub target_source: TargetSource,
    pub kg3_train_descriptor: Kg3TrainDescriptor,
    /// `None` picks mAP for multi-label data and accuracy otherwise.
    pub metric: Option<MetricKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graphs: vec![KgKind::Kg1],
            fusion: Fusion::Concat,
            top_n: None,
            loss: LossConfig::default(),
            graph_mode: GraphMode::FullyConnected,
            few_shot: false,
            few_shot_k: 5,
            seed: 0,
            train: TrainConfig::default(),
            hidden_dims: crate::gcn::DEFAULT_HIDDEN_DIMS[..5].to_vec(),
            encoder_decoder: false,
            l2_normalize_output: false,
            target_source: TargetSource::Bank,
            kg3_train_descriptor: Kg3TrainDescriptor::AllSamples,
            metric: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.graphs.is_empty() {
            return Err(PipelineError::InvalidConfig("select at least one graph".into()));
        }
        let mut seen = self.graphs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.graphs.len() {
            return Err(PipelineError::InvalidConfig("a graph is selected twice".into()));
        }
        if let Fusion::WeightedSum(w) = &self.fusion {
            if w.len() != self.graphs.len() {
                return Err(PipelineError::InvalidConfig(format!(
                    "{} fusion weights for {} graphs",
                    w.len(),
                    self.graphs.len()
                )));
            }
        }
        if self.graphs.contains(&KgKind::Kg3) && !self.few_shot {
            return Err(PipelineError::InvalidConfig("kg3 needs few-shot supports".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(PipelineError::InvalidConfig("hidden widths must be positive".into()));
        }
        self.train.validate()?;
        Ok(())
    }

    fn digest(&self) -> String {
        hex::encode(Sha256::digest(format!("{self:?}").as_bytes()))
    }
}

/// Neighbours per node: 20 for Charades, 5 otherwise.
pub fn default_top_n(dataset: &str) -> usize {
    if dataset.starts_with("charades") {
        20
    } else {
        5
    }
}

#[derive(Clone, Copy)]
pub struct ExperimentInputs<'a> {
    pub manifest: &'a SplitManifest,
    pub embeddings: Option<&'a EmbeddingTable>,
    pub lexicon: &'a Lexicon,
    /// Seen-class classifier rows.
    pub bank: Option<&'a ClassifierBank>,
    /// Classifier rows for auxiliary classes, keyed by class name.
    pub auxiliary_bank: Option<&'a ClassifierBank>,
    /// Every available sample, split by the manifest. Without it the run
    /// trains and predicts but does not evaluate.
    pub features: Option<&'a FeatureSet>,
}

/// What went into a run, for reproducibility records.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: String,
    pub config_digest: String,
    pub seed: u64,
    pub input_digests: Vec<(String, String)>,
    pub graph_fingerprints: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct TrainedGraph {
    pub kind: KgKind,
    pub graph: KnowledgeGraph,
    pub model: GcnModel,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: Option<EvaluationReport>,
    pub graphs: Vec<TrainedGraph>,
    /// Single-layer fusion model when outputs were concatenated.
    pub fusion: Option<(GcnModel, Vec<EpochRecord>)>,
    /// Predicted classifier rows for the unseen classes.
    pub predicted: ClassifierBank,
    /// Support sample ids per unseen class in few-shot runs.
    pub supports: Vec<Vec<String>>,
    pub provenance: Provenance,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn input_digests(inputs: &ExperimentInputs<'_>) -> Result<Vec<(String, String)>> {
    let mut out = vec![("manifest".to_string(), inputs.manifest.fingerprint())];
    if let Some(e) = inputs.embeddings {
        let mut buf = Vec::new();
        e.write(&mut buf)?;
        out.push(("embeddings".into(), sha_hex(&buf)));
    }
    for (name, bank) in [("bank", inputs.bank), ("auxiliary_bank", inputs.auxiliary_bank)] {
        if let Some(b) = bank {
            let mut buf = Vec::new();
            b.write_binary(&mut buf)?;
            out.push((name.into(), sha_hex(&buf)));
        }
    }
    if let Some(f) = inputs.features {
        let mut buf = Vec::new();
        f.write_text(&mut buf)?;
        out.push(("features".into(), sha_hex(&buf)));
    }
    Ok(out)
}

/// Scores an evaluation set with `metric`, or the one its labels call for.
pub(crate) fn evaluate_with(
    scores: &DenseMatrix,
    set: &FeatureSet,
    classes: &[String],
    metric: MetricKind,
) -> Result<EvaluationReport> {
    let labels = label_indices(set, classes)?;
    match metric {
        MetricKind::MeanAveragePrecision => mean_average_precision(scores, &labels, classes),
        MetricKind::MeanClassAccuracy => {
            let single = labels
                .iter()
                .zip(set.ids())
                .map(|(l, id)| match l.as_slice() {
                    [one] => Ok(*one),
                    _ => Err(PipelineError::InvalidConfig(format!(
                        "sample `{id}` has {} labels; accuracy needs single-label data",
                        l.len()
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            mean_class_accuracy(&argmax_rows(scores), &single, classes)
        }
    }
}

/// Evaluation samples: held-out classes, minus few-shot supports.
fn evaluation_set(test_set: &FeatureSet, supports: &[Vec<String>]) -> FeatureSet {
    let excluded: std::collections::HashSet<&str> = supports.iter().flatten().map(String::as_str).collect();
    let keep: Vec<usize> = (0..test_set.len())
        .filter(|&i| !excluded.contains(test_set.ids()[i].as_str()))
        .collect();
    test_set.subset(&keep)
}

/// Scores predicted unseen-class rows against held-out samples.
pub fn evaluate_bank(
    manifest: &SplitManifest,
    features: &FeatureSet,
    predicted: &ClassifierBank,
    supports: &[Vec<String>],
    metric: Option<MetricKind>,
) -> Result<EvaluationReport> {
    let (_, test_set) = features.split_for(manifest)?;
    let eval = evaluation_set(&test_set, supports);
    let ids: Vec<&str> = manifest.test_classes.iter().map(String::as_str).collect();
    let w = predicted.gather(&ids)?;
    let scores = predict(eval.features(), &w)?;
    let metric = metric.unwrap_or(if manifest.multilabel || eval.is_multilabel() {
        MetricKind::MeanAveragePrecision
    } else {
        MetricKind::MeanClassAccuracy
    });
    evaluate_with(&scores, &eval, &manifest.test_classes, metric)
}

struct Prepared {
    graphs: Vec<(KgKind, KnowledgeGraph)>,
    bank: ClassifierBank,
    test_set: Option<FeatureSet>,
    supports: Vec<Vec<String>>,
    metric: MetricKind,
}

fn prepare(config: &ExperimentConfig, inputs: &ExperimentInputs<'_>) -> Result<Prepared> {
    let manifest = inputs.manifest;
    let (train_set, test_set) = match inputs.features {
        Some(f) => {
            let (a, b) = f.split_for(manifest).map_err(|e| e.at("features"))?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let needs_features = |what: &str| PipelineError::InvalidConfig(format!("{what} needs a feature set"));
    let multilabel = manifest.multilabel || test_set.as_ref().is_some_and(FeatureSet::is_multilabel);
    if config.few_shot && multilabel {
        return Err(PipelineError::InvalidConfig(
            "few-shot evaluation needs single-label data".into(),
        ));
    }
    let metric = config.metric.unwrap_or(if multilabel {
        MetricKind::MeanAveragePrecision
    } else {
        MetricKind::MeanClassAccuracy
    });

    let bank = match config.target_source {
        TargetSource::Bank => inputs
            .bank
            .cloned()
            .ok_or_else(|| PipelineError::InvalidConfig("no classifier bank supplied".into()))?,
        TargetSource::ClosedForm { gamma } => {
            let train_set = train_set
                .as_ref()
                .ok_or_else(|| needs_features("closed-form targets"))?;
            eszsl_targets(train_set, &manifest.train_classes, gamma).map_err(|e| e.at("closed-form targets"))?
        }
    };
    if let Some(t) = test_set.as_ref().filter(|t| !t.is_empty() && t.dim() != bank.dim()) {
        return Err(PipelineError::Shape {
            what: "feature width vs classifier width",
            expected: bank.dim(),
            got: t.dim(),
        });
    }

    let top_n = config.top_n.unwrap_or_else(|| default_top_n(&manifest.dataset_name));
    let meta = ConstructionMeta {
        top_n,
        mode: config.graph_mode,
    };
    let include_aux = config.loss.includes_auxiliary() && !manifest.auxiliary_classes.is_empty();
    let embeddings = || {
        inputs
            .embeddings
            .ok_or_else(|| PipelineError::InvalidConfig("phrase graphs need an embedding table".into()))
    };

    let mut supports = Vec::new();
    let mut graphs = Vec::with_capacity(config.graphs.len());
    let mut kg2 = None;
    for &kind in &config.graphs {
        let g = match kind {
            KgKind::Kg1 => build_kg1(manifest, embeddings()?, meta, include_aux).map_err(|e| e.at("build kg1"))?,
            KgKind::Kg2Verb | KgKind::Kg2Noun => {
                if kg2.is_none() {
                    kg2 = Some(
                        build_kg2(manifest, inputs.lexicon, embeddings()?, meta, include_aux)
                            .map_err(|e| e.at("build kg2"))?,
                    );
                }
                let (v, n) = kg2.as_ref().expect("built above");
                if kind == KgKind::Kg2Verb {
                    v.clone()
                } else {
                    n.clone()
                }
            }
            KgKind::Kg3 => {
                let (Some(train_set), Some(test_set)) = (&train_set, &test_set) else {
                    return Err(needs_features("kg3"));
                };
                let k = build_kg3(
                    manifest,
                    train_set,
                    test_set,
                    config.few_shot_k,
                    config.seed,
                    top_n,
                    config.kg3_train_descriptor,
                )
                .map_err(|e| e.at("build kg3"))?;
                supports = k.supports;
                k.graph
            }
        };
        graphs.push((kind, g));
    }
    if config.few_shot && supports.is_empty() {
        let test_set = test_set.as_ref().ok_or_else(|| needs_features("few-shot evaluation"))?;
        supports = choose_supports(manifest, test_set, config.few_shot_k, config.seed)?
            .iter()
            .map(|idx| idx.iter().map(|&i| test_set.ids()[i].clone()).collect())
            .collect();
    }
    Ok(Prepared {
        graphs,
        bank,
        test_set,
        supports,
        metric,
    })
}

fn loss_for(kind: KgKind, loss: LossConfig) -> LossConfig {
    if kind == KgKind::Kg3 {
        LossConfig::DatasetNodesLoss
    } else {
        loss
    }
}

fn model_options(config: &ExperimentConfig) -> ModelOptions {
    ModelOptions {
        encoder_decoder: config.encoder_decoder,
        l2_normalize_output: config.l2_normalize_output,
    }
}

fn dims_for(config: &ExperimentConfig, d_in: usize, d_out: usize) -> Vec<usize> {
    std::iter::once(d_in)
        .chain(config.hidden_dims.iter().copied())
        .chain(std::iter::once(d_out))
        .collect()
}

fn test_rows(graph: &KnowledgeGraph, outputs: &DenseMatrix, test_classes: &[String]) -> Result<DenseMatrix> {
    let idx = test_classes
        .iter()
        .map(|c| {
            graph
                .node_index(c)
                .filter(|&i| graph.roles()[i] == NodeRole::Test)
                .ok_or_else(|| PipelineError::InvalidConfig(format!("graph has no test node `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(outputs.select_rows(&idx))
}

/// Builds graphs, trains, predicts the unseen-class rows and evaluates.
pub fn run_experiment(config: &ExperimentConfig, inputs: &ExperimentInputs<'_>) -> Result<ExperimentOutcome> {
    config.validate()?;
    let manifest = inputs.manifest;
    let prepared = prepare(config, inputs)?;
    let bank = &prepared.bank;
    let d_out = bank.dim();
    let init = SeedStreams::new(config.seed).child("init");

    let mut provenance = Provenance {
        config: format!("{config:#?}"),
        config_digest: config.digest(),
        seed: config.seed,
        input_digests: input_digests(inputs)?,
        graph_fingerprints: prepared
            .graphs
            .iter()
            .map(|(k, g)| (k.as_str().to_string(), g.fingerprint()))
            .collect(),
    };

    let setups = prepared
        .graphs
        .iter()
        .map(|(kind, g)| {
            let target = make_targets(bank, inputs.auxiliary_bank, g, loss_for(*kind, config.loss))
                .map_err(|e| e.at("targets"))?;
            let adj = g.normalized().map_err(|e| PipelineError::from(e).at("normalize"))?;
            let model = init_model_with(
                &dims_for(config, g.features().cols(), d_out),
                init.seed_for(kind.as_str()),
                model_options(config),
            )?;
            Ok((*kind, g.clone(), adj, target, model))
        })
        .collect::<Result<Vec<_>>>()?;

    let (graphs, fusion, w_test) = if setups.len() == 1 || matches!(config.fusion, Fusion::WeightedSum(_)) {
        let trained = setups
            .into_par_iter()
            .map(|(kind, g, adj, target, model)| {
                let out = train(model, &adj, g.features(), &target, &config.train)
                    .map_err(|e| PipelineError::from(e).at("train"))?;
                let (outputs, _) = forward(&out.model, &adj, g.features())?;
                let rows = test_rows(&g, &outputs, &manifest.test_classes)?;
                Ok((
                    TrainedGraph {
                        kind,
                        graph: g,
                        model: out.model,
                        history: out.history,
                    },
                    rows,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (graphs, rows): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
        let weights = match &config.fusion {
            Fusion::WeightedSum(w) if rows.len() > 1 => w.clone(),
            _ => vec![1.0; rows.len()],
        };
        let w_test = fuse_weighted_sum(&rows, &weights)?;
        (graphs, None, w_test)
    } else {
        let fusion_pos = [KgKind::Kg3, KgKind::Kg1]
            .iter()
            .find_map(|k| setups.iter().position(|s| s.0 == *k))
            .unwrap_or(0);
        let (fusion_kind, fusion_graph, fusion_adj, _, _) = &setups[fusion_pos];
        let fusion_target = make_targets(
            bank,
            inputs.auxiliary_bank,
            fusion_graph,
            loss_for(*fusion_kind, config.loss),
        )?;
        let branches = setups
            .iter()
            .map(|(_, g, adj, _, model)| {
                let rows = fusion_graph
                    .labels()
                    .iter()
                    .map(|l| {
                        g.node_index(l).ok_or_else(|| {
                            PipelineError::InvalidConfig(format!("node `{l}` missing from a fused graph"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Branch {
                    model: model.clone(),
                    adjacency: adj.clone(),
                    features: g.features().clone(),
                    rows,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let layer = init_fusion_layer(d_out * branches.len(), d_out, init.seed_for("fusion"));
        let out = train_fused(FusedTrainInput {
            branches,
            fusion_adjacency: fusion_adj,
            fusion_layer: layer,
            target: &fusion_target,
            config: &config.train,
        })
        .map_err(|e| PipelineError::from(e).at("train fused"))?;
        let outputs = fused_forward(&out.branches, fusion_adj, &out.fusion_layer)?;
        let w_test = test_rows(fusion_graph, &outputs, &manifest.test_classes)?;
        let graphs = setups
            .into_iter()
            .zip(out.branches)
            .map(|((kind, g, ..), b)| TrainedGraph {
                kind,
                graph: g,
                model: b.model,
                history: Vec::new(),
            })
            .collect();
        let fusion_model = GcnModel::from_layers(
            vec![GcnLayer {
                weights: out.fusion_layer.weights,
                apply_activation: false,
            }],
            None,
            false,
        )?;
        (graphs, Some((fusion_model, out.history)), w_test)
    };

    let predicted = ClassifierBank::new(manifest.test_classes.clone(), w_test, BankSource::Predicted)?;
    let report = match &prepared.test_set {
        Some(test_set) => {
            let eval = evaluation_set(test_set, &prepared.supports);
            let scores = predict(eval.features(), predicted.rows())?;
            let mut report =
                evaluate_with(&scores, &eval, &manifest.test_classes, prepared.metric).map_err(|e| e.at("evaluate"))?;
            report.config_fingerprint = provenance.config_digest.clone();
            if let Some(e) = inputs.embeddings {
                report.warnings.extend(e.warnings().iter().cloned());
            }
            Some(report)
        }
        None => None,
    };
    provenance.input_digests.sort();
    Ok(ExperimentOutcome {
        report,
        graphs,
        fusion,
        predicted,
        supports: prepared.supports,
        provenance,
    })
}

/// One sweep axis of the ablation command.
#[derive(Debug, Clone, PartialEq)]
pub enum AblationAxis {
    /// Phrase embeddings against averaged word embeddings.
    Embedding,
    /// Dataset-only graph, auxiliary nodes with dataset loss, and with both losses.
    GraphConfig,
    /// Fully connected against bipartite edges.
    GraphMode,
    /// The network against a similarity-weighted average of seen rows.
    LinearCombination,
    EncoderDecoder,
    /// Random held-out sets drawn from the eligible pool.
    Splits {
        n_test: usize,
        n_splits: usize,
    },
}

impl AblationAxis {
    pub const NAMES: [&'static str; 6] = [
        "embedding",
        "graph-config",
        "graph-mode",
        "linear-combination",
        "encoder-decoder",
        "splits",
    ];

    pub fn parse(name: &str, n_test: usize, n_splits: usize) -> std::result::Result<Self, String> {
        match name {
            "embedding" => Ok(Self::Embedding),
            "graph-config" => Ok(Self::GraphConfig),
            "graph-mode" => Ok(Self::GraphMode),
            "linear-combination" => Ok(Self::LinearCombination),
            "encoder-decoder" => Ok(Self::EncoderDecoder),
            "splits" => Ok(Self::Splits { n_test, n_splits }),
            other => Err(format!(
                "unknown ablation axis `{other}`; valid axes: {}",
                Self::NAMES.join(", ")
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub setting: String,
    pub report: EvaluationReport,
}

impl AblationRow {
    pub fn table(rows: &[AblationRow]) -> String {
        let width = rows.iter().map(|r| r.setting.len()).max().unwrap_or(0).max(7);
        let mut s = format!("{:<width$}  score\n", "setting");
        for r in rows {
            let _ = writeln!(s, "{:<width$}  {:>6.2}", r.setting, 100.0 * r.report.overall);
        }
        s
    }

    pub fn csv(rows: &[AblationRow]) -> String {
        let mut s = String::from("setting,score\n");
        for r in rows {
            let _ = writeln!(s, "{},{:?}", r.setting, r.report.overall);
        }
        s
    }
}

/// Evaluates the linear-combination baseline on the first phrase graph of
/// `config`.
fn linear_combination_report(config: &ExperimentConfig, inputs: &ExperimentInputs<'_>) -> Result<EvaluationReport> {
    let mut c = config.clone();
    c.graphs = vec![KgKind::Kg1];
    let prepared = prepare(&c, inputs)?;
    let (_, graph) = &prepared.graphs[0];
    let w = linear_combination_baseline(graph, &prepared.bank, LINEAR_COMBINATION_K)?;
    let test_set = prepared
        .test_set
        .as_ref()
        .ok_or_else(|| PipelineError::InvalidConfig("evaluation needs a feature set".into()))?;
    let eval = evaluation_set(test_set, &prepared.supports);
    let scores = predict(eval.features(), &w)?;
    evaluate_with(&scores, &eval, &inputs.manifest.test_classes, prepared.metric)
}

/// Runs every setting of `axis` and returns one row each, in a fixed
/// order. Settings run in parallel.
pub fn run_ablation(
    axis: &AblationAxis,
    base: &ExperimentConfig,
    inputs: &ExperimentInputs<'_>,
    word_embeddings: Option<&EmbeddingTable>,
) -> Result<Vec<AblationRow>> {
    type Job<'a> = (
        String,
        ExperimentConfig,
        Option<SplitManifest>,
        Option<&'a EmbeddingTable>,
        bool,
    );
    let plain = |name: &str, c: ExperimentConfig| -> Job<'_> { (name.to_string(), c, None, None, false) };
    let with = |f: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let jobs: Vec<Job<'_>> = match axis {
        AblationAxis::Embedding => {
            let words = word_embeddings.ok_or_else(|| {
                PipelineError::InvalidConfig("the embedding axis needs a word embedding table".into())
            })?;
            vec![
                plain("phrase embeddings", base.clone()),
                (
                    "averaged word embeddings".into(),
                    base.clone(),
                    None,
                    Some(words),
                    false,
                ),
            ]
        }
        AblationAxis::GraphConfig => vec![
            plain(
                "dataset graph, dataset loss",
                with(&|c| c.loss = LossConfig::DatasetOnly),
            ),
            plain(
                "with auxiliary, dataset loss",
                with(&|c| c.loss = LossConfig::DatasetNodesLoss),
            ),
            plain(
                "with auxiliary, both losses",
                with(&|c| c.loss = LossConfig::BothNodesLoss),
            ),
        ],
        AblationAxis::GraphMode => {
            let loss = if base.loss.includes_auxiliary() {
                base.loss
            } else {
                LossConfig::DatasetNodesLoss
            };
            vec![
                plain(
                    "fully connected",
                    with(&|c| {
                        c.graph_mode = GraphMode::FullyConnected;
                        c.loss = loss;
                    }),
                ),
                plain(
                    "bipartite",
                    with(&|c| {
                        c.graph_mode = GraphMode::Bipartite;
                        c.loss = loss;
                    }),
                ),
            ]
        }
        AblationAxis::LinearCombination => vec![
            plain("gcn", with(&|c| c.graphs = vec![KgKind::Kg1])),
            ("linear combination".into(), base.clone(), None, None, true),
        ],
        AblationAxis::EncoderDecoder => vec![
            plain("without encoder-decoder", with(&|c| c.encoder_decoder = false)),
            plain("with encoder-decoder", with(&|c| c.encoder_decoder = true)),
        ],
        AblationAxis::Splits { n_test, n_splits } => {
            generate_random_splits(inputs.manifest, *n_test, *n_splits, base.seed)?
                .into_iter()
                .enumerate()
                .map(|(k, m)| (format!("split {k}"), base.clone(), Some(m), None, false))
                .collect()
        }
    };

    let rows = jobs
        .into_par_iter()
        .map(|(setting, config, manifest, embeddings, baseline)| {
            let mut local = *inputs;
            if let Some(m) = &manifest {
                local.manifest = m;
            }
            if let Some(e) = embeddings {
                local.embeddings = Some(e);
            }
            let report = if baseline {
                linear_combination_report(&config, &local)?
            } else {
                run_experiment(&config, &local)?
                    .report
                    .ok_or_else(|| PipelineError::InvalidConfig("ablation needs a feature set".into()))?
            };
            Ok(AblationRow { setting, report })
        })
        .collect::<Result<Vec<_>>>()?;

    if matches!(axis, AblationAxis::Splits { .. }) {
        let per_class: Vec<(String, f64)> = rows.iter().map(|r| (r.setting.clone(), r.report.overall)).collect();
        let overall = per_class.iter().map(|p| p.1).sum::<f64>() / per_class.len() as f64;
        let mean = EvaluationReport {
            metric: rows[0].report.metric,
            overall,
            per_class,
            warnings: Vec::new(),
            config_fingerprint: base.digest(),
        };
        let mut rows = rows;
        rows.push(AblationRow {
            setting: "mean".into(),
            report: mean,
        });
        return Ok(rows);
    }
    Ok(rows)
}
