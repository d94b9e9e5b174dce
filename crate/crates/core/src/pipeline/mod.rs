//! End-to-end experiments: graph assembly, regression targets, training,
//! prediction, metrics, baselines and ablation sweeps.

mod bank;
mod baselines;
mod experiment;
mod features;
mod kg;
mod metrics;
mod targets;

use thiserror::Error;

use crate::error::{numerics_kind, ErrorKind};
use crate::gcn::GcnError;
use crate::graph::GraphError;
use crate::lexicon::LexiconError;
use crate::numerics::NumericsError;

pub use bank::{BankSource, ClassifierBank};
pub use baselines::{
    class_centers, cosine_scores, eszsl_targets, evaluate_scores, linear_combination_baseline,
    nearest_neighbor_baseline, LINEAR_COMBINATION_K,
};
pub use experiment::{
    default_top_n, evaluate_bank, run_ablation, run_experiment, AblationAxis, AblationRow, ExperimentConfig,
    ExperimentInputs, ExperimentOutcome, Fusion, Provenance, TargetSource, TrainedGraph,
};
pub use features::FeatureSet;
pub use kg::{build_kg1, build_kg2, build_kg3, choose_supports, node_layout, Kg3, Kg3TrainDescriptor, KgKind};
pub use metrics::{
    argmax_rows, average_precision, mean_average_precision, mean_class_accuracy, predict, EvaluationReport, MetricKind,
};
pub use targets::{assert_zero_shot_hygiene, make_targets, LossConfig};

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{what} line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("no classifier row for class `{0}`")]
    MissingBankRow(String),

    #[error("class `{class}` (embedding key `{key}`) cannot be embedded: {source}")]
    Unresolvable {
        class: String,
        key: String,
        #[source]
        source: LexiconError,
    },

    #[error("sample `{sample}` has label `{label}`, which is not a class of this split")]
    UnknownLabel { sample: String, label: String },

    #[error("class `{class}` needs {needed} samples, found {found}")]
    NotEnoughSamples { class: String, needed: usize, found: usize },

    #[error("class `{0}` has no evaluation samples")]
    EmptyClass(String),

    #[error("test class `{0}` has no seen class with positive similarity")]
    IsolatedTestNode(String),

    #[error("class center for `{0}` is the zero vector")]
    ZeroCenter(String),

    #[error("test node `{0}` entered a loss mask")]
    TestNodeInLoss(String),

    #[error("invalid experiment: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Lexicon(#[from] LexiconError),

    #[error(transparent)]
    Gcn(#[from] GcnError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            PipelineError::Numerics(e) | PipelineError::Graph(GraphError::Numerics(e)) => numerics_kind(e),
            PipelineError::Gcn(e) => e.kind(),
            PipelineError::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        match self {
            PipelineError::Stage { .. } => self,
            other => PipelineError::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}
