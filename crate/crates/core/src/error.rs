use thiserror::Error;

use crate::gcn::GcnError;
use crate::graph::GraphError;
use crate::lexicon::LexiconError;
use crate::numerics::NumericsError;
use crate::pipeline::PipelineError;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad class of a failure, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Inputs violate a contract: shapes, manifests, labels, files.
    Validation,
    /// Arithmetic went wrong: non-finite values, divergence, singular systems.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Gcn(#[from] GcnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numerics(e) => numerics_kind(e),
            Error::Graph(GraphError::Numerics(e)) => numerics_kind(e),
            Error::Graph(_) | Error::Lexicon(_) => ErrorKind::Validation,
            Error::Gcn(e) => e.kind(),
            Error::Pipeline(e) => e.kind(),
        }
    }
}

pub(crate) fn numerics_kind(e: &NumericsError) -> ErrorKind {
    match e {
        NumericsError::NonFinite { .. } | NumericsError::NotPositiveDefinite { .. } => ErrorKind::Numeric,
        _ => ErrorKind::Validation,
    }
}
