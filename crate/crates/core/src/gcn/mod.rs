//! The graph convolutional network that maps class descriptors to
//! classifier weights.
//!
//! Each layer computes `H' = σ(M H W)` with `M` the normalised adjacency,
//! ReLU on every layer but the last and no bias. Gradients are derived by
//! hand and checked against central differences.

mod checkpoint;
mod forward;
mod fusion;
mod train;

use rand::Rng;
use thiserror::Error;

use crate::error::{numerics_kind, ErrorKind};
use crate::numerics::{DenseMatrix, NumericsError};
use crate::rng::SeedStreams;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_loss_csv};
pub use forward::{backward, backward_from, forward, masked_mse, masked_mse_grad, ForwardCache, Gradients};
pub use fusion::{
    fuse_concat, fuse_weighted_sum, fused_forward, fused_gradients, init_fusion_layer, train_fused, Branch,
    FusedGradients, FusedOutcome, FusedTrainInput,
};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome, FEW_SHOT_UCF101_LR};

pub type Result<T> = std::result::Result<T, GcnError>;

/// Default hidden and output widths after the embedding dimension.
pub const DEFAULT_HIDDEN_DIMS: [usize; 6] = [512, 1024, 1024, 1024, 1024, 1024];

#[derive(Debug, Error)]
pub enum GcnError {
    #[error("layer dims need at least an input and an output width")]
    EmptyDims,

    #[error("layer width {index} is zero")]
    ZeroDim { index: usize },

    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("training target needs at least one target set")]
    NoTargets,

    #[error("target set {set}: node {node} is outside 0..{nodes}")]
    MaskOutOfRange { set: usize, node: usize, nodes: usize },

    #[error("target set {set}: {mask} mask entries but {rows} target rows")]
    TargetMisaligned { set: usize, mask: usize, rows: usize },

    #[error("target set {set}: weight {weight} must be finite and non-negative")]
    BadWeight { set: usize, weight: f64 },

    #[error("cache was produced for adjacency {cached}, not {given}")]
    StaleCache { cached: String, given: String },

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Format(String),

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GcnError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GcnError::Diverged { .. } => ErrorKind::Numeric,
            GcnError::Numerics(e) => numerics_kind(e),
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weights: DenseMatrix,
    pub apply_activation: bool,
}

impl GcnLayer {
    pub fn d_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weights.cols()
    }
}

/// Per-node dense maps `d -> d/2 -> d` run before graph propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoder {
    pub encoder: DenseMatrix,
    pub decoder: DenseMatrix,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModelOptions {
    pub encoder_decoder: bool,
    /// Scale each output row to unit length before the loss.
    pub l2_normalize_output: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    layers: Vec<GcnLayer>,
    encoder_decoder: Option<EncoderDecoder>,
    l2_normalize_output: bool,
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("shape matches data")
}

/// `[d_emb, 512, 1024, 1024, 1024, 1024, 1024]`.
pub fn default_dims(d_emb: usize) -> Vec<usize> {
    std::iter::once(d_emb).chain(DEFAULT_HIDDEN_DIMS).collect()
}

/// Glorot-uniform model over the width chain `dims`, seeded per layer.
pub fn init_model(dims: &[usize], seed: u64) -> Result<GcnModel> {
    init_model_with(dims, seed, ModelOptions::default())
}

pub fn init_model_with(dims: &[usize], seed: u64, options: ModelOptions) -> Result<GcnModel> {
    if dims.len() < 2 {
        return Err(GcnError::EmptyDims);
    }
    if let Some(index) = dims.iter().position(|&d| d == 0) {
        return Err(GcnError::ZeroDim { index });
    }
    let streams = SeedStreams::new(seed).child("init");
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(l, w)| GcnLayer {
            weights: glorot(w[0], w[1], &mut streams.rng(&format!("layer{l}"))),
            apply_activation: l != last,
        })
        .collect();
    let encoder_decoder = options.encoder_decoder.then(|| {
        let d = dims[0];
        let half = (d / 2).max(1);
        EncoderDecoder {
            encoder: glorot(d, half, &mut streams.rng("encoder")),
            decoder: glorot(half, d, &mut streams.rng("decoder")),
        }
    });
    Ok(GcnModel {
        layers,
        encoder_decoder,
        l2_normalize_output: options.l2_normalize_output,
    })
}

impl GcnModel {
    /// Builds a model from explicit layers, checking that widths chain.
    pub fn from_layers(
        layers: Vec<GcnLayer>,
        encoder_decoder: Option<EncoderDecoder>,
        l2_normalize_output: bool,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(GcnError::EmptyDims);
        }
        for w in layers.windows(2) {
            if w[0].d_out() != w[1].d_in() {
                return Err(GcnError::DimensionMismatch {
                    what: "consecutive layer widths",
                    expected: w[0].d_out(),
                    got: w[1].d_in(),
                });
            }
        }
        if let Some(ed) = &encoder_decoder {
            let d = layers[0].d_in();
            if ed.encoder.rows() != d || ed.decoder.cols() != d || ed.encoder.cols() != ed.decoder.rows() {
                return Err(GcnError::DimensionMismatch {
                    what: "encoder-decoder widths",
                    expected: d,
                    got: ed.encoder.rows(),
                });
            }
        }
        for l in &layers {
            l.weights.ensure_finite("layer weights")?;
        }
        Ok(Self {
            layers,
            encoder_decoder,
            l2_normalize_output,
        })
    }

    pub fn layers(&self) -> &[GcnLayer] {
        &self.layers
    }

    pub fn encoder_decoder(&self) -> Option<&EncoderDecoder> {
        self.encoder_decoder.as_ref()
    }

    pub fn l2_normalize_output(&self) -> bool {
        self.l2_normalize_output
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].d_in())
            .chain(self.layers.iter().map(GcnLayer::d_out))
            .collect()
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn d_out(&self) -> usize {
        self.layers[self.layers.len() - 1].d_out()
    }

    /// Parameters in gradient order: layers, then encoder and decoder.
    pub fn parameters(&self) -> Vec<&DenseMatrix> {
        let mut p: Vec<&DenseMatrix> = self.layers.iter().map(|l| &l.weights).collect();
        if let Some(ed) = &self.encoder_decoder {
            p.push(&ed.encoder);
            p.push(&ed.decoder);
        }
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut p: Vec<&mut DenseMatrix> = self.layers.iter_mut().map(|l| &mut l.weights).collect();
        if let Some(ed) = &mut self.encoder_decoder {
            p.push(&mut ed.encoder);
            p.push(&mut ed.decoder);
        }
        p
    }
}

/// Regression targets: each set pins the outputs of `mask` nodes to rows of
/// `targets`, scaled by `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub mask: Vec<usize>,
    pub targets: DenseMatrix,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTarget {
    pub sets: Vec<TargetSet>,
}

impl TrainTarget {
    pub fn single(mask: Vec<usize>, targets: DenseMatrix) -> Self {
        Self {
            sets: vec![TargetSet {
                mask,
                targets,
                weight: 1.0,
            }],
        }
    }

    pub fn validate(&self, nodes: usize, d_out: usize) -> Result<()> {
        if self.sets.is_empty() {
            return Err(GcnError::NoTargets);
        }
        for (k, s) in self.sets.iter().enumerate() {
            if let Some(&node) = s.mask.iter().find(|&&i| i >= nodes) {
                return Err(GcnError::MaskOutOfRange { set: k, node, nodes });
            }
            if s.mask.len() != s.targets.rows() {
                return Err(GcnError::TargetMisaligned {
                    set: k,
                    mask: s.mask.len(),
                    rows: s.targets.rows(),
                });
            }
            if s.targets.cols() != d_out {
                return Err(GcnError::DimensionMismatch {
                    what: "target width",
                    expected: d_out,
                    got: s.targets.cols(),
                });
            }
            if !(s.weight.is_finite() && s.weight >= 0.0) {
                return Err(GcnError::BadWeight {
                    set: k,
                    weight: s.weight,
                });
            }
        }
        Ok(())
    }

    /// Every node index appearing in any mask.
    pub fn masked_nodes(&self) -> std::collections::BTreeSet<usize> {
        self.sets.iter().flat_map(|s| s.mask.iter().copied()).collect()
    }
}
