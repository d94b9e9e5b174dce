use super::{GcnError, GcnModel, Result, TrainTarget};
use crate::graph::NormalizedAdjacency;
use crate::numerics::{relu, relu_backward, DenseMatrix};

/// Intermediate values of one forward pass, needed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    adjacency_fingerprint: String,
    /// Encoder input, encoder pre-activation, encoder output.
    encoder: Option<(DenseMatrix, DenseMatrix, DenseMatrix)>,
    /// `M H^l` per layer.
    propagated: Vec<DenseMatrix>,
    /// `M H^l W^l` per layer, before activation.
    pre_activation: Vec<DenseMatrix>,
    /// Output rows before optional L2 normalisation.
    raw_output: DenseMatrix,
}

/// Gradients in the order of [`GcnModel::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseMatrix>,
    pub encoder: Option<DenseMatrix>,
    pub decoder: Option<DenseMatrix>,
}

impl Gradients {
    pub fn as_list(&self) -> Vec<&DenseMatrix> {
        self.layers.iter().chain(&self.encoder).chain(&self.decoder).collect()
    }
}

fn l2_rows(y: &DenseMatrix) -> DenseMatrix {
    let mut out = y.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

/// Runs the model over `features` with propagation operator `adj`.
pub fn forward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    features: &DenseMatrix,
) -> Result<(DenseMatrix, ForwardCache)> {
    let m = adj.matrix();
    if features.rows() != m.dim() {
        return Err(GcnError::DimensionMismatch {
            what: "feature rows vs adjacency size",
            expected: m.dim(),
            got: features.rows(),
        });
    }
    if features.cols() != model.d_in() {
        return Err(GcnError::DimensionMismatch {
            what: "feature width vs first layer input",
            expected: model.d_in(),
            got: features.cols(),
        });
    }

    let mut h;
    let encoder = match model.encoder_decoder() {
        Some(ed) => {
            let z = features.matmul(&ed.encoder)?;
            let e = relu(&z);
            h = e.matmul(&ed.decoder)?;
            Some((features.clone(), z, e))
        }
        None => {
            h = features.clone();
            None
        }
    };

    let mut propagated = Vec::with_capacity(model.layers().len());
    let mut pre_activation = Vec::with_capacity(model.layers().len());
    for layer in model.layers() {
        let p = m.spmm(&h)?;
        let z = p.matmul(&layer.weights)?;
        h = if layer.apply_activation { relu(&z) } else { z.clone() };
        propagated.push(p);
        pre_activation.push(z);
    }
    let output = if model.l2_normalize_output() {
        l2_rows(&h)
    } else {
        h.clone()
    };
    Ok((
        output,
        ForwardCache {
            adjacency_fingerprint: adj.source_fingerprint().to_string(),
            encoder,
            propagated,
            pre_activation,
            raw_output: h,
        },
    ))
}

/// `Σ_k w_k · mean over the k-th mask's rows and all columns of (O − T)²`.
pub fn masked_mse(outputs: &DenseMatrix, target: &TrainTarget) -> Result<f64> {
    target.validate(outputs.rows(), outputs.cols())?;
    let d = outputs.cols();
    let mut total = 0.0;
    for s in &target.sets {
        if s.mask.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for (r, &i) in s.mask.iter().enumerate() {
            for (o, t) in outputs.row(i).iter().zip(s.targets.row(r)) {
                sum += (o - t) * (o - t);
            }
        }
        total += s.weight * sum / (s.mask.len() * d) as f64;
    }
    Ok(total)
}

/// Gradient of [`masked_mse`] with respect to the outputs.
pub fn masked_mse_grad(outputs: &DenseMatrix, target: &TrainTarget) -> Result<DenseMatrix> {
    target.validate(outputs.rows(), outputs.cols())?;
    let d = outputs.cols();
    let mut g = DenseMatrix::zeros(outputs.rows(), d);
    for s in &target.sets {
        if s.mask.is_empty() {
            continue;
        }
        let scale = 2.0 * s.weight / (s.mask.len() * d) as f64;
        for (r, &i) in s.mask.iter().enumerate() {
            let t = s.targets.row(r);
            let o = outputs.row(i).to_vec();
            for ((gv, ov), tv) in g.row_mut(i).iter_mut().zip(o).zip(t) {
                *gv += scale * (ov - tv);
            }
        }
    }
    Ok(g)
}

fn l2_rows_backward(raw: &DenseMatrix, upstream: &DenseMatrix) -> DenseMatrix {
    let mut g = upstream.clone();
    for i in 0..raw.rows() {
        let y = raw.row(i);
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        let u = upstream.row(i);
        let dot: f64 = y.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / n;
        for ((gv, yv), uv) in g.row_mut(i).iter_mut().zip(y).zip(u) {
            *gv = (uv - yv / n * dot) / n;
        }
    }
    g
}

/// Backpropagates `d_output`, the loss gradient at the model output, and
/// also returns the gradient at the input features.
pub fn backward_from(
    model: &GcnModel,
    cache: &ForwardCache,
    adj: &NormalizedAdjacency,
    d_output: &DenseMatrix,
) -> Result<(Gradients, DenseMatrix)> {
    if cache.adjacency_fingerprint != adj.source_fingerprint() {
        return Err(GcnError::StaleCache {
            cached: cache.adjacency_fingerprint.clone(),
            given: adj.source_fingerprint().to_string(),
        });
    }
    if cache.propagated.len() != model.layers().len() {
        return Err(GcnError::DimensionMismatch {
            what: "cached layer count",
            expected: model.layers().len(),
            got: cache.propagated.len(),
        });
    }
    let m = adj.matrix();
    let mut upstream = if model.l2_normalize_output() {
        l2_rows_backward(&cache.raw_output, d_output)
    } else {
        d_output.clone()
    };
    let mut layer_grads = vec![DenseMatrix::zeros(0, 0); model.layers().len()];
    for (l, layer) in model.layers().iter().enumerate().rev() {
        let delta = if layer.apply_activation {
            relu_backward(&cache.pre_activation[l], &upstream)?
        } else {
            upstream
        };
        layer_grads[l] = cache.propagated[l].transpose().matmul(&delta)?;
        let d_prop = delta.matmul(&layer.weights.transpose())?;
        // The operator is symmetric, so Mᵀ = M.
        upstream = m.spmm(&d_prop)?;
    }
    let (encoder, decoder, d_input) = match (model.encoder_decoder(), &cache.encoder) {
        (Some(ed), Some((x, z, e))) => {
            let g_dec = e.transpose().matmul(&upstream)?;
            let d_e = upstream.matmul(&ed.decoder.transpose())?;
            let d_z = relu_backward(z, &d_e)?;
            let g_enc = x.transpose().matmul(&d_z)?;
            let d_x = d_z.matmul(&ed.encoder.transpose())?;
            (Some(g_enc), Some(g_dec), d_x)
        }
        (None, None) => (None, None, upstream),
        _ => {
            return Err(GcnError::DimensionMismatch {
                what: "cached encoder-decoder stages",
                expected: usize::from(model.encoder_decoder().is_some()),
                got: usize::from(cache.encoder.is_some()),
            })
        }
    };
    Ok((
        Gradients {
            layers: layer_grads,
            encoder,
            decoder,
        },
        d_input,
    ))
}

/// Exact gradients of [`masked_mse`] with respect to every weight matrix.
pub fn backward(
    model: &GcnModel,
    cache: &ForwardCache,
    outputs: &DenseMatrix,
    adj: &NormalizedAdjacency,
    target: &TrainTarget,
) -> Result<Gradients> {
    let g = masked_mse_grad(outputs, target)?;
    Ok(backward_from(model, cache, adj, &g)?.0)
}
