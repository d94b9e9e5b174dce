use super::forward::{backward_from, forward, masked_mse, masked_mse_grad, ForwardCache};
use super::train::{EpochRecord, TrainConfig};
use super::{glorot, GcnError, GcnLayer, GcnModel, Result, TrainTarget};
use crate::graph::NormalizedAdjacency;
use crate::numerics::{AdamState, DenseMatrix};
use crate::rng::SeedStreams;

/// `Σ wᵢ · outputsᵢ`.
pub fn fuse_weighted_sum(outputs: &[DenseMatrix], weights: &[f64]) -> Result<DenseMatrix> {
    if outputs.is_empty() {
        return Err(GcnError::NoTargets);
    }
    if outputs.len() != weights.len() {
        return Err(GcnError::DimensionMismatch {
            what: "fusion weight count",
            expected: outputs.len(),
            got: weights.len(),
        });
    }
    let mut acc = DenseMatrix::zeros(outputs[0].rows(), outputs[0].cols());
    for (o, &w) in outputs.iter().zip(weights) {
        acc.add_scaled(o, w)?;
    }
    Ok(acc)
}

/// One linear graph layer over the channel-wise concatenation:
/// `M · [O₁ … O_k] · W`, with no activation.
pub fn fuse_concat(outputs: &[DenseMatrix], adj: &NormalizedAdjacency, layer: &GcnLayer) -> Result<DenseMatrix> {
    let refs: Vec<&DenseMatrix> = outputs.iter().collect();
    let cat = DenseMatrix::hstack(&refs)?;
    if cat.rows() != adj.dim() {
        return Err(GcnError::DimensionMismatch {
            what: "fused rows vs fusion adjacency size",
            expected: adj.dim(),
            got: cat.rows(),
        });
    }
    if cat.cols() != layer.d_in() {
        return Err(GcnError::DimensionMismatch {
            what: "concatenated width vs fusion layer input",
            expected: layer.d_in(),
            got: cat.cols(),
        });
    }
    Ok(adj.matrix().spmm(&cat)?.matmul(&layer.weights)?)
}

/// Glorot-initialised fusion layer, seeded apart from the branches.
pub fn init_fusion_layer(d_in: usize, d_out: usize, seed: u64) -> GcnLayer {
    GcnLayer {
        weights: glorot(d_in, d_out, &mut SeedStreams::new(seed).child("init").rng("fusion")),
        apply_activation: false,
    }
}

/// A per-graph model plus the map from fusion nodes to its own nodes:
/// fusion node `i` reads branch row `rows[i]`.
#[derive(Debug, Clone)]
pub struct Branch {
    pub model: GcnModel,
    pub adjacency: NormalizedAdjacency,
    pub features: DenseMatrix,
    pub rows: Vec<usize>,
}

impl Branch {
    fn check(&self, fusion_nodes: usize) -> Result<()> {
        if self.rows.len() != fusion_nodes {
            return Err(GcnError::DimensionMismatch {
                what: "branch row map length vs fusion nodes",
                expected: fusion_nodes,
                got: self.rows.len(),
            });
        }
        if let Some(&r) = self.rows.iter().find(|&&r| r >= self.adjacency.dim()) {
            return Err(GcnError::MaskOutOfRange {
                set: 0,
                node: r,
                nodes: self.adjacency.dim(),
            });
        }
        Ok(())
    }

    fn run(&self) -> Result<(DenseMatrix, ForwardCache, DenseMatrix)> {
        let (out, cache) = forward(&self.model, &self.adjacency, &self.features)?;
        let gathered = out.select_rows(&self.rows);
        Ok((out, cache, gathered))
    }
}

pub struct FusedTrainInput<'a> {
    pub branches: Vec<Branch>,
    pub fusion_adjacency: &'a NormalizedAdjacency,
    pub fusion_layer: GcnLayer,
    pub target: &'a TrainTarget,
    pub config: &'a TrainConfig,
}

#[derive(Debug, Clone)]
pub struct FusedOutcome {
    pub branches: Vec<Branch>,
    pub fusion_layer: GcnLayer,
    pub history: Vec<EpochRecord>,
}

/// Outputs of the fused network on the fusion node set.
pub fn fused_forward(branches: &[Branch], adj: &NormalizedAdjacency, layer: &GcnLayer) -> Result<DenseMatrix> {
    let mut gathered = Vec::with_capacity(branches.len());
    for b in branches {
        b.check(adj.dim())?;
        gathered.push(b.run()?.2);
    }
    fuse_concat(&gathered, adj, layer)
}

/// Loss of the fused network and its gradients, per branch parameter (in
/// [`GcnModel::parameters`] order) and for the fusion weights.
#[derive(Debug, Clone)]
pub struct FusedGradients {
    pub loss: f64,
    pub branches: Vec<Vec<DenseMatrix>>,
    pub fusion: DenseMatrix,
}

pub fn fused_gradients(
    branches: &[Branch],
    adj: &NormalizedAdjacency,
    fusion_layer: &GcnLayer,
    target: &TrainTarget,
) -> Result<FusedGradients> {
    let mut runs = Vec::with_capacity(branches.len());
    for b in branches {
        b.check(adj.dim())?;
        runs.push(b.run()?);
    }
    let gathered: Vec<&DenseMatrix> = runs.iter().map(|r| &r.2).collect();
    let cat = DenseMatrix::hstack(&gathered)?;
    let prop = adj.matrix().spmm(&cat)?;
    let out = prop.matmul(&fusion_layer.weights)?;
    let loss = masked_mse(&out, target)?;

    let d_out = masked_mse_grad(&out, target)?;
    let fusion = prop.transpose().matmul(&d_out)?;
    let d_cat = adj.matrix().spmm(&d_out.matmul(&fusion_layer.weights.transpose())?)?;

    let mut col = 0;
    let mut branch_grads = Vec::with_capacity(branches.len());
    for (b, (out_b, cache_b, _)) in branches.iter().zip(&runs) {
        let width = out_b.cols();
        let block = d_cat.column_block(col, col + width);
        col += width;
        // Scatter back: a branch row may feed several fusion nodes.
        let mut d_branch = DenseMatrix::zeros(out_b.rows(), width);
        for (i, &r) in b.rows.iter().enumerate() {
            for (g, v) in d_branch.row_mut(r).iter_mut().zip(block.row(i)) {
                *g += v;
            }
        }
        let (grads, _) = backward_from(&b.model, cache_b, &b.adjacency, &d_branch)?;
        branch_grads.push(grads.as_list().into_iter().cloned().collect());
    }
    Ok(FusedGradients {
        loss,
        branches: branch_grads,
        fusion,
    })
}

/// Trains all branches and the fusion layer jointly against one loss on
/// the fused output.
pub fn train_fused(input: FusedTrainInput<'_>) -> Result<FusedOutcome> {
    let FusedTrainInput {
        mut branches,
        fusion_adjacency: adj,
        mut fusion_layer,
        target,
        config,
    } = input;
    config.validate()?;
    if branches.is_empty() {
        return Err(GcnError::NoTargets);
    }
    for b in &branches {
        b.check(adj.dim())?;
    }
    target.validate(adj.dim(), fusion_layer.d_out())?;

    let mut branch_states: Vec<Vec<AdamState>> = branches
        .iter()
        .map(|b| b.model.parameters().into_iter().map(AdamState::for_params).collect())
        .collect();
    let mut fusion_state = AdamState::for_params(&fusion_layer.weights);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let fg = fused_gradients(&branches, adj, &fusion_layer, target)?;
        if !fg.loss.is_finite() {
            return Err(GcnError::Diverged { epoch, loss: fg.loss });
        }
        history.push(EpochRecord {
            epoch,
            lr,
            loss: fg.loss,
        });
        for ((b, grads), states) in branches.iter_mut().zip(&fg.branches).zip(&mut branch_states) {
            for ((p, g), s) in b.model.parameters_mut().into_iter().zip(grads).zip(states.iter_mut()) {
                s.step(p, g, lr)?;
            }
        }
        fusion_state.step(&mut fusion_layer.weights, &fg.fusion, lr)?;
    }
    Ok(FusedOutcome {
        branches,
        fusion_layer,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::init_model;
    use crate::graph::normalize_adjacency;
    use crate::numerics::{finite_difference_grad, max_relative_error, SparseMatrix};

    #[test]
    fn weighted_sum_cases() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[3.0, -1.0]]).unwrap();
        assert_eq!(fuse_weighted_sum(&[a.clone(), b.clone()], &[1.0, 0.0]).unwrap(), a);
        assert_eq!(
            fuse_weighted_sum(&[a.clone(), b.clone()], &[0.0, 0.0]).unwrap(),
            DenseMatrix::zeros(1, 2)
        );
        assert!(fuse_weighted_sum(&[a], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn concat_on_single_node() {
        let adj = normalize_adjacency(&SparseMatrix::zeros(1)).unwrap();
        let x1 = DenseMatrix::from_rows(&[[2.0]]).unwrap();
        let x2 = DenseMatrix::from_rows(&[[5.0]]).unwrap();
        let layer = GcnLayer {
            weights: DenseMatrix::from_rows(&[[3.0], [-1.0]]).unwrap(),
            apply_activation: false,
        };
        assert_eq!(fuse_concat(&[x1, x2], &adj, &layer).unwrap().as_slice(), &[1.0]);
    }

    fn setup() -> (Vec<Branch>, NormalizedAdjacency, GcnLayer, TrainTarget) {
        let a1 = SparseMatrix::from_triplets(3, [(0, 1, 0.9), (1, 0, 0.9), (1, 2, 0.3), (2, 1, 0.3)]).unwrap();
        let a2 = SparseMatrix::from_triplets(4, [(0, 3, 0.5), (3, 0, 0.5), (1, 2, 0.7), (2, 1, 0.7)]).unwrap();
        let n1 = normalize_adjacency(&a1).unwrap();
        let n2 = normalize_adjacency(&a2).unwrap();
        let f1 = DenseMatrix::from_rows(&[[0.4, -0.3], [0.8, 0.5], [-0.2, 0.6]]).unwrap();
        let f2 =
            DenseMatrix::from_rows(&[[0.1, 0.7, 0.3], [0.9, -0.4, 0.2], [0.5, 0.5, -0.6], [0.3, 0.2, 0.8]]).unwrap();
        let branches = vec![
            Branch {
                model: init_model(&[2, 4, 2], 1).unwrap(),
                adjacency: n1.clone(),
                features: f1,
                rows: vec![0, 1, 2],
            },
            Branch {
                model: init_model(&[3, 3], 2).unwrap(),
                adjacency: n2,
                features: f2,
                rows: vec![3, 1, 0],
            },
        ];
        let layer = init_fusion_layer(5, 2, 3);
        let target = TrainTarget::single(vec![0, 2], DenseMatrix::from_rows(&[[0.3, -0.1], [0.2, 0.4]]).unwrap());
        (branches, n1, layer, target)
    }

    #[test]
    fn fused_gradients_match_finite_differences() {
        let (branches, adj, layer, target) = setup();
        let fg = fused_gradients(&branches, &adj, &layer, &target).unwrap();
        let loss_with =
            |bs: &[Branch], l: &GcnLayer| masked_mse(&fused_forward(bs, &adj, l).unwrap(), &target).unwrap();
        let numeric = finite_difference_grad(
            |w| {
                let mut l = layer.clone();
                l.weights = w.clone();
                loss_with(&branches, &l)
            },
            &layer.weights,
            1e-6,
        )
        .unwrap();
        assert!(max_relative_error(&fg.fusion, &numeric, 1e-7).unwrap() < 1e-4);
        for (bi, grads) in fg.branches.iter().enumerate() {
            for (pi, analytic) in grads.iter().enumerate() {
                let numeric = finite_difference_grad(
                    |w| {
                        let mut bs = branches.clone();
                        *bs[bi].model.parameters_mut()[pi] = w.clone();
                        loss_with(&bs, &layer)
                    },
                    branches[bi].model.parameters()[pi],
                    1e-6,
                )
                .unwrap();
                let err = max_relative_error(analytic, &numeric, 1e-7).unwrap();
                assert!(err < 1e-4, "branch {bi} parameter {pi}: {err}");
            }
        }
    }

    #[test]
    fn joint_training_reduces_loss() {
        let (branches, adj, layer, target) = setup();
        let loss0 = masked_mse(&fused_forward(&branches, &adj, &layer).unwrap(), &target).unwrap();
        let cfg = TrainConfig {
            lr0: 0.01,
            epochs: 200,
            ..TrainConfig::default()
        };
        let out = train_fused(FusedTrainInput {
            branches,
            fusion_adjacency: &adj,
            fusion_layer: layer,
            target: &target,
            config: &cfg,
        })
        .unwrap();
        assert_eq!(out.history[0].loss, loss0);
        assert!(out.history.last().unwrap().loss < 0.2 * loss0);
    }
}
