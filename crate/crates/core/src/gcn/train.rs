use super::forward::{backward, forward, masked_mse};
use super::{GcnError, GcnModel, Result, TrainTarget};
use crate::graph::NormalizedAdjacency;
use crate::numerics::{AdamState, DenseMatrix};

/// Learning rate used for few-shot training on UCF101.
pub const FEW_SHOT_UCF101_LR: f64 = 0.00005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Multiplier applied once every `decay_every` epochs.
    pub decay_rate: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.001,
            decay_rate: 0.999,
            decay_every: 100,
            epochs: 3000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(GcnError::InvalidConfig(format!(
                "lr0 must be positive, got {}",
                self.lr0
            )));
        }
        if self.epochs == 0 {
            return Err(GcnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.decay_every == 0 {
            return Err(GcnError::InvalidConfig("decay_every must be at least 1".into()));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(GcnError::InvalidConfig(format!(
                "decay_rate must lie in (0, 1], got {}",
                self.decay_rate
            )));
        }
        Ok(())
    }

    /// Step schedule: `lr0 · decay_rate^⌊epoch / decay_every⌋`, epochs
    /// counted from 0.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay_rate.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Loss of the forward pass that this epoch's update was computed from.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GcnModel,
    pub history: Vec<EpochRecord>,
}

/// Full-batch training: forward, masked MSE, backward and one Adam step
/// per parameter matrix each epoch.
pub fn train(
    mut model: GcnModel,
    adj: &NormalizedAdjacency,
    features: &DenseMatrix,
    target: &TrainTarget,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    target.validate(adj.dim(), model.d_out())?;
    let mut states: Vec<AdamState> = model.parameters().into_iter().map(AdamState::for_params).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let (out, cache) = forward(&model, adj, features)?;
        let loss = masked_mse(&out, target)?;
        if !loss.is_finite() {
            return Err(GcnError::Diverged { epoch, loss });
        }
        history.push(EpochRecord { epoch, lr, loss });
        let grads = backward(&model, &cache, &out, adj, target)?;
        let grads: Vec<DenseMatrix> = grads.as_list().into_iter().cloned().collect();
        for ((p, g), s) in model.parameters_mut().into_iter().zip(&grads).zip(&mut states) {
            s.step(p, g, lr)?;
        }
    }
    Ok(TrainOutcome { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::init_model;
    use crate::graph::normalize_adjacency;
    use crate::numerics::SparseMatrix;

    #[test]
    fn schedule_steps_every_hundred() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 0.001);
        assert_eq!(c.lr_at(99), 0.001);
        assert!((c.lr_at(250) - 0.001 * 0.999 * 0.999).abs() < 1e-18);
    }

    #[test]
    fn zero_epochs_rejected() {
        let c = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(GcnError::InvalidConfig(_))));
    }

    #[test]
    fn loss_decreases_and_replays() {
        let a = SparseMatrix::from_triplets(3, [(0, 1, 0.8), (1, 0, 0.8), (1, 2, 0.5), (2, 1, 0.5)]).unwrap();
        let adj = normalize_adjacency(&a).unwrap();
        let f = DenseMatrix::from_rows(&[[1.0, 0.2], [0.1, 1.0], [0.6, 0.6]]).unwrap();
        let t = TrainTarget::single(
            vec![0, 1],
            DenseMatrix::from_rows(&[[0.5, -0.5, 1.0], [0.0, 0.3, -0.2]]).unwrap(),
        );
        let cfg = TrainConfig {
            lr0: 0.02,
            epochs: 1000,
            ..TrainConfig::default()
        };
        let run = || train(init_model(&[2, 8, 3], 4).unwrap(), &adj, &f, &t, &cfg).unwrap();
        let a = run();
        let b = run();
        assert!(
            a.history.last().unwrap().loss < 0.1 * a.history[0].loss,
            "{} vs {}",
            a.history.last().unwrap().loss,
            a.history[0].loss
        );
        let bits = |h: &[EpochRecord]| h.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.history), bits(&b.history));
        assert_eq!(a.model, b.model);
    }
}
