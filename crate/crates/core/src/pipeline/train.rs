use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nncore::{AdamState, Loss, Matrix2D, MlpParams, Mode};
use crate::pawsim::derive_seed;
use crate::{Error, Result};

/// Optimizer and schedule settings shared by both training loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Seed of the weight initialization for a training seed.
pub(crate) fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, 0)
}

/// Shuffled mini-batches of `0..n`. A trailing single-sample batch is merged
/// into its predecessor when batch statistics need two rows.
pub(crate) fn batches(
    n: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    merge_singleton: bool,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if merge_singleton && out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

/// Runs mini-batch Adam for `config.epochs` epochs and calls `after_epoch`
/// with the epoch number and current parameters after every epoch.
pub(crate) fn fit<F>(
    params: &mut MlpParams,
    inputs: &Matrix2D,
    targets: &Matrix2D,
    loss: Loss,
    config: &TrainConfig,
    seed: u64,
    mut after_epoch: F,
) -> Result<()>
where
    F: FnMut(usize, &MlpParams) -> Result<()>,
{
    config.validate()?;
    if inputs.rows() != targets.rows() {
        return Err(Error::Dimension(format!(
            "{} inputs but {} targets",
            inputs.rows(),
            targets.rows()
        )));
    }
    if inputs.rows() == 0 {
        return Err(Error::Validation("empty training set".into()));
    }
    let mut adam = AdamState::with_betas(
        params,
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
    );
    let merge = params.spec.batch_norm_hidden && !params.spec.hidden.is_empty();
    if merge && inputs.rows() < 2 {
        return Err(Error::Validation(
            "batch normalization needs at least two training samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let dropout_master = derive_seed(seed, 2);
    let mut step = 0u64;
    for epoch in 0..config.epochs {
        for batch in batches(inputs.rows(), config.batch_size, &mut rng, merge) {
            let x = inputs.select_rows(&batch);
            let y = targets.select_rows(&batch);
            let mode = Mode::Train {
                seed: derive_seed(dropout_master, step),
            };
            let bp = params.backward(&x, &y, loss, mode).map_err(|e| match e {
                Error::Numeric(reason) => Error::Training { epoch, reason },
                other => other,
            })?;
            if !bp.loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: format!("loss became {}", bp.loss),
                });
            }
            adam.apply(params, &bp.grads)?;
            params.update_moving_stats(&bp.trace);
            step += 1;
        }
        if params
            .tensors()
            .iter()
            .any(|t| t.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Training {
                epoch,
                reason: "parameters became non-finite".into(),
            });
        }
        after_epoch(epoch, params)?;
    }
    Ok(())
}
