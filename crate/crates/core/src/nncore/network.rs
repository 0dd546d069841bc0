use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{Matrix, Scalar};
use super::params::{Gradients, MlpParams};
use super::spec::OutputActivation;
use crate::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the previous moving statistic in each update.
pub const BN_MOMENTUM: f64 = 0.99;

/// Forward-pass mode.
///
/// Training uses batch statistics and applies dropout with a mask drawn from
/// `seed`, so a training pass is still a deterministic function of its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Infer,
    Train { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mae,
    CrossEntropy,
}

#[derive(Debug, Clone)]
struct NormTrace<T> {
    x_hat: Matrix<T>,
    inv_std: Vec<T>,
    /// Present in training mode only.
    batch_stats: Option<(Vec<T>, Vec<T>)>,
}

#[derive(Debug, Clone)]
struct HiddenTrace<T> {
    input: Matrix<T>,
    norm: Option<NormTrace<T>>,
    pre_act: Matrix<T>,
    keep: Option<Matrix<T>>,
}

/// Intermediate values of one forward pass, consumed by backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T = f32> {
    hidden: Vec<HiddenTrace<T>>,
    last_input: Matrix<T>,
    logits: Matrix<T>,
    output: Matrix<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    pub fn into_output(self) -> Matrix<T> {
        self.output
    }

    /// Smallest `|x|` over all ReLU inputs; distance to the nearest kink.
    pub fn relu_margin(&self) -> T {
        self.hidden
            .iter()
            .flat_map(|h| h.pre_act.as_slice().iter())
            .fold(T::infinity(), |m, v| m.min(v.abs()))
    }
}

/// Loss value and parameter gradients of one batch.
#[derive(Debug, Clone)]
pub struct Backprop<T = f32> {
    pub loss: T,
    pub grads: Gradients<T>,
    pub trace: ForwardTrace<T>,
}

fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

fn add_bias<T: Scalar>(z: &mut Matrix<T>, bias: &[T]) {
    for r in 0..z.rows() {
        for (v, &b) in z.row_mut(r).iter_mut().zip(bias) {
            *v = *v + b;
        }
    }
}

impl<T: Scalar> MlpParams<T> {
    /// Runs the network on a batch (one sample per row).
    pub fn forward(&self, batch: &Matrix<T>, mode: Mode) -> Result<Matrix<T>> {
        Ok(self.trace(batch, mode)?.output)
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.forward(batch, Mode::Infer)
    }

    /// Forward pass that keeps every intermediate needed by [`MlpParams::backward`].
    pub fn trace(&self, batch: &Matrix<T>, mode: Mode) -> Result<ForwardTrace<T>> {
        let spec = &self.spec;
        if batch.cols() != spec.input_dim {
            return Err(Error::Dimension(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                spec.input_dim
            )));
        }
        if !batch.is_finite() {
            return Err(Error::Numeric(
                "input batch contains NaN or infinity".into(),
            ));
        }
        let train = matches!(mode, Mode::Train { .. });
        if train && spec.batch_norm_hidden && batch.rows() < 2 {
            return Err(Error::Validation(
                "training-mode batch norm needs at least 2 samples per batch".into(),
            ));
        }
        let mut rng = match mode {
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Mode::Infer => None,
        };
        let eps = T::lit(BN_EPSILON);
        let n = T::from_usize(batch.rows()).unwrap();

        let mut hidden = Vec::with_capacity(spec.hidden.len());
        let mut x = batch.clone();
        for l in 0..spec.hidden.len() {
            let dense = &self.dense[l];
            let mut z = x.matmul(&dense.weights)?;
            add_bias(&mut z, &dense.bias);

            let norm = if spec.batch_norm_hidden {
                let bn = &self.norms[l];
                let width = z.cols();
                let (mean, var) = if train {
                    let mean: Vec<T> = z.sum_rows().into_iter().map(|s| s / n).collect();
                    let mut var = vec![T::zero(); width];
                    for row in z.iter_rows() {
                        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                            *v = *v + (x - m) * (x - m);
                        }
                    }
                    var.iter_mut().for_each(|v| *v = *v / n);
                    (mean, var)
                } else {
                    (bn.moving_mean.clone(), bn.moving_var.clone())
                };
                let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
                let mut x_hat = z.clone();
                for r in 0..z.rows() {
                    let (xr, zr) = (x_hat.row_mut(r), z.row_mut(r));
                    for j in 0..width {
                        xr[j] = (xr[j] - mean[j]) * inv_std[j];
                        zr[j] = bn.gamma[j] * xr[j] + bn.beta[j];
                    }
                }
                Some(NormTrace {
                    x_hat,
                    inv_std,
                    batch_stats: train.then_some((mean, var)),
                })
            } else {
                None
            };

            let pre_act = z;
            let mut a = pre_act.clone();
            a.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = v.max(T::zero()));

            let keep = match rng.as_mut() {
                Some(rng) if spec.dropout_rate > 0.0 => {
                    let p = spec.dropout_rate as f64;
                    let scale = T::lit(1.0 / (1.0 - p));
                    let mut mask = Matrix::zeros(a.rows(), a.cols());
                    for m in mask.as_mut_slice() {
                        if rng.random::<f64>() >= p {
                            *m = scale;
                        }
                    }
                    for (v, &m) in a.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                        *v = *v * m;
                    }
                    Some(mask)
                }
                _ => None,
            };

            hidden.push(HiddenTrace {
                input: x,
                norm,
                pre_act,
                keep,
            });
            x = a;
        }

        let out_layer = self.dense.last().expect("at least one dense layer");
        let mut logits = x.matmul(&out_layer.weights)?;
        add_bias(&mut logits, &out_layer.bias);
        let output = match spec.output_activation {
            OutputActivation::Linear => logits.clone(),
            OutputActivation::Softmax => softmax_rows(&logits),
        };
        if !output.is_finite() {
            return Err(Error::Numeric("network output is not finite".into()));
        }
        Ok(ForwardTrace {
            hidden,
            last_input: x,
            logits,
            output,
        })
    }

    /// Loss and gradients of `loss` over the batch, L2 term included.
    ///
    /// The L2 penalty `λ/2 · Σ w²` covers dense weights only, so its gradient is
    /// `λ·w` on weights and nothing on biases or batch-norm parameters.
    pub fn backward(
        &self,
        batch: &Matrix<T>,
        targets: &Matrix<T>,
        loss: Loss,
        mode: Mode,
    ) -> Result<Backprop<T>> {
        let spec = &self.spec;
        if targets.shape() != (batch.rows(), spec.output_dim) {
            return Err(Error::Dimension(format!(
                "targets are {:?}, expected ({}, {})",
                targets.shape(),
                batch.rows(),
                spec.output_dim
            )));
        }
        if batch.rows() == 0 {
            return Err(Error::Validation("empty batch".into()));
        }
        if !targets.is_finite() {
            return Err(Error::Numeric("targets contain NaN or infinity".into()));
        }
        if loss == Loss::CrossEntropy {
            if spec.output_activation != OutputActivation::Softmax {
                return Err(Error::Validation(
                    "cross-entropy needs a softmax output layer".into(),
                ));
            }
            let tol = T::lit(1e-5);
            for (i, row) in targets.iter_rows().enumerate() {
                let sum: T = row.iter().copied().sum();
                if row.iter().any(|&t| t < T::zero()) || (sum - T::one()).abs() > tol {
                    return Err(Error::Validation(format!(
                        "cross-entropy target row {i} is not a probability vector"
                    )));
                }
            }
        }

        let trace = self.trace(batch, mode)?;
        let rows = batch.rows();
        let n = T::from_usize(rows).unwrap();
        let out = &trace.output;

        let (mut loss_value, d_logits) = match loss {
            Loss::Mae => {
                let count = T::from_usize(rows * spec.output_dim).unwrap();
                let mut total = T::zero();
                let mut d_out = Matrix::zeros(rows, spec.output_dim);
                for ((d, &o), &t) in d_out
                    .as_mut_slice()
                    .iter_mut()
                    .zip(out.as_slice())
                    .zip(targets.as_slice())
                {
                    let r = o - t;
                    total = total + r.abs();
                    // subgradient 0 at r == 0
                    *d = if r > T::zero() {
                        T::one() / count
                    } else if r < T::zero() {
                        -T::one() / count
                    } else {
                        T::zero()
                    };
                }
                let d_logits = match spec.output_activation {
                    OutputActivation::Linear => d_out,
                    OutputActivation::Softmax => {
                        let mut dz = d_out;
                        for r in 0..rows {
                            let p = out.row(r);
                            let dot: T = dz.row(r).iter().zip(p).map(|(&g, &q)| g * q).sum();
                            for (g, &q) in dz.row_mut(r).iter_mut().zip(p) {
                                *g = q * (*g - dot);
                            }
                        }
                        dz
                    }
                };
                (total / count, d_logits)
            }
            Loss::CrossEntropy => {
                let mut total = T::zero();
                let mut dz = Matrix::zeros(rows, spec.output_dim);
                for r in 0..rows {
                    let z = trace.logits.row(r);
                    let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                    let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
                    for (j, (&zj, &tj)) in z.iter().zip(targets.row(r)).enumerate() {
                        if tj > T::zero() {
                            total = total - tj * (zj - lse);
                        }
                        dz.set(r, j, (out.get(r, j) - tj) / n);
                    }
                }
                (total / n, dz)
            }
        };

        let mut grads = Gradients::zeros_like(self);
        let out_idx = self.dense.len() - 1;
        grads.dense[out_idx].weights = trace.last_input.t_matmul(&d_logits)?;
        grads.dense[out_idx].bias = d_logits.sum_rows();
        let mut d = d_logits.matmul_t(&self.dense[out_idx].weights)?;

        for l in (0..trace.hidden.len()).rev() {
            let h = &trace.hidden[l];
            if let Some(keep) = &h.keep {
                for (g, &k) in d.as_mut_slice().iter_mut().zip(keep.as_slice()) {
                    *g = *g * k;
                }
            }
            for (g, &z) in d.as_mut_slice().iter_mut().zip(h.pre_act.as_slice()) {
                if z <= T::zero() {
                    *g = T::zero();
                }
            }
            let dz = match &h.norm {
                Some(norm) => {
                    let gamma = &self.norms[l].gamma;
                    let width = d.cols();
                    let mut d_gamma = vec![T::zero(); width];
                    let mut d_beta = vec![T::zero(); width];
                    let mut d_xhat = d.clone();
                    for r in 0..rows {
                        let xr = norm.x_hat.row(r);
                        let gr = d_xhat.row_mut(r);
                        for j in 0..width {
                            d_gamma[j] = d_gamma[j] + gr[j] * xr[j];
                            d_beta[j] = d_beta[j] + gr[j];
                            gr[j] = gr[j] * gamma[j];
                        }
                    }
                    grads.norms[l] = (d_gamma, d_beta);
                    let mut dz = d_xhat.clone();
                    if norm.batch_stats.is_some() {
                        let sum_dx = d_xhat.sum_rows();
                        let mut sum_dx_x = vec![T::zero(); width];
                        for r in 0..rows {
                            for ((s, &g), &x) in sum_dx_x
                                .iter_mut()
                                .zip(d_xhat.row(r))
                                .zip(norm.x_hat.row(r))
                            {
                                *s = *s + g * x;
                            }
                        }
                        for r in 0..rows {
                            let xr = norm.x_hat.row(r);
                            let zr = dz.row_mut(r);
                            for j in 0..width {
                                zr[j] = norm.inv_std[j] / n
                                    * (n * zr[j] - sum_dx[j] - xr[j] * sum_dx_x[j]);
                            }
                        }
                    } else {
                        for r in 0..rows {
                            for (g, &s) in dz.row_mut(r).iter_mut().zip(&norm.inv_std) {
                                *g = *g * s;
                            }
                        }
                    }
                    dz
                }
                None => d.clone(),
            };
            grads.dense[l].weights = h.input.t_matmul(&dz)?;
            grads.dense[l].bias = dz.sum_rows();
            if l > 0 {
                d = dz.matmul_t(&self.dense[l].weights)?;
            }
        }

        if spec.l2_lambda > 0.0 {
            let lambda = T::lit(spec.l2_lambda as f64);
            let half = T::lit(0.5);
            for (g, p) in grads.dense.iter_mut().zip(&self.dense) {
                let w = p.weights.as_slice();
                loss_value = loss_value + half * lambda * w.iter().map(|&v| v * v).sum::<T>();
                for (gv, &wv) in g.weights.as_mut_slice().iter_mut().zip(w) {
                    *gv = *gv + lambda * wv;
                }
            }
        }

        if !loss_value.is_finite() {
            return Err(Error::Numeric("loss is not finite".into()));
        }
        Ok(Backprop {
            loss: loss_value,
            grads,
            trace,
        })
    }

    /// Folds the batch statistics of a training-mode trace into the moving
    /// mean and variance.
    pub fn update_moving_stats(&mut self, trace: &ForwardTrace<T>) {
        let momentum = T::lit(BN_MOMENTUM);
        let rest = T::one() - momentum;
        for (bn, h) in self.norms.iter_mut().zip(&trace.hidden) {
            let Some((mean, var)) = h.norm.as_ref().and_then(|n| n.batch_stats.as_ref()) else {
                continue;
            };
            for (m, &b) in bn.moving_mean.iter_mut().zip(mean) {
                *m = momentum * *m + rest * b;
            }
            for (v, &b) in bn.moving_var.iter_mut().zip(var) {
                *v = momentum * *v + rest * b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{init_params, MlpSpec};

    fn linear_identity(n: usize) -> MlpParams<f64> {
        let spec = MlpSpec::new(n, &[], n, OutputActivation::Linear).with_batch_norm(false);
        let mut p: MlpParams<f64> = init_params(&spec, 0).unwrap();
        p.dense[0].weights = Matrix::identity(n);
        p
    }

    #[test]
    fn identity_network_passes_input_through() {
        let p = linear_identity(4);
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.5, 0.0], [0.25, 8.0, -1.0, 2.0]]).unwrap();
        assert_eq!(p.predict(&x).unwrap(), x);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let spec = MlpSpec::terrain(3, &[], 6).with_batch_norm(false);
        let mut p: MlpParams = init_params(&spec, 0).unwrap();
        p.dense[0].weights = Matrix::zeros(3, 6);
        let out = p
            .predict(&Matrix::from_rows(&[[0.3, -1.0, 4.0]]).unwrap())
            .unwrap();
        for &v in out.as_slice() {
            assert!((v - 1.0 / 6.0).abs() < 1e-7);
        }
    }

    #[test]
    fn identity_batch_norm_in_inference() {
        let spec = MlpSpec::new(3, &[3], 3, OutputActivation::Linear);
        let mut p: MlpParams<f64> = init_params(&spec, 0).unwrap();
        p.dense[0].weights = Matrix::identity(3);
        p.dense[1].weights = Matrix::identity(3);
        let x = Matrix::from_rows(&[[0.5, 2.0, 7.0]]).unwrap();
        let y = p.predict(&x).unwrap();
        let scale = 1.0 / (1.0 + BN_EPSILON).sqrt();
        for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b * scale).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_batches() {
        let spec = MlpSpec::terrain(13, &[16, 16], 6);
        let p: MlpParams = init_params(&spec, 0).unwrap();
        assert!(matches!(
            p.predict(&Matrix::zeros(2, 12)),
            Err(Error::Dimension(_))
        ));
        let mut bad = Matrix::zeros(2, 13);
        bad.set(1, 3, f32::NAN);
        assert!(matches!(p.predict(&bad), Err(Error::Numeric(_))));
        assert!(matches!(
            p.forward(&Matrix::zeros(1, 13), Mode::Train { seed: 0 }),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn zero_unit_has_zero_loss_and_grads() {
        let spec = MlpSpec::new(1, &[], 1, OutputActivation::Linear).with_batch_norm(false);
        let mut p: MlpParams<f64> = init_params(&spec, 0).unwrap();
        p.dense[0].weights = Matrix::zeros(1, 1);
        let zero = Matrix::zeros(1, 1);
        let bp = p.backward(&zero, &zero, Loss::Mae, Mode::Infer).unwrap();
        assert_eq!(bp.loss, 0.0);
        assert!(bp
            .grads
            .tensors()
            .iter()
            .all(|t| t.iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn uniform_prediction_cross_entropy_is_ln6() {
        let spec = MlpSpec::terrain(2, &[], 6).with_batch_norm(false);
        let mut p: MlpParams<f64> = init_params(&spec, 0).unwrap();
        p.dense[0].weights = Matrix::zeros(2, 6);
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let t = Matrix::from_rows(&[[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]]).unwrap();
        let bp = p.backward(&x, &t, Loss::CrossEntropy, Mode::Infer).unwrap();
        assert!((bp.loss - 6f64.ln()).abs() < 1e-12);
        assert!((bp.loss - 1.7918).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_target_validation() {
        let spec = MlpSpec::terrain(2, &[], 3).with_batch_norm(false);
        let p: MlpParams = init_params(&spec, 0).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let t = Matrix::from_rows(&[[0.5, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            p.backward(&x, &t, Loss::CrossEntropy, Mode::Infer),
            Err(Error::Validation(_))
        ));
        let lin: MlpParams =
            init_params(&MlpSpec::new(2, &[], 3, OutputActivation::Linear), 0).unwrap();
        let onehot = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        assert!(lin
            .backward(&x, &onehot, Loss::CrossEntropy, Mode::Infer)
            .is_err());
        assert!(matches!(
            p.backward(&x, &Matrix::zeros(2, 3), Loss::Mae, Mode::Infer),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn moving_stats_track_batches() {
        let spec = MlpSpec::new(2, &[2], 1, OutputActivation::Linear);
        let mut p: MlpParams<f64> = init_params(&spec, 0).unwrap();
        p.dense[0].weights = Matrix::identity(2);
        let x = Matrix::from_rows(&[[1.0, 4.0], [3.0, 8.0]]).unwrap();
        let trace = p.trace(&x, Mode::Train { seed: 1 }).unwrap();
        p.update_moving_stats(&trace);
        let bn = &p.norms[0];
        assert!((bn.moving_mean[0] - 0.01 * 2.0).abs() < 1e-12);
        assert!((bn.moving_mean[1] - 0.01 * 6.0).abs() < 1e-12);
        assert!((bn.moving_var[0] - (0.99 + 0.01 * 1.0)).abs() < 1e-12);
        assert!((bn.moving_var[1] - (0.99 + 0.01 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn dropout_is_train_only_and_seeded() {
        let spec = MlpSpec::new(8, &[32], 2, OutputActivation::Linear).with_dropout(0.5);
        let p: MlpParams = init_params(&spec, 5).unwrap();
        let x = Matrix::from_vec(4, 8, (0..32).map(|i| i as f32 / 10.0).collect()).unwrap();
        let a = p.forward(&x, Mode::Train { seed: 9 }).unwrap();
        let b = p.forward(&x, Mode::Train { seed: 9 }).unwrap();
        let c = p.forward(&x, Mode::Train { seed: 10 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(p.predict(&x).unwrap(), p.predict(&x).unwrap());
    }
}
