use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{Matrix, Scalar};
use super::spec::MlpSpec;
use crate::{Error, Result};

/// Affine layer `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T = f32> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

/// Per-feature batch normalization state of one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub moving_mean: Vec<T>,
    pub moving_var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    fn identity(width: usize) -> Self {
        Self {
            gamma: vec![T::one(); width],
            beta: vec![T::zero(); width],
            moving_mean: vec![T::zero(); width],
            moving_var: vec![T::one(); width],
        }
    }
}

/// Weights and normalization state of an [`MlpSpec`] network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T = f32> {
    pub spec: MlpSpec,
    /// One entry per hidden layer followed by the output layer.
    pub dense: Vec<Dense<T>>,
    /// One entry per hidden layer when `spec.batch_norm_hidden`, else empty.
    pub norms: Vec<BatchNorm<T>>,
}

/// Gradients of the trainable parameters, shaped like [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub dense: Vec<Dense<T>>,
    /// `(d gamma, d beta)` per batch-normalized layer.
    pub norms: Vec<(Vec<T>, Vec<T>)>,
}

/// Deterministic initialization.
///
/// Hidden layers use He-uniform weights (bound `√(6/fan_in)`), the output layer
/// Glorot-uniform (bound `√(6/(fan_in+fan_out))`). Biases start at zero and
/// batch norm at the identity transform.
pub fn init_params<T: Scalar>(spec: &MlpSpec, seed: u64) -> Result<MlpParams<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = spec.layer_dims();
    let n_layers = dims.len() - 1;
    let mut dense = Vec::with_capacity(n_layers);
    for (i, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = if i + 1 == n_layers {
            (6.0 / (fan_in + fan_out) as f64).sqrt()
        } else {
            (6.0 / fan_in as f64).sqrt()
        };
        let data = (0..fan_in * fan_out)
            .map(|_| T::lit(rng.random_range(-bound..bound)))
            .collect();
        dense.push(Dense {
            weights: Matrix::from_vec(fan_in, fan_out, data)?,
            bias: vec![T::zero(); fan_out],
        });
    }
    let norms = if spec.batch_norm_hidden {
        spec.hidden
            .iter()
            .map(|h| BatchNorm::identity(h.width))
            .collect()
    } else {
        Vec::new()
    };
    Ok(MlpParams {
        spec: spec.clone(),
        dense,
        norms,
    })
}

impl<T: Scalar> MlpParams<T> {
    /// Number of stored values (all weights, biases and batch-norm vectors).
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// All stored tensors in serialization order: each dense layer's weights
    /// (row-major `in × out`) then bias, then each batch-norm layer's gamma,
    /// beta, moving mean and moving variance.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.dense.len() + 4 * self.norms.len());
        for d in &self.dense {
            out.push(d.weights.as_slice());
            out.push(d.bias.as_slice());
        }
        for n in &self.norms {
            out.push(n.gamma.as_slice());
            out.push(n.beta.as_slice());
            out.push(n.moving_mean.as_slice());
            out.push(n.moving_var.as_slice());
        }
        out
    }

    /// Mutable counterpart of [`MlpParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.dense.len() + 4 * self.norms.len());
        for d in &mut self.dense {
            out.push(d.weights.as_mut_slice());
            out.push(d.bias.as_mut_slice());
        }
        for n in &mut self.norms {
            out.push(n.gamma.as_mut_slice());
            out.push(n.beta.as_mut_slice());
            out.push(n.moving_mean.as_mut_slice());
            out.push(n.moving_var.as_mut_slice());
        }
        out
    }

    /// Trainable tensors in [`Gradients::tensors`] order.
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.dense.len() + 2 * self.norms.len());
        for d in &mut self.dense {
            out.push(d.weights.as_mut_slice());
            out.push(d.bias.as_mut_slice());
        }
        for n in &mut self.norms {
            out.push(n.gamma.as_mut_slice());
            out.push(n.beta.as_mut_slice());
        }
        out
    }

    /// Checks that every tensor matches the shape implied by `spec`.
    pub fn check_shapes(&self) -> Result<()> {
        let dims = self.spec.layer_dims();
        if self.dense.len() != dims.len() - 1 {
            return Err(Error::Dimension(format!(
                "{} dense layers for a spec with {}",
                self.dense.len(),
                dims.len() - 1
            )));
        }
        for (i, (d, w)) in self.dense.iter().zip(dims.windows(2)).enumerate() {
            if d.weights.shape() != (w[0], w[1]) || d.bias.len() != w[1] {
                return Err(Error::Dimension(format!(
                    "dense layer {i}: weights {:?}, bias {}; expected ({}, {})",
                    d.weights.shape(),
                    d.bias.len(),
                    w[0],
                    w[1]
                )));
            }
        }
        let expected_norms = if self.spec.batch_norm_hidden {
            self.spec.hidden.len()
        } else {
            0
        };
        if self.norms.len() != expected_norms {
            return Err(Error::Dimension(format!(
                "{} batch-norm layers, expected {expected_norms}",
                self.norms.len()
            )));
        }
        for (i, (n, h)) in self.norms.iter().zip(&self.spec.hidden).enumerate() {
            let w = h.width;
            if [&n.gamma, &n.beta, &n.moving_mean, &n.moving_var]
                .iter()
                .any(|v| v.len() != w)
            {
                return Err(Error::Dimension(format!(
                    "batch-norm layer {i} vectors must all have length {w}"
                )));
            }
            if n.moving_var.iter().any(|&v| v < T::zero()) {
                return Err(Error::Validation(format!(
                    "batch-norm layer {i} has a negative moving variance"
                )));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> MlpParams<U> {
        let conv = |v: &[T]| -> Vec<U> { v.iter().map(|x| U::from(*x).unwrap()).collect() };
        MlpParams {
            spec: self.spec.clone(),
            dense: self
                .dense
                .iter()
                .map(|d| Dense {
                    weights: d.weights.cast(),
                    bias: conv(&d.bias),
                })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| BatchNorm {
                    gamma: conv(&n.gamma),
                    beta: conv(&n.beta),
                    moving_mean: conv(&n.moving_mean),
                    moving_var: conv(&n.moving_var),
                })
                .collect(),
        }
    }
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &MlpParams<T>) -> Self {
        Self {
            dense: params
                .dense
                .iter()
                .map(|d| Dense {
                    weights: Matrix::zeros(d.weights.rows(), d.weights.cols()),
                    bias: vec![T::zero(); d.bias.len()],
                })
                .collect(),
            norms: params
                .norms
                .iter()
                .map(|n| {
                    (
                        vec![T::zero(); n.gamma.len()],
                        vec![T::zero(); n.gamma.len()],
                    )
                })
                .collect(),
        }
    }

    /// Gradient tensors in [`MlpParams::trainable_mut`] order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.dense.len() + 2 * self.norms.len());
        for d in &self.dense {
            out.push(d.weights.as_slice());
            out.push(d.bias.as_slice());
        }
        for (g, b) in &self.norms {
            out.push(g.as_slice());
            out.push(b.as_slice());
        }
        out
    }
}
