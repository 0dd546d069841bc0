use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Linear,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub width: usize,
    pub activation: Activation,
}

/// Architecture and regularization of a fully-connected network.
///
/// Every hidden layer is `dense → [batch norm] → relu → [dropout]`; the output
/// layer is a dense layer followed by `output_activation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<HiddenLayer>,
    pub output_dim: usize,
    pub output_activation: OutputActivation,
    pub batch_norm_hidden: bool,
    pub dropout_rate: f32,
    pub l2_lambda: f32,
}

impl MlpSpec {
    /// ReLU stack with batch norm on every hidden layer, no dropout, no L2.
    pub fn new(
        input_dim: usize,
        widths: &[usize],
        output_dim: usize,
        output_activation: OutputActivation,
    ) -> Self {
        Self {
            input_dim,
            hidden: widths
                .iter()
                .map(|&width| HiddenLayer {
                    width,
                    activation: Activation::Relu,
                })
                .collect(),
            output_dim,
            output_activation,
            batch_norm_hidden: true,
            dropout_rate: 0.0,
            l2_lambda: 0.0,
        }
    }

    /// Force regressor: flattened `rows × cols` image to a normalized 3-D force.
    pub fn force(rows: usize, cols: usize, widths: &[usize]) -> Self {
        Self::new(rows * cols, widths, 3, OutputActivation::Linear)
    }

    /// Terrain classifier: MFCC vector to class probabilities.
    pub fn terrain(n_mfcc: usize, widths: &[usize], n_classes: usize) -> Self {
        Self::new(n_mfcc, widths, n_classes, OutputActivation::Softmax)
    }

    pub fn with_batch_norm(mut self, on: bool) -> Self {
        self.batch_norm_hidden = on;
        self
    }

    pub fn with_dropout(mut self, rate: f32) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn with_l2(mut self, lambda: f32) -> Self {
        self.l2_lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config(format!(
                "input and output dims must be >= 1 (got {} and {})",
                self.input_dim, self.output_dim
            )));
        }
        if let Some(i) = self.hidden.iter().position(|h| h.width == 0) {
            return Err(Error::Config(format!("hidden layer {i} has width 0")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Config(format!(
                "l2 lambda {} must be finite and non-negative",
                self.l2_lambda
            )));
        }
        Ok(())
    }

    /// Layer widths from input to output, e.g. `[1350, 16, 128, 3]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.hidden.iter().map(|h| h.width))
            .chain(std::iter::once(self.output_dim))
            .collect()
    }

    /// Number of stored parameters, including batch-norm moving statistics.
    pub fn param_count(&self) -> usize {
        param_count(self)
    }

    /// Multiply-add FLOPs of one inference pass, `2 · Σ in·out`.
    pub fn flops(&self) -> u64 {
        self.layer_dims()
            .windows(2)
            .map(|w| 2 * (w[0] * w[1]) as u64)
            .sum()
    }
}

/// Closed-form parameter count.
///
/// Each dense layer holds `in·out + out` values; each batch-normalized hidden
/// layer adds gamma, beta, moving mean and moving variance (`4·width`).
pub fn param_count(spec: &MlpSpec) -> usize {
    let dense: usize = spec
        .layer_dims()
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum();
    let norm: usize = if spec.batch_norm_hidden {
        spec.hidden.iter().map(|h| 4 * h.width).sum()
    } else {
        0
    };
    dense + norm
}
