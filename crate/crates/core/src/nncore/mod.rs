//! Fully-connected network engine: inference, manual backpropagation, Adam,
//! and hidden-layer batch normalization.
//!
//! Parameters are `f32` for storage and training; every type is generic over
//! [`Scalar`] so gradients can be checked in `f64`.

mod adam;
mod matrix;
mod network;
mod params;
mod spec;

pub use adam::{adam_step, AdamState};
pub use matrix::{Matrix, Matrix2D, Scalar};
pub use network::{Backprop, ForwardTrace, Loss, Mode, BN_EPSILON, BN_MOMENTUM};
pub use params::{init_params, BatchNorm, Dense, Gradients, MlpParams};
pub use spec::{param_count, Activation, HiddenLayer, MlpSpec, OutputActivation};
