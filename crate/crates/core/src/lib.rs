//! On-edge sensing toolkit for a sensorized robot paw.
//!
//! Two inference channels share one tiny fully-connected network engine:
//!
//! - **force**: a 240×160 grayscale view of the deforming sole is resized to
//!   45×30 (nearest neighbour), flattened and regressed to a normalized 3-D
//!   contact force;
//! - **terrain**: a one-second impact recording is cut to its 62.5 ms energy
//!   peak, reduced to a 13-coefficient MFCC vector and classified into six
//!   terrain classes.
//!
//! [`pawsim`] stands in for the physical test rig with deterministic
//! synthetic generators, [`pipeline`] holds the training and evaluation
//! methodology, and [`modelstore`] serializes models and audits them against
//! the microcontroller's RAM budget.

pub mod dsp;
pub mod error;
pub mod imaging;
pub mod modelstore;
pub mod nncore;
pub mod pawsim;
pub mod pipeline;

pub use error::{Error, Result};
