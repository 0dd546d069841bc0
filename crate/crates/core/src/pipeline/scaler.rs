use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-axis force normalization: `normalized = newtons / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceScaler {
    pub scale: [f32; 3],
}

impl Default for ForceScaler {
    /// Largest absolute ground-truth force per axis: 75, 92 and 133 N.
    fn default() -> Self {
        Self {
            scale: [75.0, 92.0, 133.0],
        }
    }
}

impl ForceScaler {
    pub fn new(scale: [f32; 3]) -> Result<Self> {
        if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Validation(format!(
                "force scales must be positive and finite, got {scale:?}"
            )));
        }
        Ok(Self { scale })
    }

    /// Scaler for inclusive per-axis ranges: max absolute bound per axis.
    pub fn from_ranges(ranges: &[(f64, f64); 3]) -> Result<Self> {
        Self::new(ranges.map(|(lo, hi)| lo.abs().max(hi.abs()) as f32))
    }

    pub fn normalize(&self, force_n: [f32; 3]) -> [f32; 3] {
        [0, 1, 2].map(|i| force_n[i] / self.scale[i])
    }

    pub fn denormalize(&self, normalized: [f32; 3]) -> [f32; 3] {
        [0, 1, 2].map(|i| normalized[i] * self.scale[i])
    }
}
