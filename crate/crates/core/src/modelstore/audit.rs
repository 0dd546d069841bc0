use serde::{Deserialize, Serialize};

use super::bench::LatencyStats;
use super::format::ModelManifest;

/// RAM available to the model on the target microcontroller, in bytes.
pub const DEFAULT_RAM_CEILING: usize = 183_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub param_count: usize,
    pub weight_bytes: usize,
    /// Largest pair of consecutive layer outputs held at once.
    pub activation_bytes: usize,
    pub input_bytes: usize,
    pub peak_ram_bytes: usize,
    pub ram_ceiling: usize,
    pub fits_ram: bool,
    pub flops: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyStats>,
}

/// Static memory accounting of a 32-bit float network executed layer by
/// layer with two activation buffers.
pub fn audit(manifest: &ModelManifest, ram_ceiling: usize) -> BudgetReport {
    let spec = &manifest.spec;
    let param_count = spec.param_count();
    let weight_bytes = 4 * param_count;
    let dims = spec.layer_dims();
    let outputs = &dims[1..];
    let widest_pair = match outputs {
        [only] => *only,
        _ => outputs.windows(2).map(|w| w[0] + w[1]).max().unwrap_or(0),
    };
    let activation_bytes = 4 * widest_pair;
    let input_bytes = 4 * spec.input_dim;
    let peak_ram_bytes = weight_bytes + activation_bytes + input_bytes;
    BudgetReport {
        param_count,
        weight_bytes,
        activation_bytes,
        input_bytes,
        peak_ram_bytes,
        ram_ceiling,
        fits_ram: peak_ram_bytes <= ram_ceiling,
        flops: spec.flops(),
        latency: None,
    }
}

impl BudgetReport {
    pub fn with_latency(mut self, stats: LatencyStats) -> Self {
        self.latency = Some(stats);
        self
    }
}
