//! Model files and the on-device budget checks.

mod audit;
mod bench;
mod format;

pub use audit::{audit, BudgetReport, DEFAULT_RAM_CEILING};
pub use bench::{bench, write_bench_csv, LatencyStats};
pub use format::{
    decode, encode, load, save, ModelManifest, Preprocessing, Task, FORMAT_VERSION, MAGIC,
};
