use std::fs;
use std::path::{Path, PathBuf};

use pawsense::Result;
use serde::Serialize;

use crate::OutArg;

pub const OUT_ENV: &str = "PAWSENSE_OUT";
const DEFAULT_ROOT: &str = "pawsense-runs";

pub fn out_dir(command: &str, out: &OutArg) -> Result<PathBuf> {
    let dir = match &out.out {
        Some(dir) => dir.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
            .join(command),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Serialize)]
struct RunManifest<'a, C> {
    command: &'a str,
    seed: Option<u64>,
    config_hash: String,
    version: &'a str,
    config: &'a C,
}

/// Writes `run.json`: the command, its seed and resolved configuration, and a
/// CRC32 of that configuration.
pub fn record<C: Serialize>(
    dir: &Path,
    command: &str,
    seed: Option<u64>,
    config: &C,
) -> Result<()> {
    let canonical = serde_json::to_vec(&(command, seed, config))?;
    let manifest = RunManifest {
        command,
        seed,
        config_hash: format!("{:08x}", crc32fast::hash(&canonical)),
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join("run.json"), text)?;
    Ok(())
}
