//! Dataset directories.
//!
//! ```text
//! force/                       terrain/
//!   manifest.json                manifest.json
//!   labels.csv                   labels.csv
//!   images/000000.pgm ...        clips/000000.wav ...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sole::{force_sample, ForceSample, SimConfig};
use super::terrain::{AudioSimConfig, Terrain, TerrainSample};
use crate::dsp::{read_wav, write_wav};
use crate::imaging::{read_pgm, write_pgm, GrayImage};
use crate::{Error, Result};

const RENDER_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetManifest {
    Force {
        seed: u64,
        count: usize,
        config: SimConfig,
    },
    Terrain {
        seed: u64,
        clips_per_class: usize,
        count: usize,
        config: AudioSimConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceLabel {
    pub index: usize,
    pub fx: f32,
    pub fy: f32,
    pub fz: f32,
    pub roll: f32,
    pub pitch: f32,
    pub yaw: f32,
}

impl ForceLabel {
    pub fn force(&self) -> [f32; 3] {
        [self.fx, self.fy, self.fz]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainLabel {
    pub index: usize,
    pub terrain: Terrain,
}

pub fn image_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("images").join(format!("{index:06}.pgm"))
}

pub fn clip_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("clips").join(format!("{index:06}.wav"))
}

fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let text = fs::read_to_string(dir.as_ref().join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Renders `n` force samples seeded by `config.seed` straight to `dir`,
/// a chunk at a time.
pub fn write_force_dataset(dir: impl AsRef<Path>, n: usize, config: &SimConfig) -> Result<()> {
    let dir = dir.as_ref();
    config.validate()?;
    fs::create_dir_all(dir.join("images"))?;
    let mut labels = csv::Writer::from_path(dir.join("labels.csv"))?;
    for chunk_start in (0..n).step_by(RENDER_CHUNK) {
        let end = (chunk_start + RENDER_CHUNK).min(n);
        let samples: Vec<ForceSample> = (chunk_start..end)
            .into_par_iter()
            .map(|i| force_sample(i as u64, config))
            .collect::<Result<_>>()?;
        for (offset, s) in samples.iter().enumerate() {
            let index = chunk_start + offset;
            write_pgm(image_path(dir, index), &s.image)?;
            labels.serialize(ForceLabel {
                index,
                fx: s.force_n[0],
                fy: s.force_n[1],
                fz: s.force_n[2],
                roll: s.orientation_deg[0],
                pitch: s.orientation_deg[1],
                yaw: s.orientation_deg[2],
            })?;
        }
    }
    labels.flush()?;
    write_manifest(
        dir,
        &DatasetManifest::Force {
            seed: config.seed,
            count: n,
            config: config.clone(),
        },
    )
}

pub fn read_force_labels(dir: impl AsRef<Path>) -> Result<Vec<ForceLabel>> {
    let mut reader = csv::Reader::from_path(dir.as_ref().join("labels.csv"))?;
    Ok(reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()?)
}

pub fn read_force_image(dir: impl AsRef<Path>, index: usize) -> Result<GrayImage> {
    read_pgm(image_path(dir.as_ref(), index))
}

/// Loads every sample of a force dataset directory.
pub fn read_force_dataset(dir: impl AsRef<Path>) -> Result<Vec<ForceSample>> {
    let dir = dir.as_ref();
    read_force_labels(dir)?
        .into_par_iter()
        .map(|l| {
            Ok(ForceSample {
                image: read_force_image(dir, l.index)?,
                force_n: l.force(),
                orientation_deg: [l.roll, l.pitch, l.yaw],
            })
        })
        .collect()
}

pub fn write_terrain_dataset(
    dir: impl AsRef<Path>,
    samples: &[TerrainSample],
    seed: u64,
    clips_per_class: usize,
    config: &AudioSimConfig,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("clips"))?;
    let mut labels = csv::Writer::from_path(dir.join("labels.csv"))?;
    for (index, s) in samples.iter().enumerate() {
        write_wav(clip_path(dir, index), &s.clip)?;
        labels.serialize(TerrainLabel {
            index,
            terrain: s.label,
        })?;
    }
    labels.flush()?;
    write_manifest(
        dir,
        &DatasetManifest::Terrain {
            seed,
            clips_per_class,
            count: samples.len(),
            config: config.clone(),
        },
    )
}

pub fn read_terrain_dataset(dir: impl AsRef<Path>) -> Result<Vec<TerrainSample>> {
    let dir = dir.as_ref();
    let mut reader = csv::Reader::from_path(dir.join("labels.csv"))?;
    let labels: Vec<TerrainLabel> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::from)?;
    labels
        .into_par_iter()
        .map(|l| {
            Ok(TerrainSample {
                clip: read_wav(clip_path(dir, l.index))?,
                label: l.terrain,
                onset: None,
            })
        })
        .collect()
}
