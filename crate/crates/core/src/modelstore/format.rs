use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::{truncate_to_impact, AudioClip, MfccConfig};
use crate::imaging::{resize_nearest, GrayImage, MODEL_HEIGHT, MODEL_WIDTH};
use crate::nncore::{init_params, MlpParams, MlpSpec};
use crate::pipeline::{ForceScaler, TerrainFeatureConfig};
use crate::{Error, Result};

pub const MAGIC: &str = "PAWMODEL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Force,
    Terrain,
}

/// How raw sensor data becomes a network input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Preprocessing {
    /// Nearest-neighbour resize to `width × height`, then `pixel / full_scale`.
    Image {
        width: usize,
        height: usize,
        full_scale: f32,
    },
    /// Impact window of `window_ms`, then frame-averaged MFCCs.
    Mfcc { window_ms: f64, mfcc: MfccConfig },
}

impl Preprocessing {
    pub fn image() -> Self {
        Self::Image {
            width: MODEL_WIDTH,
            height: MODEL_HEIGHT,
            full_scale: 255.0,
        }
    }

    pub fn from_terrain(config: &TerrainFeatureConfig) -> Self {
        Self::Mfcc {
            window_ms: config.window_ms,
            mfcc: config.mfcc.clone(),
        }
    }

    /// Network input row for a camera frame.
    pub fn image_input(&self, frame: &GrayImage) -> Result<Vec<f32>> {
        match self {
            Self::Image {
                width,
                height,
                full_scale,
            } => {
                let small = resize_nearest(frame, *width, *height)?;
                Ok(small
                    .pixels()
                    .iter()
                    .map(|&p| p as f32 / full_scale)
                    .collect())
            }
            Self::Mfcc { .. } => Err(Error::Validation("model expects audio input".into())),
        }
    }

    /// Network input row for an audio recording.
    pub fn audio_input(&self, clip: &AudioClip) -> Result<Vec<f32>> {
        match self {
            Self::Mfcc { window_ms, mfcc } => {
                let window = truncate_to_impact(clip, *window_ms)?;
                Ok(crate::dsp::mfcc(&window, mfcc)?.0)
            }
            Self::Image { .. } => Err(Error::Validation("model expects image input".into())),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Image { width, height, .. } => width * height,
            Self::Mfcc { mfcc, .. } => mfcc.n_mfcc,
        }
    }
}

/// Everything needed to run a saved network besides its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub task: Task,
    pub spec: MlpSpec,
    pub preprocessing: Preprocessing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<ForceScaler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    pub blob_len: usize,
    pub crc32: u32,
}

impl ModelManifest {
    pub fn force(spec: MlpSpec, scaler: ForceScaler) -> Self {
        Self::unsigned(
            Task::Force,
            spec,
            Preprocessing::image(),
            Some(scaler),
            None,
        )
    }

    pub fn terrain(
        spec: MlpSpec,
        features: &TerrainFeatureConfig,
        class_names: Vec<String>,
    ) -> Self {
        Self::unsigned(
            Task::Terrain,
            spec,
            Preprocessing::from_terrain(features),
            None,
            Some(class_names),
        )
    }

    fn unsigned(
        task: Task,
        spec: MlpSpec,
        preprocessing: Preprocessing,
        scaler: Option<ForceScaler>,
        class_names: Option<Vec<String>>,
    ) -> Self {
        let blob_len = 4 * spec.param_count();
        Self {
            format_version: FORMAT_VERSION,
            task,
            spec,
            preprocessing,
            scaler,
            class_names,
            blob_len,
            crc32: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.blob_len != 4 * self.spec.param_count() {
            return Err(Error::Malformed(format!(
                "blob length {} does not match {} parameters",
                self.blob_len,
                self.spec.param_count()
            )));
        }
        if self.preprocessing.input_dim() != self.spec.input_dim {
            return Err(Error::Malformed(format!(
                "preprocessing yields {} inputs, network takes {}",
                self.preprocessing.input_dim(),
                self.spec.input_dim
            )));
        }
        match self.task {
            Task::Force => {
                if self.scaler.is_none() || self.spec.output_dim != 3 {
                    return Err(Error::Malformed(
                        "force model needs a scaler and 3 outputs".into(),
                    ));
                }
            }
            Task::Terrain => match &self.class_names {
                Some(names) if names.len() == self.spec.output_dim => {}
                _ => {
                    return Err(Error::Malformed(
                        "terrain model needs one class name per output".into(),
                    ))
                }
            },
        }
        Ok(())
    }
}

/// Serializes `params` under `manifest`, filling in blob length and CRC.
pub fn encode(params: &MlpParams, manifest: &ModelManifest) -> Result<(Vec<u8>, ModelManifest)> {
    if params.spec != manifest.spec {
        return Err(Error::Validation(
            "parameters do not belong to the manifest's network".into(),
        ));
    }
    params.check_shapes()?;
    let blob: Vec<u8> = params
        .tensors()
        .into_iter()
        .flatten()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    let mut manifest = manifest.clone();
    manifest.format_version = FORMAT_VERSION;
    manifest.blob_len = blob.len();
    manifest.crc32 = crc32fast::hash(&blob);
    manifest.validate()?;
    let json = serde_json::to_string(&manifest)?;
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\n{json}\n").into_bytes();
    out.extend_from_slice(&blob);
    Ok((out, manifest))
}

fn split_line(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Malformed("missing header line".into()))?;
    Ok((&bytes[..end], &bytes[end + 1..]))
}

pub fn decode(bytes: &[u8]) -> Result<(MlpParams, ModelManifest)> {
    let (magic_line, rest) = split_line(bytes)?;
    let magic_line = std::str::from_utf8(magic_line)
        .map_err(|_| Error::Malformed("header is not text".into()))?;
    let version = match magic_line.split_once(' ') {
        Some((MAGIC, v)) => v
            .parse::<u32>()
            .map_err(|_| Error::Malformed(format!("bad version field {v:?}")))?,
        _ => return Err(Error::Malformed("not a model file".into())),
    };
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (json, blob) = split_line(rest)?;
    let manifest: ModelManifest =
        serde_json::from_slice(json).map_err(|e| Error::Malformed(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    manifest.validate()?;
    if blob.len() < manifest.blob_len {
        return Err(Error::Truncated {
            expected: manifest.blob_len,
            found: blob.len(),
        });
    }
    if blob.len() > manifest.blob_len {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after the weight blob",
            blob.len() - manifest.blob_len
        )));
    }
    let actual = crc32fast::hash(blob);
    if actual != manifest.crc32 {
        return Err(Error::Checksum {
            expected: manifest.crc32,
            actual,
        });
    }
    let mut params: MlpParams = init_params(&manifest.spec, 0)?;
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for tensor in params.tensors_mut() {
        for (slot, v) in tensor.iter_mut().zip(values.by_ref()) {
            *slot = v;
        }
    }
    params
        .check_shapes()
        .map_err(|e| Error::Malformed(e.to_string()))?;
    Ok((params, manifest))
}

/// Writes the model file via a temporary sibling and a rename.
pub fn save(params: &MlpParams, manifest: &ModelManifest, path: &Path) -> Result<ModelManifest> {
    let (bytes, manifest) = encode(params, manifest)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(manifest)
}

pub fn load(path: &Path) -> Result<(MlpParams, ModelManifest)> {
    decode(&fs::read(path)?)
}
