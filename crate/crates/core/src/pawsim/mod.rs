//! Deterministic synthetic stand-in for the force rig and the terrain
//! recordings: dot-pattern sole renderer and impact-sound synthesizer.

mod seed;
mod sole;
mod store;
mod terrain;

pub use seed::derive_seed;
pub use sole::{
    force_sample, generate_force_dataset, render_sole, sample_load, ForceSample, Range, SimConfig,
};
pub use store::{
    clip_path, image_path, read_force_dataset, read_force_image, read_force_labels, read_manifest,
    read_terrain_dataset, write_force_dataset, write_terrain_dataset, DatasetManifest, ForceLabel,
    TerrainLabel,
};
pub use terrain::{generate_terrain_dataset, synth_impact, AudioSimConfig, Terrain, TerrainSample};
