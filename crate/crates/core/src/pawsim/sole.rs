use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seed::derive_seed;
use crate::imaging::{GrayImage, CAMERA_HEIGHT, CAMERA_WIDTH};
use crate::{Error, Result};

/// Inclusive range `[lo, hi]`.
pub type Range = (f64, f64);

/// Forward model of the sole camera.
///
/// The sole carries a triangular lattice of dark dots on a light background.
/// A contact load moves the contact centre with the tangential force, pushes
/// dots radially outwards with amplitude `normal_gain · (Fz/Fz_max)^(2/3)` under
/// a Gaussian footprint, drags them along the tangential force, and swells
/// them where the silicone is compressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Horizontal dot spacing in pixels; rows are `pitch·√3/2` apart.
    pub dot_pitch: f64,
    pub dot_radius: f64,
    /// Width of the anti-aliased dot rim in pixels.
    pub dot_edge: f64,
    pub background: f64,
    pub dot_intensity: f64,
    /// Peak radial displacement (px) at full-scale normal force.
    pub normal_gain: f64,
    /// Fractional dot-radius growth at full-scale normal force.
    pub swell_gain: f64,
    /// Contact-centre offset per newton of tangential force (px/N).
    pub shear_gain: f64,
    /// Dot drag under the footprint per newton of tangential force (px/N).
    pub drag_gain: f64,
    /// Footprint standard deviation (px).
    pub footprint_sigma: f64,
    /// Peak swirl displacement (px) from yaw twist at full-scale load.
    pub twist_gain: f64,
    /// Relative brightness loss in the frame corners.
    pub vignette: f64,
    /// Gaussian pixel noise standard deviation in intensity levels.
    pub noise_std: f64,
    /// Fx, Fy, Fz ranges in newtons.
    pub force_range: [Range; 3],
    /// Roll, pitch, yaw ranges in degrees.
    pub orientation_range: [Range; 3],
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            width: CAMERA_WIDTH,
            height: CAMERA_HEIGHT,
            dot_pitch: 14.0,
            dot_radius: 3.5,
            dot_edge: 2.0,
            background: 210.0,
            dot_intensity: 40.0,
            normal_gain: 6.0,
            swell_gain: 1.2,
            shear_gain: 0.5,
            drag_gain: 0.04,
            footprint_sigma: 32.0,
            twist_gain: 1.5,
            vignette: 0.25,
            noise_std: 2.0,
            force_range: [(-66.0, 75.0), (-92.0, 80.0), (2.0, 133.0)],
            orientation_range: [(-50.0, 50.0), (-40.0, 40.0), (-180.0, 180.0)],
        }
    }
}

impl SimConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_std = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive".into());
        }
        if !(self.dot_pitch > 0.0 && self.dot_radius > 0.0 && self.dot_edge > 0.0) {
            return bad("dot pitch, radius and edge must be positive".into());
        }
        if self.footprint_sigma.is_nan() || self.footprint_sigma <= 0.0 || self.noise_std < 0.0 {
            return bad("footprint sigma must be positive and noise non-negative".into());
        }
        for (i, (lo, hi)) in self
            .force_range
            .iter()
            .chain(&self.orientation_range)
            .enumerate()
        {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return bad(format!("range {i} is empty: [{lo}, {hi}]"));
            }
        }
        if self.force_range[2].0.is_nan() || self.force_range[2].0 <= 0.0 {
            return bad("normal force range must be strictly positive".into());
        }
        // every dot must stay inside the frame under the largest load
        let (fx, fy) = (self.max_abs(0), self.max_abs(1));
        let shift = self.shear_gain * fx.hypot(fy)
            + self.drag_gain * fx.hypot(fy)
            + self.normal_gain
            + self.twist_gain;
        let half = (self.width.min(self.height) as f64) / 2.0;
        if shift + self.dot_radius * (1.0 + self.swell_gain) >= half {
            return bad(format!(
                "deformation gains move dots up to {shift:.1} px, beyond the {half:.0} px half-frame"
            ));
        }
        Ok(())
    }

    fn max_abs(&self, axis: usize) -> f64 {
        let (lo, hi) = self.force_range[axis];
        lo.abs().max(hi.abs())
    }

    fn check_load(&self, force: [f64; 3], orientation: [f64; 3]) -> Result<()> {
        if force.iter().chain(&orientation).any(|v| !v.is_finite()) {
            return Err(Error::Generation(
                "force and orientation must be finite".into(),
            ));
        }
        if force[2] <= 0.0 {
            return Err(Error::Generation(format!(
                "normal force {} N means no contact",
                force[2]
            )));
        }
        const AXES: [&str; 6] = ["Fx", "Fy", "Fz", "roll", "pitch", "yaw"];
        for (i, (v, (lo, hi))) in force
            .iter()
            .chain(&orientation)
            .zip(self.force_range.iter().chain(&self.orientation_range))
            .enumerate()
        {
            if v < lo || v > hi {
                return Err(Error::Generation(format!(
                    "{} = {v} outside configured range [{lo}, {hi}]",
                    AXES[i]
                )));
            }
        }
        Ok(())
    }
}

/// One labeled camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSample {
    pub image: GrayImage,
    /// Fx, Fy, Fz in newtons, paw frame.
    pub force_n: [f32; 3],
    /// Roll, pitch, yaw in degrees.
    pub orientation_deg: [f32; 3],
}

/// Lattice positions relative to the image centre, symmetric under `x → −x`.
fn lattice(config: &SimConfig) -> Vec<(f64, f64)> {
    let half_w = (config.width as f64 - 1.0) / 2.0;
    let half_h = (config.height as f64 - 1.0) / 2.0;
    let row_step = config.dot_pitch * 3f64.sqrt() / 2.0;
    let margin = config.dot_pitch;
    let n_rows = ((half_h + margin) / row_step).ceil() as i64;
    let n_cols = ((half_w + margin) / config.dot_pitch).ceil() as i64 + 1;
    let mut dots = Vec::new();
    for j in -n_rows..=n_rows {
        let y = j as f64 * row_step;
        let offset = if j.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
        for i in -n_cols..=n_cols {
            let x = (i as f64 + offset) * config.dot_pitch;
            if x.abs() <= half_w + margin && y.abs() <= half_h + margin {
                dots.push((x, y));
            }
        }
    }
    dots
}

/// Renders the sole under `force_n` (N) at `orientation_deg` (roll, pitch, yaw).
///
/// Deterministic in all arguments; `noise_seed` only drives pixel noise.
pub fn render_sole(
    force_n: [f64; 3],
    orientation_deg: [f64; 3],
    config: &SimConfig,
    noise_seed: u64,
) -> Result<GrayImage> {
    config.validate()?;
    config.check_load(force_n, orientation_deg)?;
    let [fx, fy, fz] = force_n;
    let [roll, pitch, yaw] = orientation_deg;
    let roll_span = config.orientation_range[0]
        .0
        .abs()
        .max(config.orientation_range[0].1.abs());
    let pitch_span = config.orientation_range[1]
        .0
        .abs()
        .max(config.orientation_range[1].1.abs());

    let load = (fz / config.force_range[2].1).powf(2.0 / 3.0);
    let sigma = config.footprint_sigma;
    // tilt stretches the footprint along the tilt axis
    let sigma_x = sigma * (1.0 + 0.25 * pitch.abs() / pitch_span.max(1.0));
    let sigma_y = sigma * (1.0 + 0.25 * roll.abs() / roll_span.max(1.0));
    let (cx, cy) = (config.shear_gain * fx, config.shear_gain * fy);
    let twist = config.twist_gain * load * yaw.to_radians().sin();

    let mut dots: Vec<(f64, f64, f64)> = lattice(config)
        .into_iter()
        .map(|(x, y)| {
            let (dx, dy) = (x - cx, y - cy);
            let q2 = (dx / sigma_x).powi(2) + (dy / sigma_y).powi(2);
            let g = (-0.5 * q2).exp();
            let radial = config.normal_gain * load * g / sigma;
            let ux = radial * dx + config.drag_gain * fx * g - twist * g * dy / sigma;
            let uy = radial * dy + config.drag_gain * fy * g + twist * g * dx / sigma;
            let r = config.dot_radius * (1.0 + config.swell_gain * load * g);
            (x + ux, y + uy, r)
        })
        .collect();
    dots.sort_by(|a, b| a.1.total_cmp(&b.1));

    let half_w = (config.width as f64 - 1.0) / 2.0;
    let half_h = (config.height as f64 - 1.0) / 2.0;
    let corner2 = half_w * half_w + half_h * half_h;
    let mut coverage = vec![0.0f64; config.width * config.height];
    let rim = config.dot_edge;
    for &(px, py, r) in &dots {
        let reach = r + rim;
        let y0 = ((py + half_h - reach).floor().max(0.0)) as usize;
        let y1 = ((py + half_h + reach).ceil().min(config.height as f64 - 1.0)).max(0.0) as usize;
        let x0 = ((px + half_w - reach).floor().max(0.0)) as usize;
        let x1 = ((px + half_w + reach).ceil().min(config.width as f64 - 1.0)).max(0.0) as usize;
        if py + half_h + reach < 0.0 || px + half_w + reach < 0.0 {
            continue;
        }
        for yi in y0..=y1 {
            let y = yi as f64 - half_h;
            for xi in x0..=x1 {
                let x = xi as f64 - half_w;
                let d = (x - px).hypot(y - py);
                let c = ((r - d) / rim + 0.5).clamp(0.0, 1.0);
                let cell = &mut coverage[yi * config.width + xi];
                if c > *cell {
                    *cell = c;
                }
            }
        }
    }

    let noise = Normal::new(0.0, config.noise_std.max(0.0)).expect("valid noise std");
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut pixels = Vec::with_capacity(coverage.len());
    for yi in 0..config.height {
        let y = yi as f64 - half_h;
        for xi in 0..config.width {
            let x = xi as f64 - half_w;
            let shade = 1.0 - config.vignette * (x * x + y * y) / corner2;
            let c = coverage[yi * config.width + xi];
            let mut v =
                shade * (config.background - c * (config.background - config.dot_intensity));
            if config.noise_std > 0.0 {
                v += noise.sample(&mut rng);
            }
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(config.width, config.height, pixels)
}

/// Load and orientation of sample `index`, uniform within the configured ranges.
pub fn sample_load(index: u64, config: &SimConfig) -> ([f64; 3], [f64; 3], u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, index));
    let mut draw = |(lo, hi): Range| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };
    let force = config.force_range.map(&mut draw);
    let orientation = config.orientation_range.map(&mut draw);
    let noise_seed = rng.random::<u64>();
    (force, orientation, noise_seed)
}

/// Sample `index` of the force dataset seeded by `config.seed`.
pub fn force_sample(index: u64, config: &SimConfig) -> Result<ForceSample> {
    let (force, orientation, noise_seed) = sample_load(index, config);
    let force32 = force.map(|v| v as f32);
    let orientation32 = orientation.map(|v| v as f32);
    // render the f32-rounded load so the label reproduces the image exactly
    let image = render_sole(
        force32.map(f64::from),
        orientation32.map(f64::from),
        config,
        noise_seed,
    )?;
    Ok(ForceSample {
        image,
        force_n: force32,
        orientation_deg: orientation32,
    })
}

/// `n` samples with uniform loads; sample `i` depends only on `(config, i)`.
pub fn generate_force_dataset(n: usize, config: &SimConfig) -> Result<Vec<ForceSample>> {
    config.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| force_sample(i, config))
        .collect()
}
