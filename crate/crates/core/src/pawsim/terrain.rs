use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seed::derive_seed;
use crate::dsp::{AudioClip, SAMPLE_RATE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terrain {
    Gravel,
    Concrete,
    Leaves,
    Snow,
    Sand,
    Grass,
}

impl Terrain {
    pub const ALL: [Terrain; 6] = [
        Terrain::Gravel,
        Terrain::Concrete,
        Terrain::Leaves,
        Terrain::Snow,
        Terrain::Sand,
        Terrain::Grass,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Terrain::Gravel => "gravel",
            Terrain::Concrete => "concrete",
            Terrain::Leaves => "leaves",
            Terrain::Snow => "snow",
            Terrain::Sand => "sand",
            Terrain::Grass => "grass",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|t| t.name().to_string()).collect()
    }

    fn acoustics(self) -> Acoustics {
        // (centre Hz, Q, decay ms, crackle bursts)
        let (center_hz, q, decay_ms, crackle) = match self {
            Terrain::Gravel => (3200.0, 1.5, 14.0, 18),
            Terrain::Concrete => (1900.0, 4.0, 6.0, 0),
            Terrain::Leaves => (5200.0, 1.2, 22.0, 0),
            Terrain::Snow => (380.0, 1.5, 26.0, 0),
            Terrain::Sand => (800.0, 1.2, 12.0, 10),
            Terrain::Grass => (1250.0, 0.9, 38.0, 0),
        };
        Acoustics {
            center_hz,
            q,
            decay_ms,
            crackle,
        }
    }
}

impl fmt::Display for Terrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Terrain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Validation(format!("unknown terrain label {s:?}")))
    }
}

struct Acoustics {
    center_hz: f64,
    q: f64,
    decay_ms: f64,
    crackle: usize,
}

/// Impact-sound synthesizer settings shared by every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSimConfig {
    pub clip_ms: f64,
    /// Ambient noise RMS (full scale = 1).
    pub ambient_rms: f64,
    /// Impact peak amplitude range.
    pub peak_range: (f64, f64),
    /// Onset time range in ms.
    pub onset_ms: (f64, f64),
    /// Relative per-clip jitter of centre frequency and decay.
    pub jitter: f64,
}

impl Default for AudioSimConfig {
    fn default() -> Self {
        Self {
            clip_ms: 1000.0,
            // -40 dBFS
            ambient_rms: 0.01,
            peak_range: (0.3, 0.9),
            onset_ms: (100.0, 850.0),
            jitter: 0.12,
        }
    }
}

/// One labeled one-second recording.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSample {
    pub clip: AudioClip,
    pub label: Terrain,
    /// Onset of the impact in samples, when known.
    pub onset: Option<usize>,
}

/// RBJ band-pass biquad (0 dB peak gain), direct form I.
fn band_pass(input: &[f64], center_hz: f64, q: f64) -> Vec<f64> {
    let w0 = 2.0 * PI * center_hz / SAMPLE_RATE as f64;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    input
        .iter()
        .map(|&x| {
            let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

/// Synthesizes a one-second impact on `label` terrain.
///
/// Ambient Gaussian noise plus, at a seeded onset, a short broadband contact
/// tick and band-passed noise with an exponential decay; granular classes add
/// a train of short clicks.
pub fn synth_impact(label: Terrain, seed: u64, config: &AudioSimConfig) -> Result<TerrainSample> {
    let n = (config.clip_ms * SAMPLE_RATE as f64 / 1000.0).round() as usize;
    let ms = |v: f64| (v * SAMPLE_RATE as f64 / 1000.0).round() as usize;
    if config.onset_ms.1 >= config.clip_ms || config.onset_ms.0 > config.onset_ms.1 {
        return Err(Error::Config("onset range must lie inside the clip".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let ac = label.acoustics();

    let jitter = |rng: &mut ChaCha8Rng| 1.0 + config.jitter * (2.0 * rng.random::<f64>() - 1.0);
    let center = ac.center_hz * jitter(&mut rng);
    let decay = ac.decay_ms * jitter(&mut rng) * SAMPLE_RATE as f64 / 1000.0;
    let peak = rng.random_range(config.peak_range.0..=config.peak_range.1);
    let onset = rng.random_range(ms(config.onset_ms.0)..=ms(config.onset_ms.1));

    let len = ((decay * 8.0) as usize).min(n - onset);
    let excitation: Vec<f64> = (0..len).map(|_| unit.sample(&mut rng)).collect();
    let mut body = band_pass(&excitation, center, ac.q);
    for (i, v) in body.iter_mut().enumerate() {
        *v *= (-(i as f64) / decay).exp();
    }
    // broadband contact transient at the moment of impact
    let body_peak = body.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tick = ms(0.5).max(2);
    for (k, v) in body.iter_mut().take(tick).enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        *v += sign * body_peak * (-(k as f64) / (tick as f64 / 3.0)).exp();
    }
    if ac.crackle > 0 {
        let click_len = ms(0.6).max(2);
        let span = (decay * 3.0) as usize;
        for _ in 0..ac.crackle {
            let at = rng.random_range(0..span.max(1));
            let gain = rng.random_range(0.3..1.0);
            for k in 0..click_len {
                if at + k < body.len() {
                    body[at + k] += gain
                        * unit.sample(&mut rng)
                        * (-(k as f64) / (click_len as f64 / 3.0)).exp();
                }
            }
        }
    }
    let max = body.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);

    let mut samples: Vec<f64> = (0..n)
        .map(|_| config.ambient_rms * unit.sample(&mut rng))
        .collect();
    for (s, b) in samples[onset..].iter_mut().zip(&body) {
        *s += peak * b / max;
    }
    let pcm: Vec<i16> = samples
        .iter()
        .map(|&s| (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
        .collect();
    Ok(TerrainSample {
        clip: AudioClip::from_pcm16(&pcm),
        label,
        onset: Some(onset),
    })
}

/// `clips_per_class` clips for each class, class-major order; clip `i`
/// is seeded from `(seed, i)`.
pub fn generate_terrain_dataset(
    clips_per_class: usize,
    seed: u64,
    config: &AudioSimConfig,
) -> Result<Vec<TerrainSample>> {
    (0..Terrain::ALL.len() * clips_per_class)
        .into_par_iter()
        .map(|i| {
            let label = Terrain::ALL[i / clips_per_class.max(1)];
            synth_impact(label, derive_seed(seed, i as u64), config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{impact_window_start, window_samples, IMPACT_WINDOW_MS};

    #[test]
    fn labels_parse() {
        for t in Terrain::ALL {
            assert_eq!(t.name().parse::<Terrain>().unwrap(), t);
            assert_eq!(Terrain::from_index(t.index()), Some(t));
        }
        assert!("mud".parse::<Terrain>().is_err());
    }

    #[test]
    fn clips_are_seeded() {
        let c = AudioSimConfig::default();
        let a = synth_impact(Terrain::Gravel, 5, &c).unwrap();
        let b = synth_impact(Terrain::Gravel, 5, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clip.len(), 16_000);
        assert_ne!(a, synth_impact(Terrain::Gravel, 6, &c).unwrap());
    }

    #[test]
    fn impact_dominates_ambient() {
        let c = AudioSimConfig::default();
        for t in Terrain::ALL {
            for seed in 0..5 {
                let s = synth_impact(t, seed, &c).unwrap();
                let peak = s.clip.samples().iter().fold(0.0f32, |m, v| m.max(v.abs()));
                assert!(peak as f64 >= 10.0 * c.ambient_rms, "{t} peak {peak}");
            }
        }
    }

    #[test]
    fn impact_window_overlaps_onset() {
        let c = AudioSimConfig::default();
        let w = window_samples(IMPACT_WINDOW_MS);
        for (i, s) in generate_terrain_dataset(20, 3, &c)
            .unwrap()
            .iter()
            .enumerate()
        {
            let start = impact_window_start(s.clip.samples(), w).unwrap();
            let onset = s.onset.unwrap();
            assert!(
                start <= onset && onset < start + w,
                "clip {i}: start {start} onset {onset}"
            );
        }
    }

    #[test]
    fn dataset_layout() {
        let d = generate_terrain_dataset(3, 1, &AudioSimConfig::default()).unwrap();
        assert_eq!(d.len(), 18);
        for t in Terrain::ALL {
            assert_eq!(d.iter().filter(|s| s.label == t).count(), 3);
        }
    }
}
