use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::audio::{AudioClip, SAMPLE_RATE};
use crate::nncore::Matrix2D;
use crate::{Error, Result};

/// STFT and cepstrum geometry. Frame and hop are in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub frame_size: usize,
    pub hop: usize,
    pub n_mel: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_size: 512,
            hop: 160,
            n_mel: 20,
            n_mfcc: 13,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn n_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.frame_size < 2 || self.hop == 0 {
            return bad(format!(
                "frame size {} and hop {} must be positive (frame >= 2)",
                self.frame_size, self.hop
            ));
        }
        if self.frame_size < self.hop {
            return bad(format!(
                "frame size {} smaller than hop {}",
                self.frame_size, self.hop
            ));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mel {
            return bad(format!(
                "n_mfcc {} must be in 1..={} (n_mel)",
                self.n_mfcc, self.n_mel
            ));
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= SAMPLE_RATE as f64 / 2.0) {
            return bad(format!(
                "frequency band [{}, {}] must satisfy 0 <= fmin < fmax <= {}",
                self.fmin,
                self.fmax,
                SAMPLE_RATE / 2
            ));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad(format!("log floor {} must be positive", self.log_floor));
        }
        Ok(())
    }
}

/// Clip-level cepstral feature: per-coefficient mean over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccVector(pub Vec<f32>);

impl MfccVector {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Number of full frames: `⌊(n − frame)/hop⌋ + 1`.
pub fn frame_count(n_samples: usize, frame_size: usize, hop: usize) -> Result<usize> {
    if n_samples < frame_size {
        return Err(Error::InsufficientAudio {
            needed: frame_size,
            got: n_samples,
        });
    }
    if hop == 0 {
        return Err(Error::Config("hop must be positive".into()));
    }
    Ok((n_samples - frame_size) / hop + 1)
}

/// Hann-windowed one-sided power spectrum of a 512-sample frame.
pub fn power_spectrum(frame: &[f32]) -> Result<Vec<f32>> {
    let extractor = MfccExtractor::new(MfccConfig::default())?;
    Ok(extractor
        .power_spectrum(frame)?
        .into_iter()
        .map(|p| p as f32)
        .collect())
}

/// Triangular mel filterbank, `n_mel × (frame_size/2 + 1)`.
pub fn mel_filterbank(config: &MfccConfig) -> Result<Matrix2D> {
    let bank = filterbank_f64(config)?;
    let rows: Vec<Vec<f32>> = bank
        .iter()
        .map(|r| r.iter().map(|&w| w as f32).collect())
        .collect();
    Matrix2D::from_rows(&rows)
}

/// Mel-spaced edges snapped to FFT bins (`⌊(N+1)·f/sr⌋`); filter `m` rises
/// linearly from edge `m` to a peak of 1 at edge `m+1` and falls back to 0 at
/// edge `m+2`.
fn filterbank_f64(config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let n_bins = config.n_bins();
    let lo = hz_to_mel(config.fmin);
    let hi = hz_to_mel(config.fmax);
    let edges: Vec<usize> = (0..config.n_mel + 2)
        .map(|i| {
            let hz = mel_to_hz(lo + (hi - lo) * i as f64 / (config.n_mel + 1) as f64);
            let bin = ((config.frame_size + 1) as f64 * hz / SAMPLE_RATE as f64).floor() as usize;
            bin.min(n_bins - 1)
        })
        .collect();
    if let Some(i) = edges.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "{} mel bands are too many for {} spectrum bins: band edges {} and {} share bin {}",
            config.n_mel,
            n_bins,
            i,
            i + 1,
            edges[i]
        )));
    }
    Ok(edges
        .windows(3)
        .map(|e| {
            let (left, center, right) = (e[0], e[1], e[2]);
            let mut row = vec![0.0; n_bins];
            for (k, w) in row.iter_mut().enumerate().take(right + 1).skip(left) {
                *w = if k <= center {
                    (k - left) as f64 / (center - left) as f64
                } else {
                    (right - k) as f64 / (right - center) as f64
                };
            }
            row
        })
        .collect())
}

/// Reusable MFCC pipeline with precomputed window, FFT plan, filterbank and
/// DCT basis. All arithmetic is `f64`.
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filters: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        let filters = filterbank_f64(&config)?;
        let n = config.frame_size;
        // periodic Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let m = config.n_mel;
        let dct = (0..config.n_mfcc)
            .map(|k| {
                let scale = if k == 0 {
                    (1.0 / m as f64).sqrt()
                } else {
                    (2.0 / m as f64).sqrt()
                };
                (0..m)
                    .map(|j| scale * (PI * k as f64 * (2 * j + 1) as f64 / (2 * m) as f64).cos())
                    .collect()
            })
            .collect();
        Ok(Self {
            config,
            window,
            fft,
            filters,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn power_spectrum(&self, frame: &[f32]) -> Result<Vec<f64>> {
        if frame.len() != self.config.frame_size {
            return Err(Error::Dimension(format!(
                "frame has {} samples, expected {}",
                frame.len(),
                self.config.frame_size
            )));
        }
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(&s, &w)| Complex::new(s as f64 * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        Ok(buf[..self.config.n_bins()]
            .iter()
            .map(|c| c.norm_sqr())
            .collect())
    }

    /// Natural-log mel energies of one frame, floored at `log_floor`.
    pub fn log_mel(&self, frame: &[f32]) -> Result<Vec<f64>> {
        let power = self.power_spectrum(frame)?;
        Ok(self
            .filters
            .iter()
            .map(|f| {
                let e: f64 = f.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(self.config.log_floor).ln()
            })
            .collect())
    }

    /// Orthonormal DCT-II, first `n_mfcc` coefficients.
    pub fn dct(&self, log_mel: &[f64]) -> Vec<f64> {
        self.dct
            .iter()
            .map(|basis| basis.iter().zip(log_mel).map(|(b, x)| b * x).sum())
            .collect()
    }

    /// Per-frame cepstra, one row per frame.
    pub fn frames(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        let c = &self.config;
        let n_frames = frame_count(clip.len(), c.frame_size, c.hop)?;
        (0..n_frames)
            .map(|f| {
                let start = f * c.hop;
                let frame = &clip.samples()[start..start + c.frame_size];
                Ok(self.dct(&self.log_mel(frame)?))
            })
            .collect()
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<MfccVector> {
        let frames = self.frames(clip)?;
        let n = frames.len() as f64;
        let mut mean = vec![0.0f64; self.config.n_mfcc];
        for f in &frames {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v;
            }
        }
        Ok(MfccVector(
            mean.into_iter().map(|m| (m / n) as f32).collect(),
        ))
    }
}

/// Clip-level MFCC vector.
pub fn mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<MfccVector> {
    MfccExtractor::new(config.clone())?.extract(clip)
}
