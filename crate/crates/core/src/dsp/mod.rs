//! Audio front end: WAV I/O, impact localization and clip-level MFCCs.
//!
//! The feature chain is Hann-windowed 512-sample frames with a 160-sample hop,
//! power spectrum, 20 triangular mel bands (HTK scale, 0 to 8 kHz), natural log
//! with a 1e-10 floor, orthonormal DCT-II keeping coefficients 0..=12, and a
//! mean over frames.

mod audio;
mod impact;
mod mfcc;

pub use audio::{read_wav, write_wav, AudioClip, SAMPLE_RATE};
pub use impact::{impact_window_start, truncate_to_impact, window_samples, IMPACT_WINDOW_MS};
pub use mfcc::{
    frame_count, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, power_spectrum, MfccConfig,
    MfccExtractor, MfccVector,
};
