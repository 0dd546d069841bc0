use super::audio::{AudioClip, SAMPLE_RATE};
use crate::{Error, Result};

/// Impact window length used for terrain clips.
pub const IMPACT_WINDOW_MS: f64 = 62.5;

pub fn window_samples(window_ms: f64) -> usize {
    (window_ms * SAMPLE_RATE as f64 / 1000.0).round() as usize
}

/// Start index of the contiguous window with the largest energy; the earliest
/// wins ties.
pub fn impact_window_start(samples: &[f32], window: usize) -> Result<usize> {
    if window == 0 || samples.len() < window {
        return Err(Error::InsufficientAudio {
            needed: window.max(1),
            got: samples.len(),
        });
    }
    let sq: Vec<f64> = samples.iter().map(|&s| (s as f64) * (s as f64)).collect();
    let n_windows = samples.len() - window + 1;

    // Rolling sums locate the candidates; they carry rounding drift, so near-best
    // windows are re-summed directly before the earliest exact maximum is taken.
    let mut rolling = Vec::with_capacity(n_windows);
    let mut acc: f64 = sq[..window].iter().sum();
    rolling.push(acc);
    for start in 1..n_windows {
        acc += sq[start + window - 1] - sq[start - 1];
        rolling.push(acc);
    }
    let best = rolling.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slack = best.abs() * 1e-9 + 1e-300;

    let mut winner = None;
    let mut winner_energy = f64::NEG_INFINITY;
    for (start, &r) in rolling.iter().enumerate() {
        if r + slack < best {
            continue;
        }
        let exact: f64 = sq[start..start + window].iter().sum();
        if exact > winner_energy {
            winner_energy = exact;
            winner = Some(start);
        }
    }
    Ok(winner.expect("at least one candidate window"))
}

/// Cuts the `window_ms` window with the most energy out of `clip`.
pub fn truncate_to_impact(clip: &AudioClip, window_ms: f64) -> Result<AudioClip> {
    let window = window_samples(window_ms);
    let start = impact_window_start(clip.samples(), window)?;
    clip.slice(start, window)
}
