//! Reference implementations shared by the integration tests. Nothing here
//! calls into the library's DSP or gradient code.
#![allow(dead_code)]

use std::f64::consts::PI;

use pawsense::dsp::{truncate_to_impact, AudioClip, IMPACT_WINDOW_MS, SAMPLE_RATE};
use pawsense::nncore::{init_params, Loss, Matrix, MlpParams, MlpSpec, Mode, OutputActivation};
use pawsense::pawsim::{synth_impact, AudioSimConfig, Terrain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Periodic-Hann windowed power spectrum by direct summation, bins `0..=n/2`.
pub fn dft_power(frame: &[f32]) -> Vec<f64> {
    let n = frame.len();
    let windowed: Vec<f64> = frame
        .iter()
        .enumerate()
        .map(|(i, &s)| s as f64 * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
        .collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (i, &x) in windowed.iter().enumerate() {
                let phase = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Frame-averaged MFCCs written out step by step: 512-sample frames, hop 160,
/// 20 HTK mel triangles over 0 to 8 kHz with bin-snapped edges, natural log
/// floored at 1e-10, orthonormal DCT-II, coefficients 0..13.
pub fn reference_mfcc(samples: &[f32]) -> Vec<f64> {
    const N: usize = 512;
    const HOP: usize = 160;
    const BANDS: usize = 20;
    const KEEP: usize = 13;
    const SR: f64 = 16_000.0;

    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv_mel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(8000.0);
    let mut edge = [0usize; BANDS + 2];
    for (i, e) in edge.iter_mut().enumerate() {
        let hz = inv_mel(top * i as f64 / (BANDS + 1) as f64);
        *e = (((N + 1) as f64 * hz / SR).floor() as usize).min(N / 2);
    }

    let frames = (samples.len() - N) / HOP + 1;
    let mut sum = [0.0f64; KEEP];
    for f in 0..frames {
        let power = dft_power(&samples[f * HOP..f * HOP + N]);
        let mut log_energy = [0.0f64; BANDS];
        for b in 0..BANDS {
            let (l, c, r) = (edge[b], edge[b + 1], edge[b + 2]);
            let mut e = 0.0;
            for (k, p) in power.iter().enumerate() {
                let w = if k < l || k > r {
                    0.0
                } else if k <= c {
                    (k - l) as f64 / (c - l) as f64
                } else {
                    (r - k) as f64 / (r - c) as f64
                };
                e += w * p;
            }
            log_energy[b] = if e > 1e-10 { e.ln() } else { (1e-10f64).ln() };
        }
        for (k, s) in sum.iter_mut().enumerate() {
            let norm = if k == 0 {
                (1.0 / BANDS as f64).sqrt()
            } else {
                (2.0 / BANDS as f64).sqrt()
            };
            let mut c = 0.0;
            for (j, x) in log_energy.iter().enumerate() {
                c += x * (PI * k as f64 * (j as f64 + 0.5) / BANDS as f64).cos();
            }
            *s += norm * c;
        }
    }
    sum.iter().map(|s| s / frames as f64).collect()
}

/// Seeded test signal: tones plus noise with a random envelope.
pub fn random_signal(seed: u64, len: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tones: Vec<(f64, f64, f64)> = (0..rng.random_range(1..5))
        .map(|_| {
            (
                rng.random_range(50.0..7900.0),
                rng.random_range(0.05..0.3),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let noise = rng.random_range(0.0..0.2);
    let decay = rng.random_range(0.0..8.0);
    (0..len)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            let tone: f64 = tones
                .iter()
                .map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                .sum();
            let v = (tone + noise * rng.random_range(-1.0..1.0)) * (-decay * t).exp();
            v.clamp(-0.999, 0.999) as f32
        })
        .collect()
}

/// Ten clips: five raw test signals of assorted lengths and five impact
/// windows cut from simulated recordings.
pub fn mfcc_corpus() -> Vec<AudioClip> {
    let mut out: Vec<AudioClip> = (0..5)
        .map(|s| {
            AudioClip::new(random_signal(100 + s, 512 + 700 * s as usize), SAMPLE_RATE).unwrap()
        })
        .collect();
    let cfg = AudioSimConfig::default();
    for (i, t) in Terrain::ALL.iter().take(5).enumerate() {
        let sample = synth_impact(*t, 900 + i as u64, &cfg).unwrap();
        out.push(truncate_to_impact(&sample.clip, IMPACT_WINDOW_MS).unwrap());
    }
    out
}

/// One finite-difference gradient comparison.
pub struct GradCheck {
    pub spec: MlpSpec,
    pub loss: Loss,
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Smallest distance of any MAE residual to its kink at zero.
fn residual_margin(out: &Matrix<f64>, y: &Matrix<f64>) -> f64 {
    out.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(o, t)| (o - t).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Relative error with a floor for gradients that are zero analytically.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Draws a random network (at most 200 parameters) and batch for `seed`,
/// avoiding configurations within reach of a ReLU or absolute-value kink,
/// and compares every analytic gradient with a central difference (h = 1e-5).
pub fn gradient_check(seed: u64) -> GradCheck {
    const H: f64 = 1e-5;
    const MARGIN: f64 = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let input = rng.random_range(1..=5);
        let depth = rng.random_range(0..=2);
        let widths: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=6)).collect();
        let output = rng.random_range(1..=4);
        let loss = if rng.random_bool(0.5) {
            Loss::Mae
        } else {
            Loss::CrossEntropy
        };
        let (act, out_dim) = match loss {
            Loss::Mae => (OutputActivation::Linear, output),
            Loss::CrossEntropy => (OutputActivation::Softmax, output.max(2)),
        };
        let spec = MlpSpec::new(input, &widths, out_dim, act)
            .with_batch_norm(rng.random_bool(0.5))
            .with_dropout(if rng.random_bool(0.3) { 0.25 } else { 0.0 })
            .with_l2(if rng.random_bool(0.5) { 0.01 } else { 0.0 });
        if spec.param_count() > 200 {
            continue;
        }
        let base: MlpParams<f32> = init_params(&spec, rng.random()).unwrap();
        let mut params: MlpParams<f64> = base.cast();
        for n in &mut params.norms {
            n.gamma
                .iter_mut()
                .for_each(|g| *g = rng.random_range(0.5..1.5));
            n.beta
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        for d in &mut params.dense {
            d.bias
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.3..0.3));
        }
        let rows = rng.random_range(3..=6);
        let x = Matrix::from_vec(
            rows,
            input,
            (0..rows * input)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let y = match loss {
            Loss::Mae => Matrix::from_vec(
                rows,
                out_dim,
                (0..rows * out_dim)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap(),
            Loss::CrossEntropy => {
                let mut data = Vec::with_capacity(rows * out_dim);
                for _ in 0..rows {
                    let raw: Vec<f64> = (0..out_dim).map(|_| rng.random_range(0.05..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    data.extend(raw.iter().map(|v| v / s));
                }
                Matrix::from_vec(rows, out_dim, data).unwrap()
            }
        };
        let mode = Mode::Train { seed: rng.random() };
        let analytic = params.backward(&x, &y, loss, mode).unwrap();
        if analytic.trace.relu_margin() < MARGIN {
            continue;
        }
        if loss == Loss::Mae && residual_margin(analytic.trace.output(), &y) < MARGIN {
            continue;
        }

        let grads: Vec<Vec<f64>> = analytic
            .grads
            .tensors()
            .iter()
            .map(|t| t.to_vec())
            .collect();
        let mut max_rel_error = 0.0f64;
        let mut checked = 0;
        for (t, g) in grads.iter().enumerate() {
            for (i, &a) in g.iter().enumerate() {
                let eval = |delta: f64| {
                    let mut p = params.clone();
                    p.trainable_mut()[t][i] += delta;
                    p.backward(&x, &y, loss, mode).unwrap().loss
                };
                let numeric = (eval(H) - eval(-H)) / (2.0 * H);
                max_rel_error = max_rel_error.max(relative_error(a, numeric));
                checked += 1;
            }
        }
        return GradCheck {
            spec,
            loss,
            max_rel_error,
            checked,
        };
    }
}
