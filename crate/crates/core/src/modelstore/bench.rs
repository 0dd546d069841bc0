use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::nncore::{Matrix2D, MlpParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub passes: usize,
    pub mean_micros: f64,
    pub p50_micros: f64,
    pub p95_micros: f64,
    /// Multiply-adds of one forward pass, counted as two operations each.
    pub flops: u64,
    #[serde(skip)]
    pub samples_micros: Vec<f64>,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Times `n_passes` runs of `make_input(pass)` plus an inference forward pass
/// after `warmup` untimed runs. `make_input` should include preprocessing.
pub fn bench<F>(
    params: &MlpParams,
    mut make_input: F,
    n_passes: usize,
    warmup: usize,
) -> Result<LatencyStats>
where
    F: FnMut(usize) -> Result<Vec<f32>>,
{
    if n_passes == 0 {
        return Err(Error::Validation(
            "benchmark needs at least one pass".into(),
        ));
    }
    let dim = params.spec.input_dim;
    let mut run = |i: usize| -> Result<()> {
        let x = Matrix2D::from_vec(1, dim, make_input(i)?)?;
        std::hint::black_box(params.predict(&x)?);
        Ok(())
    };
    for i in 0..warmup {
        run(i)?;
    }
    let mut samples = Vec::with_capacity(n_passes);
    for i in 0..n_passes {
        let start = Instant::now();
        run(warmup + i)?;
        samples.push(start.elapsed().as_secs_f64() * 1e6);
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        passes: n_passes,
        mean_micros: sorted.iter().sum::<f64>() / n_passes as f64,
        p50_micros: percentile(&sorted, 0.5),
        p95_micros: percentile(&sorted, 0.95),
        flops: params.spec.flops(),
        samples_micros: samples,
    })
}

/// Per-pass timings as `pass,micros`.
pub fn write_bench_csv<W: Write>(out: W, stats: &LatencyStats) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pass", "micros"])?;
    for (i, t) in stats.samples_micros.iter().enumerate() {
        w.write_record([i.to_string(), format!("{t:.3}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{init_params, MlpSpec};

    fn net(widths: &[usize]) -> MlpParams {
        init_params(&MlpSpec::force(30, 45, widths), 0).unwrap()
    }

    #[test]
    fn one_pass() {
        let s = bench(&net(&[16, 128]), |_| Ok(vec![0.5; 1350]), 1, 0).unwrap();
        assert_eq!(s.passes, 1);
        assert_eq!(s.mean_micros, s.p50_micros);
        assert_eq!(s.samples_micros.len(), 1);
    }

    #[test]
    fn ordered_stats() {
        let s = bench(
            &net(&[8, 64, 64]),
            |i| Ok(vec![(i % 7) as f32 / 7.0; 1350]),
            50,
            5,
        )
        .unwrap();
        assert!(s.p50_micros >= 0.0 && s.p95_micros >= s.p50_micros);
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 51);
        assert!(bench(&net(&[4]), |_| Ok(vec![0.0; 1350]), 0, 0).is_err());
    }

    #[test]
    fn wider_means_more_flops() {
        let a = bench(&net(&[16, 128]), |_| Ok(vec![0.0; 1350]), 1, 0).unwrap();
        let b = bench(&net(&[32, 256]), |_| Ok(vec![0.0; 1350]), 1, 0).unwrap();
        assert!(b.flops > a.flops);
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 10.0);
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }
}
