use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_pairs(n_classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Dimension(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut m = Self::new(n_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.counts.len();
        if truth >= n || predicted >= n {
            return Err(Error::Validation(format!(
                "class pair ({truth}, {predicted}) outside {n} classes"
            )));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Samples of each true class.
    pub fn supports(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// `trace / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Recall per true class; `None` for classes without samples.
    pub fn recalls(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s: usize = r.iter().sum();
                (s > 0).then(|| r[i] as f64 / s as f64)
            })
            .collect()
    }

    /// CSV with one row per true class: `true,<class names...>`.
    pub fn write_csv<W: Write>(&self, out: W, class_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true".to_string()];
        header.extend(class_names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform histogram over the observed value range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `bins` equal-width bins spanning `[min, max]`; the top edge is inclusive.
    /// A degenerate range is widened to `[min, min + 1]`.
    pub fn uniform(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo, lo + 1.0)
        };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }
}

/// Sum in ascending order so the result does not depend on input order.
pub(crate) fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

pub(crate) fn ordered_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    ordered_sum(&mut v) / v.len() as f64
}

/// Population standard deviation, order independent.
pub(crate) fn ordered_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = ordered_mean(values);
    let mut sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (ordered_sum(&mut sq) / values.len() as f64).sqrt()
}

/// Force regression errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceMetrics {
    /// Per-axis MAE in normalized units.
    pub axis_mae: [f64; 3],
    /// MAE of `| ‖pred‖ − ‖truth‖ |` in newtons.
    pub magnitude_mae_n: f64,
    /// Standard deviation of the magnitude errors in newtons.
    pub magnitude_std_n: f64,
}

impl ForceMetrics {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "value"])?;
        for (name, v) in [
            ("mae_fx_normalized", self.axis_mae[0]),
            ("mae_fy_normalized", self.axis_mae[1]),
            ("mae_fz_normalized", self.axis_mae[2]),
            ("magnitude_mae_newton", self.magnitude_mae_n),
            ("magnitude_std_newton", self.magnitude_std_n),
        ] {
            w.write_record([name.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes per-axis histograms as `axis,bin,lower,upper,count`.
pub fn write_histograms_csv<W: Write>(out: W, histograms: &[Histogram; 3]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "bin", "lower", "upper", "count"])?;
    for (axis, h) in ["fx", "fy", "fz"].iter().zip(histograms) {
        for (b, &c) in h.counts.iter().enumerate() {
            w.write_record([
                axis.to_string(),
                b.to_string(),
                h.edges[b].to_string(),
                h.edges[b + 1].to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
