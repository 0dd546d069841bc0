use std::f64::consts::PI;

use crate::{Error, Result};

pub const GNB_VAR_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with per-class, per-feature normal likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
    log_priors: Vec<f64>,
}

impl GaussianNb {
    /// Maximum-likelihood fit; every class in `0..n_classes` needs at least
    /// two samples.
    pub fn fit<R: AsRef<[f32]>>(
        features: &[R],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features.first().map_or(0, |r| r.as_ref().len());
        if dim == 0 {
            return Err(Error::Validation("no features to fit".into()));
        }
        let mut counts = vec![0usize; n_classes];
        let mut sums = vec![vec![0.0f64; dim]; n_classes];
        for (row, &label) in features.iter().zip(labels) {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Dimension("ragged feature rows".into()));
            }
            if label >= n_classes {
                return Err(Error::Validation(format!(
                    "label {label} >= {n_classes} classes"
                )));
            }
            counts[label] += 1;
            for (s, &x) in sums[label].iter_mut().zip(row) {
                *s += x as f64;
            }
        }
        if let Some(c) = counts.iter().position(|&n| n < 2) {
            return Err(Error::Validation(format!(
                "class {c} has {} samples; naive Bayes needs at least 2",
                counts[c]
            )));
        }
        let means: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| s.iter().map(|v| v / n as f64).collect())
            .collect();
        let mut vars = vec![vec![0.0f64; dim]; n_classes];
        for (row, &label) in features.iter().zip(labels) {
            for ((v, &x), m) in vars[label].iter_mut().zip(row.as_ref()).zip(&means[label]) {
                *v += (x as f64 - m).powi(2);
            }
        }
        for (v, &n) in vars.iter_mut().zip(&counts) {
            for x in v.iter_mut() {
                *x = (*x / n as f64).max(GNB_VAR_FLOOR);
            }
        }
        let total = labels.len() as f64;
        Ok(Self {
            means,
            vars,
            log_priors: counts.iter().map(|&n| (n as f64 / total).ln()).collect(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.log_priors.len()
    }

    /// Unnormalized log posterior of every class.
    pub fn log_posteriors(&self, x: &[f32]) -> Vec<f64> {
        self.log_priors
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(&prior, (mu, var))| {
                prior
                    + x.iter()
                        .zip(mu.iter().zip(var))
                        .map(|(&xi, (&m, &v))| {
                            -0.5 * (2.0 * PI * v).ln() - (xi as f64 - m).powi(2) / (2.0 * v)
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    /// Most probable class; the lowest index wins ties.
    pub fn classify(&self, x: &[f32]) -> usize {
        argmax(&self.log_posteriors(x))
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_classes() {
        let x = [[-5.0f32], [-4.0], [-6.0], [5.0], [4.0], [6.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let nb = GaussianNb::fit(&x, &y, 2).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(nb.classify(row), label);
        }
    }

    #[test]
    fn identical_likelihoods_fall_back_to_prior() {
        let x = [[0.0f32], [2.0], [0.0], [2.0], [0.0], [2.0]];
        let nb = GaussianNb::fit(&x, &[1, 1, 1, 1, 0, 0], 2).unwrap();
        assert_eq!(nb.classify(&[1.0]), 1);
        let nb = GaussianNb::fit(&x, &[0, 0, 0, 0, 1, 1], 2).unwrap();
        assert_eq!(nb.classify(&[1.0]), 0);
        // equal priors too: lowest index
        let nb = GaussianNb::fit(&x[..4], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(nb.classify(&[1.0]), 0);
    }

    #[test]
    fn hand_computed_toy() {
        // class 0: (0,0), (2,2) → mean (1,1), var (1,1)
        // class 1: (4,0), (6,4) → mean (5,2), var (1,4)
        let x = [[0.0f32, 0.0], [2.0, 2.0], [4.0, 0.0], [6.0, 4.0]];
        let nb = GaussianNb::fit(&x, &[0, 0, 1, 1], 2).unwrap();
        let q = [3.0f32, 1.0];
        let ln2pi = (2.0 * PI).ln();
        // class 0: ln .5 − ln2π − (4 + 0)/2
        let c0 = 0.5f64.ln() - 0.5 * ln2pi - 2.0 - 0.5 * ln2pi - 0.0;
        // class 1: ln .5 − ½ln2π − 4/2 − ½ln(8π) − 1/8
        let c1 = 0.5f64.ln() - 0.5 * ln2pi - 2.0 - 0.5 * (8.0 * PI).ln() - 1.0 / 8.0;
        let lp = nb.log_posteriors(&q);
        assert!((lp[0] - c0).abs() < 1e-12, "{} vs {c0}", lp[0]);
        assert!((lp[1] - c1).abs() < 1e-12, "{} vs {c1}", lp[1]);
        assert_eq!(nb.classify(&q), if c0 >= c1 { 0 } else { 1 });
    }

    #[test]
    fn degenerate_counts() {
        let x = [[0.0f32], [1.0], [2.0]];
        assert!(GaussianNb::fit(&x, &[0, 0, 1], 2).is_err());
        assert!(GaussianNb::fit(&x, &[0, 0, 0], 2).is_err());
    }

    #[test]
    fn variance_floor() {
        let x = [[1.0f32], [1.0], [3.0], [3.0]];
        let nb = GaussianNb::fit(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(nb.classify(&[1.0]), 0);
        assert!(nb.log_posteriors(&[1.0]).iter().all(|v| v.is_finite()));
    }
}
