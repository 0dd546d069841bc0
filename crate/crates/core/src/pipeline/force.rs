use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ordered_mean, ordered_std, ForceMetrics, Histogram};
use super::scaler::ForceScaler;
use super::train::{fit, init_seed, TrainConfig};
use crate::imaging::{preprocess_frame, MODEL_HEIGHT, MODEL_WIDTH};
use crate::nncore::{init_params, Loss, Matrix2D, MlpParams, MlpSpec};
use crate::pawsim::ForceSample;
use crate::{Error, Result};

/// Bins of the per-axis error histograms.
pub const HISTOGRAM_BINS: usize = 50;

/// One preprocessed frame and its force label in newtons.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceExample {
    pub input: Vec<f32>,
    pub force_n: [f32; 3],
}

impl ForceExample {
    pub fn from_sample(sample: &ForceSample) -> Result<Self> {
        Ok(Self {
            input: preprocess_frame(&sample.image)?,
            force_n: sample.force_n,
        })
    }
}

/// Preprocesses a batch of rendered samples in parallel.
pub fn force_examples(samples: &[ForceSample]) -> Result<Vec<ForceExample>> {
    samples.par_iter().map(ForceExample::from_sample).collect()
}

fn input_matrix(examples: &[ForceExample], dim: usize) -> Result<Matrix2D> {
    let mut data = Vec::with_capacity(examples.len() * dim);
    for (i, e) in examples.iter().enumerate() {
        if e.input.len() != dim {
            return Err(Error::Dimension(format!(
                "example {i} has {} inputs, model expects {dim}",
                e.input.len()
            )));
        }
        data.extend_from_slice(&e.input);
    }
    Matrix2D::from_vec(examples.len(), dim, data)
}

fn target_matrix(examples: &[ForceExample], scaler: &ForceScaler) -> Result<Matrix2D> {
    let data = examples
        .iter()
        .flat_map(|e| scaler.normalize(e.force_n))
        .collect();
    Matrix2D::from_vec(examples.len(), 3, data)
}

/// Mean absolute error over all entries, order independent.
fn matrix_mae(pred: &Matrix2D, truth: &Matrix2D) -> f64 {
    let diffs: Vec<f64> = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(&p, &t)| (p as f64 - t as f64).abs())
        .collect();
    ordered_mean(&diffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

impl History {
    pub fn best_val_mae(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e].val_mae)
    }

    /// CSV with `epoch,train_mae,val_mae`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.epochs {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForceTraining {
    pub params: MlpParams,
    pub scaler: ForceScaler,
    pub history: History,
}

/// Trains a force regressor with MAE loss on normalized labels and keeps the
/// parameters of the epoch with the lowest validation MAE.
pub fn train_force(
    spec: &MlpSpec,
    train: &[ForceExample],
    val: &[ForceExample],
    scaler: &ForceScaler,
    config: &TrainConfig,
    seed: u64,
) -> Result<ForceTraining> {
    spec.validate()?;
    if spec.output_dim != 3 {
        return Err(Error::Config(format!(
            "force model needs 3 outputs, spec has {}",
            spec.output_dim
        )));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Validation(format!(
            "force training needs non-empty train and validation sets ({} / {})",
            train.len(),
            val.len()
        )));
    }
    let x_train = input_matrix(train, spec.input_dim)?;
    let y_train = target_matrix(train, scaler)?;
    let x_val = input_matrix(val, spec.input_dim)?;
    let y_val = target_matrix(val, scaler)?;

    let mut params: MlpParams = init_params(spec, init_seed(seed))?;
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut history = History::default();
    fit(
        &mut params,
        &x_train,
        &y_train,
        Loss::Mae,
        config,
        seed,
        |epoch, p| {
            let train_mae = matrix_mae(&p.predict(&x_train)?, &y_train);
            let val_mae = matrix_mae(&p.predict(&x_val)?, &y_val);
            if !val_mae.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "validation error is not finite".into(),
                });
            }
            history.epochs.push(EpochRecord {
                epoch,
                train_mae,
                val_mae,
            });
            if val_mae < best_val {
                best_val = val_mae;
                best = p.clone();
                history.best_epoch = Some(epoch);
            }
            Ok(())
        },
    )?;
    Ok(ForceTraining {
        params: best,
        scaler: *scaler,
        history,
    })
}

/// Test metrics plus the per-axis absolute error histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceEvaluation {
    pub metrics: ForceMetrics,
    pub histograms: [Histogram; 3],
}

fn norm(v: [f32; 3]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

/// Metrics from normalized predictions against newton labels.
pub fn force_metrics(
    predicted: &[[f32; 3]],
    truth_n: &[[f32; 3]],
    scaler: &ForceScaler,
) -> Result<ForceEvaluation> {
    if predicted.len() != truth_n.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth_n.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    let mut axis_err: [Vec<f64>; 3] = Default::default();
    let mut mag_err = Vec::with_capacity(predicted.len());
    for (p, t) in predicted.iter().zip(truth_n) {
        let tn = scaler.normalize(*t);
        for a in 0..3 {
            axis_err[a].push((p[a] as f64 - tn[a] as f64).abs());
        }
        mag_err.push((norm(scaler.denormalize(*p)) - norm(*t)).abs());
    }
    Ok(ForceEvaluation {
        metrics: ForceMetrics {
            axis_mae: [0, 1, 2].map(|a| ordered_mean(&axis_err[a])),
            magnitude_mae_n: ordered_mean(&mag_err),
            magnitude_std_n: ordered_std(&mag_err),
        },
        histograms: [0, 1, 2].map(|a| Histogram::uniform(&axis_err[a], HISTOGRAM_BINS)),
    })
}

/// Normalized predictions of `params` for every example.
pub fn predict_forces(params: &MlpParams, examples: &[ForceExample]) -> Result<Vec<[f32; 3]>> {
    let out = params.predict(&input_matrix(examples, params.spec.input_dim)?)?;
    Ok(out.iter_rows().map(|r| [r[0], r[1], r[2]]).collect())
}

pub fn evaluate_force(
    params: &MlpParams,
    scaler: &ForceScaler,
    test: &[ForceExample],
) -> Result<ForceEvaluation> {
    if test.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    let truth: Vec<[f32; 3]> = test.iter().map(|e| e.force_n).collect();
    force_metrics(&predict_forces(params, test)?, &truth, scaler)
}

/// Mean wall-clock microseconds of a single-sample forward pass.
pub fn mean_inference_micros(params: &MlpParams, input: &[f32], reps: usize) -> Result<f64> {
    let x = Matrix2D::from_vec(1, input.len(), input.to_vec())?;
    params.predict(&x)?;
    let reps = reps.max(1);
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(params.predict(std::hint::black_box(&x))?);
    }
    Ok(start.elapsed().as_secs_f64() * 1e6 / reps as f64)
}

/// Grid over hidden structures, learning rates and dropout rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceGrid {
    /// Hidden widths per candidate; covers layer count and neurons per layer.
    pub hidden: Vec<Vec<usize>>,
    pub learning_rates: Vec<f64>,
    pub dropouts: Vec<f32>,
    pub l2_lambda: f32,
}

impl ForceGrid {
    /// Every combination in row-major order (hidden, learning rate, dropout).
    pub fn candidates(&self) -> Vec<(Vec<usize>, f64, f32)> {
        let mut out = Vec::new();
        for h in &self.hidden {
            for &lr in &self.learning_rates {
                for &d in &self.dropouts {
                    out.push((h.clone(), lr, d));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Position in [`ForceGrid::candidates`].
    pub index: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub dropout: f32,
    pub param_count: usize,
    pub val_mae: f64,
    pub best_epoch: Option<usize>,
    pub infer_micros: f64,
}

/// Trains every grid candidate with the same seed and data, and returns the
/// trials sorted by validation MAE (grid order on ties).
pub fn grid_search_force(
    grid: &ForceGrid,
    train: &[ForceExample],
    val: &[ForceExample],
    scaler: &ForceScaler,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<Trial>> {
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let mut trials: Vec<Trial> = candidates
        .into_par_iter()
        .enumerate()
        .map(|(index, (hidden, lr, dropout))| {
            let spec = MlpSpec::force(MODEL_HEIGHT, MODEL_WIDTH, &hidden)
                .with_dropout(dropout)
                .with_l2(grid.l2_lambda);
            let cfg = config.with_learning_rate(lr);
            let run = train_force(&spec, train, val, scaler, &cfg, seed)?;
            let val_mae = run.history.best_val_mae().unwrap_or(f64::INFINITY);
            Ok(Trial {
                index,
                hidden,
                learning_rate: lr,
                dropout,
                param_count: spec.param_count(),
                val_mae,
                best_epoch: run.history.best_epoch,
                infer_micros: 0.0,
            })
        })
        .collect::<Result<_>>()?;
    // timed one at a time so trials do not compete for cores
    for t in &mut trials {
        let spec = MlpSpec::force(MODEL_HEIGHT, MODEL_WIDTH, &t.hidden);
        let params: MlpParams = init_params(&spec, init_seed(seed))?;
        t.infer_micros = mean_inference_micros(&params, &val[0].input, 200)?;
    }
    trials.sort_by(|a, b| a.val_mae.total_cmp(&b.val_mae).then(a.index.cmp(&b.index)));
    Ok(trials)
}

/// Fixed-width table of ranked trials.
pub fn format_trials(trials: &[Trial]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4}  {:<16} {:>8} {:>7} {:>8} {:>9} {:>10} {:>10}",
        "rank", "hidden", "lr", "dropout", "params", "size_kb", "val_mae", "infer_us"
    );
    for (rank, t) in trials.iter().enumerate() {
        let hidden = t
            .hidden
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("-");
        let _ = writeln!(
            s,
            "{:>4}  {:<16} {:>8.0e} {:>7.2} {:>8} {:>9.3} {:>10.5} {:>10.1}",
            rank + 1,
            hidden,
            t.learning_rate,
            t.dropout,
            t.param_count,
            t.param_count as f64 * 4.0 / 1000.0,
            t.val_mae,
            t.infer_micros
        );
    }
    s
}
