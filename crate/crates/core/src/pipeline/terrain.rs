use rayon::prelude::*;

use super::gnb::argmax;
use super::metrics::{ordered_mean, ordered_std, ConfusionMatrix};
use super::split::FoldAssignment;
use super::train::{fit, init_seed, TrainConfig};
use crate::dsp::{truncate_to_impact, MfccConfig, MfccExtractor, IMPACT_WINDOW_MS};
use crate::nncore::{init_params, Loss, Matrix2D, MlpParams, MlpSpec, OutputActivation};
use crate::pawsim::{derive_seed, TerrainSample};
use crate::{Error, Result};

/// Feature settings for terrain clips.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TerrainFeatureConfig {
    pub window_ms: f64,
    pub mfcc: MfccConfig,
}

impl Default for TerrainFeatureConfig {
    fn default() -> Self {
        Self {
            window_ms: IMPACT_WINDOW_MS,
            mfcc: MfccConfig::default(),
        }
    }
}

/// Impact window followed by frame-averaged MFCCs, one row per clip.
pub fn terrain_features(
    samples: &[TerrainSample],
    config: &TerrainFeatureConfig,
) -> Result<Vec<Vec<f32>>> {
    let extractor = MfccExtractor::new(config.mfcc.clone())?;
    samples
        .par_iter()
        .map(|s| {
            let clip = truncate_to_impact(&s.clip, config.window_ms)?;
            Ok(extractor.extract(&clip)?.0)
        })
        .collect()
}

fn feature_matrix<R: AsRef<[f32]>>(rows: &[R], dim: usize) -> Result<Matrix2D> {
    let mut data = Vec::with_capacity(rows.len() * dim);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::Dimension(format!(
                "feature row {i} has {} values, model expects {dim}",
                r.len()
            )));
        }
        data.extend_from_slice(r);
    }
    Matrix2D::from_vec(rows.len(), dim, data)
}

fn one_hot(labels: &[usize], n_classes: usize) -> Result<Matrix2D> {
    let mut m = Matrix2D::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::Validation(format!(
                "label {l} >= {n_classes} classes"
            )));
        }
        m.set(i, l, 1.0);
    }
    Ok(m)
}

fn check_spec(spec: &MlpSpec) -> Result<()> {
    spec.validate()?;
    if spec.output_activation != OutputActivation::Softmax {
        return Err(Error::Config("terrain model needs a softmax output".into()));
    }
    Ok(())
}

/// Trains a classifier on all given rows with cross-entropy and returns the
/// final-epoch parameters.
pub fn train_classifier<R: AsRef<[f32]>>(
    spec: &MlpSpec,
    features: &[R],
    labels: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<MlpParams> {
    check_spec(spec)?;
    let x = feature_matrix(features, spec.input_dim)?;
    let y = one_hot(labels, spec.output_dim)?;
    let mut params: MlpParams = init_params(spec, init_seed(seed))?;
    fit(
        &mut params,
        &x,
        &y,
        Loss::CrossEntropy,
        config,
        seed,
        |_, _| Ok(()),
    )?;
    Ok(params)
}

/// Class probabilities, one row per input.
pub fn classify_probabilities<R: AsRef<[f32]>>(
    params: &MlpParams,
    features: &[R],
) -> Result<Matrix2D> {
    params.predict(&feature_matrix(features, params.spec.input_dim)?)
}

pub fn classify<R: AsRef<[f32]>>(params: &MlpParams, features: &[R]) -> Result<Vec<usize>> {
    let p = classify_probabilities(params, features)?;
    Ok(p.iter_rows().map(argmax).collect())
}

pub fn evaluate_terrain<R: AsRef<[f32]>>(
    params: &MlpParams,
    features: &[R],
    labels: &[usize],
) -> Result<(f64, ConfusionMatrix)> {
    if features.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    let predicted = classify(params, features)?;
    let m = ConfusionMatrix::from_pairs(params.spec.output_dim, labels, &predicted)?;
    Ok((m.accuracy(), m))
}

#[derive(Debug, Clone)]
pub struct TerrainTraining {
    pub fold_params: Vec<MlpParams>,
    pub fold_accuracies: Vec<f64>,
    pub cv_mean: f64,
    /// Population standard deviation over folds.
    pub cv_std: f64,
    /// Retrained on every sample.
    pub final_params: MlpParams,
}

/// K-fold cross-validation followed by a final fit on all rows.
pub fn train_terrain<R: AsRef<[f32]> + Sync>(
    spec: &MlpSpec,
    features: &[R],
    labels: &[usize],
    folds: &FoldAssignment,
    config: &TrainConfig,
    seed: u64,
) -> Result<TerrainTraining> {
    check_spec(spec)?;
    if folds.fold_of.len() != features.len() || labels.len() != features.len() {
        return Err(Error::Dimension(format!(
            "{} features, {} labels, {} fold assignments",
            features.len(),
            labels.len(),
            folds.fold_of.len()
        )));
    }
    let per_fold: Vec<(MlpParams, f64)> = (0..folds.k)
        .into_par_iter()
        .map(|fold| {
            let train_idx = folds.training_indices(fold);
            let val_idx = folds.validation_indices(fold);
            let pick = |idx: &[usize]| -> (Vec<&[f32]>, Vec<usize>) {
                (
                    idx.iter().map(|&i| features[i].as_ref()).collect(),
                    idx.iter().map(|&i| labels[i]).collect(),
                )
            };
            let (xv, yv) = pick(&val_idx);
            if train_idx.is_empty() {
                // a single fold has nothing held out: fit and score on everything
                let p = train_classifier(spec, &xv, &yv, config, derive_seed(seed, fold as u64))?;
                let acc = evaluate_terrain(&p, &xv, &yv)?.0;
                return Ok((p, acc));
            }
            let (xt, yt) = pick(&train_idx);
            let p = train_classifier(spec, &xt, &yt, config, derive_seed(seed, fold as u64))?;
            let acc = evaluate_terrain(&p, &xv, &yv)?.0;
            Ok((p, acc))
        })
        .collect::<Result<_>>()?;
    let final_params =
        train_classifier(spec, features, labels, config, derive_seed(seed, u64::MAX))?;
    let fold_accuracies: Vec<f64> = per_fold.iter().map(|f| f.1).collect();
    Ok(TerrainTraining {
        cv_mean: ordered_mean(&fold_accuracies),
        cv_std: ordered_std(&fold_accuracies),
        fold_accuracies,
        fold_params: per_fold.into_iter().map(|f| f.0).collect(),
        final_params,
    })
}
