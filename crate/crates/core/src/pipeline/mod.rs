//! Training, evaluation and data-partitioning for both sensing channels.

mod force;
mod gnb;
mod metrics;
mod scaler;
mod split;
mod terrain;
mod train;

pub use force::{
    evaluate_force, force_examples, force_metrics, format_trials, grid_search_force,
    mean_inference_micros, predict_forces, train_force, EpochRecord, ForceEvaluation, ForceExample,
    ForceGrid, ForceTraining, History, Trial, HISTOGRAM_BINS,
};
pub use gnb::{argmax, GaussianNb, GNB_VAR_FLOOR};
pub use metrics::{write_histograms_csv, ConfusionMatrix, ForceMetrics, Histogram};
pub use scaler::ForceScaler;
pub use split::{split, split_indices, stratified_kfold, FoldAssignment, Split, SplitSpec};
pub use terrain::{
    classify, classify_probabilities, evaluate_terrain, terrain_features, train_classifier,
    train_terrain, TerrainFeatureConfig, TerrainTraining,
};
pub use train::TrainConfig;
