//! Dataset statistics, lexicon intensity, significance tests, cross
//! validation and the experiment grid.

pub mod cv;
pub mod grid;
pub mod lci;
pub mod stats;
pub mod ttest;

pub use cv::{
    cross_validate, cross_validate_inputs, stratified_folds, CvOptions, CvResult, FoldResult,
    Inputs, MeanStd, MetricSummary, Metrics, ModelSpec, DEFAULT_FOLDS,
};
pub use grid::{
    run_experiment_grid, variant_features, write_grid_csv, GridConfig, GridReport, VARIANTS,
};
pub use lci::{build_digest, lci, lci_across_datasets, lci_analysis, CategoryLexicon, LciReport};
pub use stats::{dataset_stats, level_distribution, user_stats, DatasetStats, UserStats};
pub use ttest::{mean, paired_t, sample_std, welch_t, TTest};
