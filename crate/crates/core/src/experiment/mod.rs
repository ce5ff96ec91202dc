//! Stratified k-fold cross-validation, grid search and reporting.

pub mod cv;
pub mod folds;
pub mod report;

pub use cv::{
    cross_validate, default_grid, fit_fold, fold_seed, grid_search, parse_grid, select_best, CvResult,
    GridResult,
};
pub use folds::{stratified_kfold, FoldAssignment, DEFAULT_FOLDS};
pub use report::{
    folds_seed, grid_seed, run_experiment, ExperimentConfig, ExperimentReport, ModelGrid, ModelResult,
    RosterEntry,
};
