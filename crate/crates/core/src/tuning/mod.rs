//! AUC, stratified cross-validation, the penalty grid search and Gaussian
//! process tuning of the forest.

mod cv;
mod gp;
mod grid;
mod metrics;

use thiserror::Error;

pub use cv::{cv_auc, CvPlan, CvScore};
pub use gp::{
    bayes_opt, bayes_opt_forest, expected_improvement, log_marginal_likelihood, BayesOptions, BayesTrace,
    ForestTuning, Gp, IntBox, KernelParams, NOISE, XI,
};
pub use grid::{
    grid_search_glm, lambda_grid, lambda_value, select, Candidate, GridConfig, Hyper, TuneResult, ALPHA_GRID,
    GRID_SIZE, TIE_TOL,
};
pub use metrics::auc;

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("AUC needs both classes among the labels")]
    SingleClass,
    #[error("{scores} scores for {labels} labels")]
    Length { scores: usize, labels: usize },
    #[error("NaN score")]
    NanScore,
    #[error("fold {fold} holds a single class; use a stratified plan or fewer folds")]
    FoldSingleClass { fold: usize },
    #[error("invalid cross-validation plan: {0}")]
    BadPlan(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("every candidate failed")]
    AllFailed,
    #[error("budget {budget} is smaller than the initial design {initial}")]
    Budget { budget: usize, initial: usize },
    #[error("invalid integer bounds")]
    BadBounds,
    #[error("Gaussian-process kernel matrix is not positive definite")]
    Gp,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
