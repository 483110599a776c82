//! Telematics claim classification.
//!
//! The crate turns per-trip driving summaries into vehicle-level features,
//! prepares them with a train-only preprocessing recipe, fits penalized
//! logistic regressions and random forests, and runs the bootstrap study that
//! measures how much telematics history is needed before extra observation
//! stops improving the AUC.
//!
//! Modules follow the data flow:
//!
//! - [`trip_store`]: trip/contract CSV parsing and per-vehicle assembly
//! - [`featurize`]: the 14 telematics features, time/distance leaps, datasets
//! - [`table`]: the rectangular [`FeatureTable`](table::FeatureTable)
//! - [`recipe`]: lumping, GLM target encoding, bagged imputation,
//!   Yeo-Johnson, z-scores and pairwise interactions
//! - [`linear_models`]: IRLS and proximal-Newton elastic-net logistic fits
//! - [`forest`]: CART trees on Gini impurity and random forests
//! - [`tuning`]: AUC, stratified folds, grid search and GP Bayesian optimization
//! - [`study`]: bootstrap AUC distributions and the redundancy point
//! - [`synth`]: a synthetic fleet generator with a planted risk signal

pub mod featurize;
pub mod forest;
pub mod linear_models;
pub mod recipe;
pub mod rng;
pub mod stats;
pub mod study;
pub mod synth;
pub mod table;
pub mod trip_store;
pub mod tuning;

mod error;

pub use error::{Error, ErrorClass};
