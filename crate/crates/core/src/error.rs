use thiserror::Error;

use crate::featurize::FeatureError;
use crate::forest::ForestError;
use crate::linear_models::LinearError;
use crate::recipe::RecipeError;
use crate::stats::StatsError;
use crate::study::StudyError;
use crate::synth::SynthError;
use crate::table::TableError;
use crate::trip_store::TripStoreError;
use crate::tuning::TuningError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    TripStore(#[from] TripStoreError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Recipe(#[from] RecipeError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure categories (they map to process exit codes).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Linear(
                LinearError::NonConvergence { .. } | LinearError::Separation { .. } | LinearError::RankDeficient,
            )
            | Error::Tuning(TuningError::Gp | TuningError::AllFailed)
            | Error::Stats(StatsError::ZeroVariance | StatsError::NonFinite) => ErrorClass::Numerical,
            Error::Linear(LinearError::BadPenalty { .. })
            | Error::Forest(ForestError::BadSpec(_))
            | Error::Feature(FeatureError::BadLeap(_) | FeatureError::BadFraction(_))
            | Error::Tuning(TuningError::Budget { .. } | TuningError::BadBounds | TuningError::BadPlan(_))
            | Error::Synth(SynthError::Config(_)) => ErrorClass::Usage,
            Error::Study(StudyError::Stage { source, .. }) => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
