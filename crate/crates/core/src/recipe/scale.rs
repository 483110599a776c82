//! z-scores with training statistics.

use serde::{Deserialize, Serialize};

use crate::stats::{mean, sd};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleStep {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
}

/// Training mean and n-1 standard deviation; `None` when the sd is zero up
/// to rounding.
pub fn zscore_fit(column: &str, x: &[f64]) -> Option<ScaleStep> {
    let m = mean(x);
    let s = sd(x);
    (s > 1e-12 * m.abs() && s > 0.0 && s.is_finite()).then(|| ScaleStep {
        column: column.to_string(),
        mean: m,
        sd: s,
    })
}

pub fn zscore_apply(step: &ScaleStep, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| (v - step.mean) / step.sd).collect()
}
