//! Small descriptive statistics and Welch's two-sample t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::table::{FeatureTable, TableError};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least two observations (got {0} and {1})")]
    TooSmall(usize, usize),
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("non-finite value in sample")]
    NonFinite,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Median; the even case averages the two middle order statistics.
pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

pub fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile (R type 7) of a sorted sample.
pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Welch unequal-variance t-test with a two-sided p-value.
pub fn welch_t_test(group0: &[f64], group1: &[f64]) -> Result<WelchTest, StatsError> {
    let (n0, n1) = (group0.len(), group1.len());
    if n0 < 2 || n1 < 2 {
        return Err(StatsError::TooSmall(n0, n1));
    }
    if group0.iter().chain(group1).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (m0, m1) = (mean(group0), mean(group1));
    let v0 = sd(group0).powi(2) / n0 as f64;
    let v1 = sd(group1).powi(2) / n1 as f64;
    let se2 = v0 + v1;
    if se2 <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (m1 - m0) / se2.sqrt();
    let df = se2 * se2 / (v0 * v0 / (n0 as f64 - 1.0) + v1 * v1 / (n1 as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchTest { t, df, p_value })
}

/// Mean per response group and a Welch test, for one numeric column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub column: String,
    pub mean_non_claimants: f64,
    pub mean_claimants: f64,
    pub test: Option<WelchTest>,
}

/// Claimant vs non-claimant comparison for every numeric column of `table`
/// (missing values skipped).
pub fn compare_groups(table: &FeatureTable) -> Result<Vec<GroupComparison>, TableError> {
    let y = table.response();
    let mut out = Vec::new();
    for col in table.columns() {
        let Some(v) = col.as_numeric() else { continue };
        let (mut g0, mut g1) = (Vec::new(), Vec::new());
        for (x, &label) in v.iter().zip(y) {
            if x.is_finite() {
                if label == 1 { g1.push(*x) } else { g0.push(*x) }
            }
        }
        out.push(GroupComparison {
            column: col.name.clone(),
            mean_non_claimants: mean(&g0),
            mean_claimants: mean(&g1),
            test: welch_t_test(&g0, &g1).ok(),
        });
    }
    Ok(out)
}
