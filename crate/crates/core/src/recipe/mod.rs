//! Train-only preprocessing.
//!
//! Fitting learns every statistic from the training rows; applying is a pure
//! function of those frozen statistics. The steps run in a fixed order:
//!
//! 1. categorical columns: lump rare levels into `other`, then replace each
//!    level by its GLM target encoding (they are numeric from here on);
//! 2. bagged-tree imputation of the configured columns (predictors are the
//!    complete numeric columns);
//! 3. Yeo-Johnson with a per-column maximum-likelihood exponent;
//! 4. z-scores (constant columns are dropped);
//! 5. optionally, pairwise products of the standardized sources, which are
//!    standardized again.

mod encode;
mod impute;
mod interactions;
mod power;
mod scale;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use encode::{lump_rare, target_encode_fit, CategoricalStep, OTHER};
pub use impute::{BagSpec, BaggedImputer};
pub use interactions::{expand_interactions, InteractionSet};
pub use power::{log_likelihood, yeo_johnson, yeo_johnson_fit, THETA_BOUNDS, THETA_TOL};
pub use scale::{zscore_apply, zscore_fit, ScaleStep};

use crate::table::{Column, ColumnDescriptor, ColumnKind, ColumnValues, FeatureTable, TableError};

#[derive(Debug, Error)]
pub enum RecipeError {
    #[error("column '{0}' has no observed values to impute from")]
    NoObserved(String),
    #[error("duplicate interaction source '{0}'")]
    DuplicateSource(String),
    #[error("column '{column}' has missing values and no imputation model")]
    Missing { column: String },
    #[error("input columns do not match the fitted recipe (expected {expected:?}, found {found:?})")]
    Schema {
        expected: Vec<ColumnDescriptor>,
        found: Vec<ColumnDescriptor>,
    },
    #[error("imputation failed: {0}")]
    Impute(String),
    #[error("interaction source '{0}' is not an output column")]
    UnknownSource(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeConfig {
    pub lump_threshold: f64,
    /// Columns imputed even when complete in training; any other training
    /// column with missing values is added.
    pub impute: Vec<String>,
    pub bag: BagSpec,
    /// Sources for pairwise interactions; `None` disables them.
    pub interactions: Option<Vec<String>>,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        RecipeConfig {
            lump_threshold: 0.05,
            impute: vec!["commute_distance".into()],
            bag: BagSpec::default(),
            interactions: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerStep {
    pub column: String,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionStep {
    pub set: InteractionSet,
    pub scale: Vec<ScaleStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedRecipe {
    pub input: Vec<ColumnDescriptor>,
    pub categorical: Vec<CategoricalStep>,
    pub imputers: Vec<BaggedImputer>,
    pub power: Vec<PowerStep>,
    pub scale: Vec<ScaleStep>,
    /// Columns with zero training variance after transformation.
    pub dropped: Vec<String>,
    pub interactions: Option<InteractionStep>,
    pub output: Vec<String>,
}

pub fn recipe_fit(train: &FeatureTable, config: &RecipeConfig) -> Result<FittedRecipe, RecipeError> {
    let y = train.response();

    // 1. lump + encode
    let categorical: Vec<CategoricalStep> = train
        .columns()
        .par_iter()
        .filter_map(|c| c.as_categorical().map(|v| (c, v)))
        .map(|(c, v)| CategoricalStep::fit(&c.name, v, y, config.lump_threshold))
        .collect();
    let mut cols = encode_columns(train, &categorical);

    // 2. impute
    let present: BTreeSet<&str> = cols.iter().map(|c| c.name.as_str()).collect();
    let mut targets: Vec<String> = Vec::new();
    for c in &cols {
        let listed = config.impute.iter().any(|n| *n == c.name);
        let incomplete = numeric(c).iter().any(|v| !v.is_finite());
        if listed || incomplete {
            targets.push(c.name.clone());
        }
    }
    targets.retain(|t| present.contains(t.as_str()));
    let predictor_idx: Vec<usize> = (0..cols.len()).filter(|&j| !targets.contains(&cols[j].name)).collect();
    let predictor_names: Vec<String> = predictor_idx.iter().map(|&j| cols[j].name.clone()).collect();
    let predictor_values: Vec<Vec<f64>> = predictor_idx.iter().map(|&j| numeric(&cols[j]).to_vec()).collect();
    let mut imputers = Vec::new();
    for (t, target) in targets.iter().enumerate() {
        let j = cols.iter().position(|c| &c.name == target).expect("present");
        let spec = BagSpec {
            seed: crate::rng::derive(config.bag.seed, t as u64),
            ..config.bag
        };
        let m = BaggedImputer::fit(target, numeric(&cols[j]), predictor_names.clone(), &predictor_values, &spec)?;
        let refs: Vec<&[f64]> = predictor_values.iter().map(Vec::as_slice).collect();
        let filled = m.impute(numeric(&cols[j]), &refs);
        cols[j].values = ColumnValues::Numeric(filled);
        imputers.push(m);
    }

    // 3. Yeo-Johnson
    let power: Vec<PowerStep> = cols
        .par_iter()
        .map(|c| PowerStep {
            column: c.name.clone(),
            theta: yeo_johnson_fit(numeric(c)),
        })
        .collect();
    for (c, p) in cols.iter_mut().zip(&power) {
        let v: Vec<f64> = numeric(c).iter().map(|&x| yeo_johnson(x, p.theta)).collect();
        c.values = ColumnValues::Numeric(v);
    }

    // 4. z-scores
    let mut scale = Vec::new();
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for mut c in cols {
        match zscore_fit(&c.name, numeric(&c)) {
            Some(s) => {
                c.values = ColumnValues::Numeric(zscore_apply(&s, numeric(&c)));
                scale.push(s);
                kept.push(c);
            }
            None => {
                log::warn!("dropping zero-variance column {}", c.name);
                dropped.push(c.name.clone());
            }
        }
    }

    // 5. interactions
    let interactions = match &config.interactions {
        None => None,
        Some(sources) => {
            if let Some(bad) = sources.iter().find(|s| !kept.iter().any(|c| &c.name == *s)) {
                return Err(RecipeError::UnknownSource(bad.clone()));
            }
            let set = InteractionSet::new(sources)?;
            let staged = train.with_columns(kept.clone())?;
            let mut iscale = Vec::new();
            for mut c in set.columns(&staged)? {
                match zscore_fit(&c.name, numeric(&c)) {
                    Some(s) => {
                        c.values = ColumnValues::Numeric(zscore_apply(&s, numeric(&c)));
                        iscale.push(s);
                        kept.push(c);
                    }
                    None => {
                        log::warn!("dropping zero-variance interaction {}", c.name);
                        dropped.push(c.name.clone());
                    }
                }
            }
            Some(InteractionStep { set, scale: iscale })
        }
    };

    Ok(FittedRecipe {
        input: train.descriptors(),
        categorical,
        imputers,
        power,
        scale,
        dropped,
        interactions,
        output: kept.iter().map(|c| c.name.clone()).collect(),
    })
}

fn numeric(c: &Column) -> &[f64] {
    c.as_numeric().expect("encoded columns are numeric")
}

fn encode_columns(table: &FeatureTable, steps: &[CategoricalStep]) -> Vec<Column> {
    table
        .columns()
        .iter()
        .map(|c| match c.as_categorical() {
            Some(v) => {
                let step = steps.iter().find(|s| s.column == c.name).expect("fitted per column");
                Column::numeric(c.name.clone(), c.origin, step.apply(v))
            }
            None => c.clone(),
        })
        .collect()
}

impl FittedRecipe {
    /// Transforms any rows with the frozen statistics.
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable, RecipeError> {
        let found = table.descriptors();
        let same = found.len() == self.input.len()
            && found
                .iter()
                .zip(&self.input)
                .all(|(a, b)| a.name == b.name && a.kind == b.kind);
        if !same {
            return Err(RecipeError::Schema {
                expected: self.input.clone(),
                found,
            });
        }
        let mut cols = encode_columns(table, &self.categorical);
        for m in &self.imputers {
            let preds: Vec<&[f64]> = m
                .predictors
                .iter()
                .map(|p| numeric(cols.iter().find(|c| &c.name == p).expect("schema checked")))
                .collect();
            let j = cols.iter().position(|c| c.name == m.target).expect("schema checked");
            let filled = m.impute(numeric(&cols[j]), &preds);
            cols[j].values = ColumnValues::Numeric(filled);
        }
        for c in &cols {
            if c.as_numeric().is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(RecipeError::Missing { column: c.name.clone() });
            }
        }
        for (c, p) in cols.iter_mut().zip(&self.power) {
            let v: Vec<f64> = numeric(c).iter().map(|&x| yeo_johnson(x, p.theta)).collect();
            c.values = ColumnValues::Numeric(v);
        }
        let mut out = Vec::with_capacity(self.output.len());
        for c in cols {
            if let Some(s) = self.scale.iter().find(|s| s.column == c.name) {
                out.push(Column::numeric(c.name.clone(), c.origin, zscore_apply(s, numeric(&c))));
            }
        }
        if let Some(step) = &self.interactions {
            let staged = table.with_columns(out.clone())?;
            for c in step.set.columns(&staged)? {
                if let Some(s) = step.scale.iter().find(|s| s.column == c.name) {
                    out.push(Column::numeric(c.name.clone(), c.origin, zscore_apply(s, numeric(&c))));
                }
            }
        }
        let t = table.with_columns(out)?;
        debug_assert!(t.descriptors().iter().all(|d| d.kind == ColumnKind::Numeric));
        Ok(t)
    }
}

pub fn recipe_apply(recipe: &FittedRecipe, table: &FeatureTable) -> Result<FeatureTable, RecipeError> {
    recipe.apply(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::ColumnOrigin;
    use crate::trip_store::Vin;

    fn ids(n: usize) -> Vec<Vin> {
        (0..n).map(|i| Vin::new(&format!("v{i:03}"))).collect()
    }

    fn mixed(n: usize) -> FeatureTable {
        let cat: Vec<String> = (0..n).map(|i| ["a", "b", "c"][i % 3].to_string()).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 3.0 + 4.0).collect();
        let mut m: Vec<f64> = (0..n).map(|i| 10.0 + (i % 7) as f64).collect();
        m[3] = f64::NAN;
        m[8] = f64::NAN;
        let y = (0..n).map(|i| u8::from(i % 4 == 0 || i % 6 == 1)).collect();
        FeatureTable::new(
            ids(n),
            vec![
                Column::categorical("g", ColumnOrigin::Classical, cat),
                Column::numeric("x", ColumnOrigin::Telematics, x),
                Column::numeric("commute_distance", ColumnOrigin::Classical, m),
            ],
            y,
        )
        .unwrap()
    }

    #[test]
    fn output_is_complete_and_standardized() {
        let t = mixed(60);
        let r = recipe_fit(&t, &RecipeConfig::default()).unwrap();
        let out = r.apply(&t).unwrap();
        assert_eq!(out.column_names(), ["g", "x", "commute_distance"]);
        for c in out.columns() {
            let v = c.as_numeric().unwrap();
            assert!(v.iter().all(|x| x.is_finite()));
            assert!(crate::stats::mean(v).abs() < 1e-12);
            assert!((crate::stats::sd(v) - 1.0).abs() < 1e-12);
        }
        assert_eq!(r.apply(&t).unwrap(), out);
    }

    #[test]
    fn numeric_only_recipe_is_power_and_scale() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
        let t = FeatureTable::new(
            ids(30),
            vec![Column::numeric("x", ColumnOrigin::Telematics, x.clone())],
            (0..30).map(|i| u8::from(i % 2 == 0)).collect(),
        )
        .unwrap();
        let config = RecipeConfig {
            impute: vec![],
            ..RecipeConfig::default()
        };
        let r = recipe_fit(&t, &config).unwrap();
        assert!(r.imputers.is_empty() && r.categorical.is_empty());
        let theta = yeo_johnson_fit(&x);
        let psi: Vec<f64> = x.iter().map(|&v| yeo_johnson(v, theta)).collect();
        let s = zscore_fit("x", &psi).unwrap();
        assert_eq!(r.apply(&t).unwrap().numeric("x").unwrap(), zscore_apply(&s, &psi));
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let t = mixed(30);
        let r = recipe_fit(&t, &RecipeConfig::default()).unwrap();
        let other = t.select_columns(&["x".into()]).unwrap();
        assert!(matches!(r.apply(&other), Err(RecipeError::Schema { .. })));
    }

    #[test]
    fn interactions_are_standardized() {
        let t = mixed(60);
        let config = RecipeConfig {
            interactions: Some(vec!["x".into(), "g".into(), "commute_distance".into()]),
            ..RecipeConfig::default()
        };
        let r = recipe_fit(&t, &config).unwrap();
        let out = r.apply(&t).unwrap();
        assert_eq!(out.n_cols(), 6);
        let v = out.numeric("g:x").unwrap();
        assert!((crate::stats::sd(v) - 1.0).abs() < 1e-12);
    }
}
