use serde::{Deserialize, Serialize};

use super::{auc, TuningError};
use crate::rng::keyed_hash;
use crate::stats::{mean, sd};
use crate::table::FeatureTable;
use crate::trip_store::Vin;

/// Stratified fold assignment keyed by vin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold of each row, in table order.
    pub folds: Vec<usize>,
}

impl CvPlan {
    /// Within each class, rows are ranked by a seeded hash of their vin and
    /// dealt to folds in turn: positives first, then negatives continuing
    /// the same rotation. Fold sizes and per-fold positive counts each
    /// differ by at most one, and a vin's fold does not depend on row order.
    pub fn stratified(ids: &[Vin], y: &[u8], k: usize, seed: u64) -> Result<Self, TuningError> {
        if k < 2 || k > ids.len() {
            return Err(TuningError::BadPlan(format!("{k} folds for {} rows", ids.len())));
        }
        let mut folds = vec![0; ids.len()];
        let mut turn = 0;
        for class in [1u8, 0] {
            let mut rows: Vec<usize> = (0..ids.len()).filter(|&i| y[i] == class).collect();
            rows.sort_by_key(|&i| (keyed_hash(seed, ids[i].as_str()), ids[i].clone()));
            for i in rows {
                folds[i] = turn % k;
                turn += 1;
            }
        }
        Ok(CvPlan { k, seed, folds })
    }

    pub fn for_table(table: &FeatureTable, k: usize, seed: u64) -> Result<Self, TuningError> {
        Self::stratified(table.row_ids(), table.response(), k, seed)
    }

    /// Training and held-out rows of fold `f`, each sorted by vin so that
    /// fits do not depend on the input row order.
    pub fn split(&self, ids: &[Vin], f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = (0..self.folds.len()).filter(|&i| self.folds[i] != f).collect();
        let mut test: Vec<usize> = (0..self.folds.len()).filter(|&i| self.folds[i] == f).collect();
        train.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        test.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        (train, test)
    }

    pub fn check(&self, table: &FeatureTable) -> Result<(), TuningError> {
        if self.folds.len() != table.n_rows() {
            return Err(TuningError::BadPlan("plan does not match table".into()));
        }
        let y = table.response();
        for f in 0..self.k {
            let pos = (0..y.len()).filter(|&i| self.folds[i] == f && y[i] == 1).count();
            let all = self.folds.iter().filter(|&&g| g == f).count();
            if pos == 0 || pos == all {
                return Err(TuningError::FoldSingleClass { fold: f });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub fold_aucs: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl CvScore {
    pub fn from_folds(fold_aucs: Vec<f64>) -> Self {
        CvScore {
            mean: mean(&fold_aucs),
            sd: sd(&fold_aucs),
            fold_aucs,
        }
    }
}

/// k-fold AUC of a fit-and-score procedure. `procedure(train, held_out)`
/// must fit everything (recipe included) on `train` and return one score
/// per held-out row.
pub fn cv_auc<F, E>(table: &FeatureTable, plan: &CvPlan, procedure: F) -> Result<CvScore, TuningError>
where
    F: Fn(&FeatureTable, &FeatureTable) -> Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display,
{
    use rayon::prelude::*;
    plan.check(table)?;
    let ids = table.row_ids();
    let aucs = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (tr, te) = plan.split(ids, f);
            let train = table.select_rows(&tr);
            let held = table.select_rows(&te);
            let scores = procedure(&train, &held).map_err(|e| TuningError::Fit(e.to_string()))?;
            auc(&scores, held.response())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvScore::from_folds(aucs))
}
