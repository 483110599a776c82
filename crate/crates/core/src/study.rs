//! The leap study: for every dataset `D_0 .. D_12` of a method, tune a lasso
//! by cross-validation on the training part, refit it, and describe its test
//! AUC by a bootstrap distribution. The redundancy point is the first `k`
//! after which the median AUC stops improving by more than `delta`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::{build_dataset, LeapMethod, LeapSpec, VinPartition, MAX_LEAP};
use crate::linear_models::{fit_penalized_design, GlmModel, PenaltySpec, SolverOptions, WarmStart};
use crate::recipe::{recipe_fit, RecipeConfig};
use crate::rng;
use crate::stats::{median, quantile_sorted};
use crate::table::ColumnOrigin;
use crate::trip_store::{VehicleContract, Vin};
use crate::tuning::{auc, grid_search_glm, lambda_grid, CvPlan, GridConfig, Hyper, TuneResult};
use crate::Error;

/// Consecutive single-class resamples tolerated before giving up.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("dataset {id}: {source}")]
    Stage {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("more than {MAX_REDRAWS} consecutive bootstrap resamples held a single class")]
    Redraws,
    #[error("bootstrap needs both classes in the test rows")]
    SingleClassTest,
    #[error("expected {expected} distributions, got {found}")]
    Distributions { expected: usize, found: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How bootstrap resamples are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resampler {
    Random { seed: u64 },
    /// Every resample is the original sample (test hook).
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub replicates: Vec<f64>,
    /// Resamples discarded for holding a single class.
    pub redraws: usize,
}

/// `b` AUCs of with-replacement resamples of `(scores, labels)`, each the
/// size of the original. Single-class resamples are redrawn.
pub fn bootstrap_auc(scores: &[f64], labels: &[u8], b: usize, resampler: Resampler) -> Result<Bootstrap, StudyError> {
    let n = labels.len();
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == n {
        return Err(StudyError::SingleClassTest);
    }
    let mut replicates = Vec::with_capacity(b);
    let mut redraws = 0;
    let mut buf_s = vec![0.0; n];
    let mut buf_l = vec![0u8; n];
    match resampler {
        Resampler::Identity => {
            let a = auc(scores, labels).map_err(|_| StudyError::SingleClassTest)?;
            replicates.resize(b, a);
        }
        Resampler::Random { seed } => {
            let mut r = rng::stream(seed, 0);
            while replicates.len() < b {
                let mut consecutive = 0;
                loop {
                    let mut p = 0;
                    for i in 0..n {
                        let j = r.random_range(0..n);
                        buf_s[i] = scores[j];
                        buf_l[i] = labels[j];
                        p += usize::from(labels[j]);
                    }
                    if p > 0 && p < n {
                        break;
                    }
                    consecutive += 1;
                    redraws += 1;
                    if consecutive > MAX_REDRAWS {
                        return Err(StudyError::Redraws);
                    }
                }
                replicates.push(auc(&buf_s, &buf_l).expect("both classes present"));
            }
        }
    }
    Ok(Bootstrap { replicates, redraws })
}

/// Smallest `k >= 1` such that no later median exceeds median `k` by more
/// than `delta`; the last index when none qualifies.
pub fn redundancy_point(medians: &[f64], delta: f64) -> usize {
    let last = medians.len().saturating_sub(1);
    (1..medians.len())
        .find(|&k| medians[k + 1..].iter().all(|&m| m - medians[k] <= delta))
        .unwrap_or(last)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub spec: LeapSpec,
    pub lambda: f64,
    pub cv_auc: f64,
    pub point_auc: f64,
    pub replicates: Vec<f64>,
    pub redraws: usize,
    pub model: GlmModel,
}

impl BootstrapDistribution {
    pub fn median(&self) -> f64 {
        median(&self.replicates)
    }

    pub fn quantiles(&self) -> Quantiles {
        let mut v = self.replicates.clone();
        v.sort_by(f64::total_cmp);
        Quantiles {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub b: usize,
    pub delta: f64,
    pub train_frac: f64,
    pub folds: usize,
    pub partition_seed: u64,
    pub cv_seed: u64,
    pub bootstrap_seed: u64,
    pub lambdas: Vec<f64>,
    pub recipe: RecipeConfig,
    pub solver: SolverOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            b: 500,
            delta: 0.005,
            train_frac: 0.7,
            folds: 5,
            partition_seed: 1,
            cv_seed: 2,
            bootstrap_seed: 3,
            lambdas: lambda_grid(),
            recipe: RecipeConfig::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl StudyConfig {
    /// Derives all seeds from one master seed.
    pub fn seeded(seed: u64) -> Self {
        StudyConfig {
            partition_seed: rng::derive(seed, 1),
            cv_seed: rng::derive(seed, 2),
            bootstrap_seed: rng::derive(seed, 3),
            recipe: RecipeConfig {
                bag: crate::recipe::BagSpec {
                    seed: rng::derive(seed, 4),
                    ..Default::default()
                },
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub method: LeapMethod,
    pub config: StudyConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub test_vins: Vec<Vin>,
    pub distributions: Vec<BootstrapDistribution>,
    pub tuning: Vec<TuneResult>,
    pub redundancy_point: usize,
}

fn stage(spec: LeapSpec) -> impl Fn(Error) -> StudyError {
    move |e| StudyError::Stage {
        id: spec.id(),
        source: Box::new(e),
    }
}

/// One distribution: tune, refit, score and resample the test rows of `D_k`.
pub fn study_dataset(
    contracts: &[VehicleContract],
    spec: LeapSpec,
    partition: &VinPartition,
    config: &StudyConfig,
) -> Result<(BootstrapDistribution, TuneResult), StudyError> {
    let err = stage(spec);
    let table = build_dataset(contracts, spec).map_err(|e| err(e.into()))?;
    let (train, test) = partition.apply(&table);
    let plan = CvPlan::for_table(&train, config.folds, config.cv_seed).map_err(|e| err(e.into()))?;
    let grid = GridConfig {
        lambdas: config.lambdas.clone(),
        alphas: vec![1.0],
        recipe: config.recipe.clone(),
        solver: config.solver,
    };
    let tuned = grid_search_glm(&train, &grid, &plan).map_err(|e| err(e.into()))?;
    let best = tuned.best();
    let Hyper::Glm { lambda, .. } = best.hyper else {
        unreachable!("glm grid")
    };
    let recipe = recipe_fit(&train, &config.recipe).map_err(|e| err(e.into()))?;
    let dtrain = recipe.apply(&train).map_err(|e| err(e.into()))?.design().map_err(|e| err(e.into()))?;
    let dtest = recipe.apply(&test).map_err(|e| err(e.into()))?.design().map_err(|e| err(e.into()))?;
    // walk the path down to the selected penalty, as during tuning
    let mut warm: Option<WarmStart> = None;
    let mut model = None;
    let mut path: Vec<f64> = config.lambdas.iter().copied().filter(|&l| l >= lambda).collect();
    path.sort_by(|a, b| b.total_cmp(a));
    for l in path {
        let m = fit_penalized_design(&dtrain, PenaltySpec::lasso(l), warm.as_ref(), &config.solver).map_err(|e| err(e.into()))?;
        warm = Some((&m).into());
        model = Some(m);
    }
    let model = model.expect("selected lambda is on the path");
    let scores = model.predict_design(&dtest).map_err(|e| err(e.into()))?;
    let point_auc = auc(&scores, test.response()).map_err(|e| err(e.into()))?;
    let boot = bootstrap_auc(
        &scores,
        test.response(),
        config.b,
        Resampler::Random {
            seed: config.bootstrap_seed,
        },
    )?;
    let (lo, hi) = boot
        .replicates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if config.b >= 100 && !(lo <= point_auc && point_auc <= hi) {
        log::warn!("{}: point AUC {point_auc} outside bootstrap range [{lo}, {hi}]", spec.id());
    }
    Ok((
        BootstrapDistribution {
            spec,
            lambda,
            cv_auc: best.mean_auc,
            point_auc,
            replicates: boot.replicates,
            redraws: boot.redraws,
            model,
        },
        tuned,
    ))
}

/// The thirteen distributions of one method.
pub fn run_study(contracts: &[VehicleContract], method: LeapMethod, config: &StudyConfig) -> Result<StudyResult, StudyError> {
    if config.b < 100 {
        log::warn!("b = {} bootstrap replicates is below the recommended 100", config.b);
    }
    let ids: Vec<Vin> = contracts.iter().map(|c| c.vin.clone()).collect();
    let partition = VinPartition::draw(&ids, config.train_frac, config.partition_seed).map_err(|e| stage(LeapSpec { method, k: 0 })(e.into()))?;
    let parts: Vec<(BootstrapDistribution, TuneResult)> = (0..=MAX_LEAP)
        .into_par_iter()
        .map(|k| study_dataset(contracts, LeapSpec { method, k }, &partition, config))
        .collect::<Result<_, _>>()?;
    let (distributions, tuning): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let medians: Vec<f64> = distributions.iter().map(BootstrapDistribution::median).collect();
    Ok(StudyResult {
        method,
        config: config.clone(),
        n_train: partition.train.len(),
        n_test: partition.test.len(),
        test_vins: partition.test.iter().cloned().collect(),
        redundancy_point: redundancy_point(&medians, config.delta),
        distributions,
        tuning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub k: u8,
    pub lambda: f64,
    pub cv_auc: f64,
    pub point_auc: f64,
    pub quantiles: Quantiles,
    pub redraws: usize,
    pub nonzero: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub method: LeapMethod,
    pub b: usize,
    pub delta: f64,
    pub redundancy_point: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seeds: BTreeMap<String, u64>,
    pub datasets: Vec<DatasetSummary>,
}

impl StudyResult {
    pub fn medians(&self) -> Vec<f64> {
        self.distributions.iter().map(BootstrapDistribution::median).collect()
    }

    pub fn summary(&self) -> StudySummary {
        let seeds = BTreeMap::from([
            ("partition".to_string(), self.config.partition_seed),
            ("cv".to_string(), self.config.cv_seed),
            ("bootstrap".to_string(), self.config.bootstrap_seed),
            ("imputation".to_string(), self.config.recipe.bag.seed),
        ]);
        StudySummary {
            method: self.method,
            b: self.config.b,
            delta: self.config.delta,
            redundancy_point: self.redundancy_point,
            n_train: self.n_train,
            n_test: self.n_test,
            seeds,
            datasets: self
                .distributions
                .iter()
                .map(|d| DatasetSummary {
                    id: d.spec.id(),
                    k: d.spec.k,
                    lambda: d.lambda,
                    cv_auc: d.cv_auc,
                    point_auc: d.point_auc,
                    quantiles: d.quantiles(),
                    redraws: d.redraws,
                    nonzero: d.model.n_nonzero(),
                })
                .collect(),
        }
    }

    /// `k,replicate_index,auc`, one row per replicate.
    pub fn write_replicates_csv<W: Write>(&self, sink: W) -> Result<(), StudyError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["k", "replicate_index", "auc"])?;
        for d in &self.distributions {
            for (i, a) in d.replicates.iter().enumerate() {
                w.write_record([d.spec.k.to_string(), i.to_string(), a.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Ranks of each column under each model (1 = most important; ties share
/// their mean rank) and the mean rank of each column origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceComparison {
    pub models: Vec<String>,
    /// column -> rank under each model, in `models` order
    pub ranks: BTreeMap<String, Vec<f64>>,
    pub origin_mean_rank: BTreeMap<String, f64>,
}

pub fn fractional_ranks(importance: &[(String, f64)]) -> BTreeMap<String, f64> {
    let mut v: Vec<&(String, f64)> = importance.iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = BTreeMap::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1].1 == v[i].1 {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for item in &v[i..=j] {
            out.insert(item.0.clone(), r);
        }
        i = j + 1;
    }
    out
}

/// `models` pairs a label with a `(column, importance)` list; all lists must
/// cover the same columns. `origins` maps columns to their origin.
pub fn compare_importance(
    models: &[(String, Vec<(String, f64)>)],
    origins: &BTreeMap<String, ColumnOrigin>,
) -> ImportanceComparison {
    let mut ranks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (_, imp) in models {
        for (col, r) in fractional_ranks(imp) {
            ranks.entry(col).or_default().push(r);
        }
    }
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (col, rs) in &ranks {
        let Some(origin) = origins.get(col) else { continue };
        let key = serde_json::to_value(origin)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let e = acc.entry(key).or_insert((0.0, 0));
        e.0 += rs.iter().sum::<f64>();
        e.1 += rs.len();
    }
    ImportanceComparison {
        models: models.iter().map(|m| m.0.clone()).collect(),
        ranks,
        origin_mean_rank: acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_at_three() {
        let mut m = vec![0.55, 0.60, 0.62, 0.63];
        m.extend([0.63; 9]);
        assert_eq!(redundancy_point(&m, 0.005), 3);
    }

    #[test]
    fn strictly_increasing_gives_last() {
        let m: Vec<f64> = (0..13).map(|k| 0.5 + 0.01 * k as f64).collect();
        assert_eq!(redundancy_point(&m, 0.005), 12);
    }

    #[test]
    fn identity_resample_reproduces_point_auc() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [0, 0, 1, 1];
        let b = bootstrap_auc(&s, &l, 1, Resampler::Identity).unwrap();
        assert_eq!(b.replicates, vec![auc(&s, &l).unwrap()]);
    }

    #[test]
    fn constant_scores_give_half() {
        let b = bootstrap_auc(&[0.2; 10], &[0, 1, 0, 0, 1, 0, 0, 0, 1, 0], 50, Resampler::Random { seed: 1 }).unwrap();
        assert!(b.replicates.iter().all(|&a| a == 0.5));
    }

    #[test]
    fn single_class_redraws_are_counted_and_bounded() {
        // one positive in 40 rows: about 37% of resamples miss it
        let mut l = vec![0u8; 40];
        l[7] = 1;
        let s: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let b = bootstrap_auc(&s, &l, 200, Resampler::Random { seed: 4 }).unwrap();
        assert_eq!(b.replicates.len(), 200);
        assert!(b.redraws > 0);
    }

    #[test]
    fn ranks_follow_sorted_order() {
        let imp = vec![("a".to_string(), 0.2), ("b".to_string(), 0.9), ("c".to_string(), 0.5)];
        let r = fractional_ranks(&imp);
        assert_eq!((r["b"], r["c"], r["a"]), (1.0, 2.0, 3.0));
        let tied = vec![("a".to_string(), 0.0), ("b".to_string(), 1.0), ("c".to_string(), 0.0)];
        let r = fractional_ranks(&tied);
        assert_eq!((r["b"], r["a"], r["c"]), (1.0, 2.5, 2.5));
    }

    #[test]
    fn origin_mean_ranks() {
        let imp = vec![("t".to_string(), 0.9), ("c".to_string(), 0.1)];
        let origins = BTreeMap::from([
            ("t".to_string(), ColumnOrigin::Telematics),
            ("c".to_string(), ColumnOrigin::Classical),
        ]);
        let cmp = compare_importance(&[("m1".into(), imp.clone()), ("m2".into(), imp)], &origins);
        assert_eq!(cmp.ranks["t"], vec![1.0, 1.0]);
        assert_eq!(cmp.origin_mean_rank["telematics"], 1.0);
        assert_eq!(cmp.origin_mean_rank["classical"], 2.0);
    }
}
