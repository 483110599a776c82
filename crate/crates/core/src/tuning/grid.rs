use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc, CvPlan, CvScore, TuningError};
use crate::linear_models::{fit_path, kkt_violation, SolverOptions};
use crate::recipe::{recipe_fit, RecipeConfig};
use crate::table::FeatureTable;

pub const GRID_SIZE: usize = 100;
pub const ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Mean AUCs closer than this are ties.
pub const TIE_TOL: f64 = 1e-12;

/// Grid value `i` (1-based): `10^(-10 + (i - 1) / 9.9)`.
pub fn lambda_value(i: usize) -> f64 {
    // (i - 1) / 9.9 written as (i - 1) * 10 / 99 so every endpoint is exact
    let e = ((i - 1) * 10) as f64 / 99.0 - 10.0;
    10f64.powf(e)
}

/// The 100 log-uniform penalties from 1e-10 to 1.
pub fn lambda_grid() -> Vec<f64> {
    (1..=GRID_SIZE).map(lambda_value).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Hyper {
    Glm { lambda: f64, alpha: f64 },
    Forest { p_star: usize, n_star: usize },
}

impl Hyper {
    // preference among equal mean AUCs: smaller lambda, then larger alpha;
    // forests compare (p*, n*) lexicographically. Less is preferred.
    fn preference(&self, other: &Hyper) -> Ordering {
        match (self, other) {
            (Hyper::Glm { lambda: l1, alpha: a1 }, Hyper::Glm { lambda: l2, alpha: a2 }) => {
                l1.total_cmp(l2).then_with(|| a2.total_cmp(a1))
            }
            (Hyper::Forest { p_star: p1, n_star: n1 }, Hyper::Forest { p_star: p2, n_star: n2 }) => {
                (p1, n1).cmp(&(p2, n2))
            }
            (Hyper::Glm { .. }, Hyper::Forest { .. }) => Ordering::Less,
            (Hyper::Forest { .. }, Hyper::Glm { .. }) => Ordering::Greater,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub hyper: Hyper,
    /// NaN when any fold failed.
    pub mean_auc: f64,
    pub sd_auc: f64,
    pub fold_aucs: Vec<f64>,
    /// Largest optimality-condition violation over the fold fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Candidate {
    pub fn failed(hyper: Hyper, error: String) -> Self {
        Candidate {
            hyper,
            mean_auc: f64::NAN,
            sd_auc: f64::NAN,
            fold_aucs: vec![],
            kkt: None,
            error: Some(error),
        }
    }

    pub fn scored(hyper: Hyper, score: CvScore) -> Self {
        Candidate {
            hyper,
            mean_auc: score.mean,
            sd_auc: score.sd,
            fold_aucs: score.fold_aucs,
            kkt: None,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub candidates: Vec<Candidate>,
    pub selected: usize,
}

impl TuneResult {
    pub fn new(candidates: Vec<Candidate>) -> Result<Self, TuningError> {
        let selected = select(&candidates).ok_or(TuningError::AllFailed)?;
        Ok(TuneResult { candidates, selected })
    }

    pub fn best(&self) -> &Candidate {
        &self.candidates[self.selected]
    }

    /// One candidate per row.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), TuningError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["model", "lambda", "alpha", "p_star", "n_star", "mean_auc", "sd_auc", "selected"])?;
        for (i, c) in self.candidates.iter().enumerate() {
            let (model, a, b, p, n) = match c.hyper {
                Hyper::Glm { lambda, alpha } => ("glm", lambda.to_string(), alpha.to_string(), String::new(), String::new()),
                Hyper::Forest { p_star, n_star } => ("forest", String::new(), String::new(), p_star.to_string(), n_star.to_string()),
            };
            w.write_record([
                model.to_string(),
                a,
                b,
                p,
                n,
                c.mean_auc.to_string(),
                c.sd_auc.to_string(),
                u8::from(i == self.selected).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Index of the candidate with the largest finite mean AUC, ties resolved
/// by [`Hyper`] preference.
pub fn select(candidates: &[Candidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if !c.mean_auc.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let cb = &candidates[b];
                let d = c.mean_auc - cb.mean_auc;
                if d > TIE_TOL || (d.abs() <= TIE_TOL && c.hyper.preference(&cb.hyper) == Ordering::Less) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub recipe: RecipeConfig,
    pub solver: SolverOptions,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lambdas: lambda_grid(),
            alphas: ALPHA_GRID.to_vec(),
            recipe: RecipeConfig::default(),
            solver: SolverOptions::default(),
        }
    }
}

/// Cross-validated AUC of every `(lambda, alpha)` pair. Each fold refits the
/// recipe on its training part and runs one warm-started path per alpha.
/// Candidates are listed alpha-major, lambdas in grid order.
pub fn grid_search_glm(table: &FeatureTable, config: &GridConfig, plan: &CvPlan) -> Result<TuneResult, TuningError> {
    plan.check(table)?;
    let ids = table.row_ids();
    let nl = config.lambdas.len();
    // per fold: alpha-major list of (auc, kkt) or an error message
    let per_fold: Vec<Vec<Result<(f64, f64), String>>> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let (tr, te) = plan.split(ids, f);
            let train = table.select_rows(&tr);
            let held = table.select_rows(&te);
            let prepared = recipe_fit(&train, &config.recipe)
                .and_then(|r| Ok((r.apply(&train)?.design()?, r.apply(&held)?.design()?)));
            let (dtrain, dheld) = match prepared {
                Ok(d) => d,
                Err(e) => return vec![Err(e.to_string()); nl * config.alphas.len()],
            };
            config
                .alphas
                .par_iter()
                .flat_map_iter(|&alpha| {
                    fit_path(&dtrain, &config.lambdas, alpha, &config.solver)
                        .into_iter()
                        .map(|r| {
                            let m = r.map_err(|e| e.to_string())?;
                            let s = m.predict_design(&dheld).map_err(|e| e.to_string())?;
                            let a = auc(&s, held.response()).map_err(|e| e.to_string())?;
                            let k = kkt_violation(&m, &dtrain).map_err(|e| e.to_string())?;
                            Ok((a, k))
                        })
                        .collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    let mut candidates = Vec::with_capacity(nl * config.alphas.len());
    for (ai, &alpha) in config.alphas.iter().enumerate() {
        for (li, &lambda) in config.lambdas.iter().enumerate() {
            let hyper = Hyper::Glm { lambda, alpha };
            let idx = ai * nl + li;
            let folds: Result<Vec<(f64, f64)>, String> = per_fold.iter().map(|v| v[idx].clone()).collect();
            candidates.push(match folds {
                Ok(v) => {
                    let kkt = v.iter().map(|x| x.1).fold(0.0, f64::max);
                    let mut c = Candidate::scored(hyper, CvScore::from_folds(v.into_iter().map(|x| x.0).collect()));
                    c.kkt = Some(kkt);
                    c
                }
                Err(e) => {
                    log::warn!("candidate lambda={lambda} alpha={alpha} failed: {e}");
                    Candidate::failed(hyper, e)
                }
            });
        }
    }
    TuneResult::new(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_anchors() {
        let g = lambda_grid();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 1e-10);
        assert_eq!(g[99], 1.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    fn cand(lambda: f64, alpha: f64, m: f64) -> Candidate {
        Candidate::scored(Hyper::Glm { lambda, alpha }, CvScore { fold_aucs: vec![m], mean: m, sd: 0.0 })
    }

    #[test]
    fn ties_prefer_smaller_lambda_then_larger_alpha() {
        let c = vec![cand(0.1, 0.5, 0.6), cand(0.01, 0.5, 0.6), cand(0.01, 1.0, 0.6), cand(1.0, 1.0, 0.55)];
        assert_eq!(select(&c), Some(2));
    }

    #[test]
    fn nan_candidates_are_skipped() {
        let c = vec![cand(0.1, 1.0, f64::NAN), cand(0.2, 1.0, 0.51)];
        assert_eq!(select(&c), Some(1));
        assert_eq!(select(&c[..1]), None);
    }
}
