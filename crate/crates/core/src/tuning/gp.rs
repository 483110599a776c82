//! Gaussian-process Bayesian optimization over an integer box.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::grid::{Candidate, Hyper, TuneResult};
use super::{cv_auc, CvPlan, TuningError};
use crate::forest::{fit_forest_design, ForestSpec};
use crate::recipe::{recipe_fit, RecipeConfig};
use crate::rng;
use crate::table::FeatureTable;

/// Observation noise added to the kernel diagonal.
pub const NOISE: f64 = 1e-6;
/// Expected-improvement exploration margin (in standardized units).
pub const XI: f64 = 0.01;
const LOG_SCALE_BOUNDS: (f64, f64) = (-4.6, 2.3);

/// Squared-exponential ARD kernel parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub log_length: Vec<f64>,
    pub log_signal: f64,
}

impl KernelParams {
    pub fn k(&self, a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a
            .iter()
            .zip(b)
            .zip(&self.log_length)
            .map(|((x, y), l)| ((x - y) / l.exp()).powi(2))
            .sum();
        (2.0 * self.log_signal).exp() * (-0.5 * s).exp()
    }

    fn from_flat(v: &[f64]) -> Self {
        KernelParams {
            log_length: v[..v.len() - 1].to_vec(),
            log_signal: v[v.len() - 1],
        }
    }
}

fn gram(x: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| params.k(&x[i], &x[j]) + if i == j { NOISE } else { 0.0 })
}

/// Log marginal likelihood of `y` under the GP and its gradient with respect
/// to `(log_length..., log_signal)`.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], params: &KernelParams) -> Option<(f64, Vec<f64>)> {
    let n = x.len();
    let k = gram(x, params);
    let chol = k.cholesky()?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let l = chol.l();
    let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let value = -0.5 * yv.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let kinv = chol.inverse();
    let inner = &alpha * alpha.transpose() - kinv;
    let d = params.log_length.len();
    let mut grad = vec![0.0; d + 1];
    for i in 0..n {
        for j in 0..n {
            let kf = params.k(&x[i], &x[j]);
            let w = inner[(i, j)];
            for (dim, g) in grad.iter_mut().take(d).enumerate() {
                let diff = x[i][dim] - x[j][dim];
                *g += 0.5 * w * kf * diff * diff / (2.0 * params.log_length[dim]).exp();
            }
            grad[d] += 0.5 * w * 2.0 * kf;
        }
    }
    Some((value, grad))
}

/// A GP conditioned on standardized data.
pub struct Gp {
    pub x: Vec<Vec<f64>>,
    pub params: KernelParams,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl Gp {
    pub fn fit(x: Vec<Vec<f64>>, y: &[f64], params: KernelParams) -> Result<Self, TuningError> {
        let chol = gram(&x, &params).cholesky().ok_or(TuningError::Gp)?;
        let alpha = chol.solve(&DVector::from_column_slice(y));
        Ok(Gp { x, params, chol, alpha })
    }

    /// Fits kernel parameters by maximizing the marginal likelihood
    /// (projected gradient ascent from a few fixed starts).
    pub fn fit_ml(x: Vec<Vec<f64>>, y: &[f64]) -> Result<Self, TuningError> {
        let d = x.first().map_or(0, Vec::len);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in [-1.5, -0.5, 0.5] {
            let mut theta = vec![start; d];
            theta.push(0.0);
            let Some((mut val, mut grad)) = log_marginal_likelihood(&x, y, &KernelParams::from_flat(&theta)) else {
                continue;
            };
            let mut step = 0.1;
            for _ in 0..200 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm < 1e-6 || step < 1e-8 {
                    break;
                }
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(&grad)
                    .map(|(t, g)| (t + step * g / norm).clamp(LOG_SCALE_BOUNDS.0, LOG_SCALE_BOUNDS.1))
                    .collect();
                match log_marginal_likelihood(&x, y, &KernelParams::from_flat(&cand)) {
                    Some((v, g)) if v > val => {
                        theta = cand;
                        val = v;
                        grad = g;
                        step *= 1.2;
                    }
                    _ => step *= 0.5,
                }
            }
            if best.as_ref().is_none_or(|b| val > b.0) {
                best = Some((val, theta));
            }
        }
        let (_, theta) = best.ok_or(TuningError::Gp)?;
        Gp::fit(x, y, KernelParams::from_flat(&theta))
    }

    /// Posterior mean and standard deviation at `p`.
    pub fn posterior(&self, p: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| self.params.k(xi, p)));
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("triangular factor");
        let var = (self.params.k(p, p) - v.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, sd: f64, best: f64, xi: f64) -> f64 {
    let imp = mean - best - xi;
    if sd <= 1e-12 {
        return imp.max(0.0);
    }
    let z = imp / sd;
    let n = Normal::standard();
    imp * n.cdf(z) + sd * n.pdf(z)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntBox {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
}

impl IntBox {
    pub fn new(lower: Vec<i64>, upper: Vec<i64>) -> Result<Self, TuningError> {
        if lower.len() != upper.len() || lower.is_empty() || lower.iter().zip(&upper).any(|(a, b)| a > b) {
            return Err(TuningError::BadBounds);
        }
        Ok(IntBox { lower, upper })
    }

    pub fn size(&self) -> u128 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| (b - a + 1) as u128).product()
    }

    fn unit(&self, p: &[i64]) -> Vec<f64> {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&a, &b))| if b > a { (v - a) as f64 / (b - a) as f64 } else { 0.0 })
            .collect()
    }

    fn points(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![]];
        for (&a, &b) in self.lower.iter().zip(&self.upper) {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (a..=b).map(move |v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn random(&self, r: &mut impl Rng) -> Vec<i64> {
        self.lower.iter().zip(&self.upper).map(|(&a, &b)| r.random_range(a..=b)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesOptions {
    pub n_initial: usize,
    pub n_iter: usize,
    pub xi: f64,
    pub seed: u64,
}

impl Default for BayesOptions {
    fn default() -> Self {
        BayesOptions {
            n_initial: 5,
            n_iter: 20,
            xi: XI,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesTrace {
    pub points: Vec<Vec<i64>>,
    pub values: Vec<f64>,
    pub best: usize,
}

/// Maximizes `objective` over the integer box: a random initial design, then
/// the unevaluated box point with the largest expected improvement under a
/// GP fit to the standardized observations. At most `budget` evaluations.
pub fn bayes_opt<F>(bounds: &IntBox, budget: usize, opts: &BayesOptions, mut objective: F) -> Result<BayesTrace, TuningError>
where
    F: FnMut(&[i64]) -> Result<f64, TuningError>,
{
    if budget < opts.n_initial || opts.n_initial == 0 {
        return Err(TuningError::Budget {
            budget,
            initial: opts.n_initial,
        });
    }
    let size = bounds.size();
    let mut r = rng::stream(opts.seed, 0);
    let mut points: Vec<Vec<i64>> = Vec::new();
    let mut tries = 0;
    while (points.len() as u128) < size.min(opts.n_initial as u128) && tries < 100_000 {
        let p = bounds.random(&mut r);
        if !points.contains(&p) {
            points.push(p);
        }
        tries += 1;
    }
    let mut values = Vec::new();
    for p in &points {
        values.push(objective(p)?);
    }
    let grid = (size <= 200_000).then(|| bounds.points());
    while points.len() < budget && (points.len() as u128) < size {
        let m = crate::stats::mean(&values);
        let s = if values.len() > 1 { crate::stats::sd(&values) } else { 0.0 };
        let s = if s > 0.0 && s.is_finite() { s } else { 1.0 };
        let ys: Vec<f64> = values.iter().map(|v| (v - m) / s).collect();
        let xs: Vec<Vec<f64>> = points.iter().map(|p| bounds.unit(p)).collect();
        let gp = Gp::fit_ml(xs, &ys)?;
        let incumbent = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let candidates: Vec<Vec<i64>> = match &grid {
            Some(g) => g.iter().filter(|p| !points.contains(p)).cloned().collect(),
            None => (0..20_000).map(|_| bounds.random(&mut r)).filter(|p| !points.contains(p)).collect(),
        };
        let mut pick: Option<(f64, Vec<i64>)> = None;
        for c in candidates {
            let (mu, sd) = gp.posterior(&bounds.unit(&c));
            let ei = expected_improvement(mu, sd, incumbent, opts.xi);
            if pick.as_ref().is_none_or(|(b, _)| ei > *b) {
                pick = Some((ei, c));
            }
        }
        let Some((_, next)) = pick else { break };
        values.push(objective(&next)?);
        points.push(next);
    }
    let best = (0..values.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .expect("initial design is nonempty");
    Ok(BayesTrace { points, values, best })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestTuning {
    pub n_trees: usize,
    pub p_star: (usize, usize),
    pub n_star: (usize, usize),
    pub budget: usize,
    pub bayes: BayesOptions,
    pub recipe: RecipeConfig,
    pub forest_seed: u64,
}

impl Default for ForestTuning {
    fn default() -> Self {
        ForestTuning {
            n_trees: 200,
            p_star: (1, 24),
            n_star: (2, 100),
            budget: 25,
            bayes: BayesOptions::default(),
            recipe: RecipeConfig::default(),
            forest_seed: 0,
        }
    }
}

/// Tunes `(p*, n*)` by cross-validated AUC with the recipe refit per fold.
pub fn bayes_opt_forest(table: &FeatureTable, config: &ForestTuning, plan: &CvPlan) -> Result<TuneResult, TuningError> {
    let bounds = IntBox::new(
        vec![config.p_star.0 as i64, config.n_star.0 as i64],
        vec![config.p_star.1 as i64, config.n_star.1 as i64],
    )?;
    let mut candidates = Vec::new();
    bayes_opt(&bounds, config.budget, &config.bayes, |p| {
        let hyper = Hyper::Forest {
            p_star: p[0] as usize,
            n_star: p[1] as usize,
        };
        let spec = ForestSpec::new(config.n_trees, p[0] as usize, p[1] as usize, config.forest_seed);
        let score = cv_auc(table, plan, |train, held| -> Result<Vec<f64>, String> {
            let recipe = recipe_fit(train, &config.recipe).map_err(|e| e.to_string())?;
            let dtrain = recipe.apply(train).map_err(|e| e.to_string())?.design().map_err(|e| e.to_string())?;
            let dheld = recipe.apply(held).map_err(|e| e.to_string())?.design().map_err(|e| e.to_string())?;
            let mut s = spec;
            s.p_star = s.p_star.min(dtrain.n_cols());
            let model = fit_forest_design(&dtrain, &s).map_err(|e| e.to_string())?;
            model.predict_design(&dheld).map_err(|e| e.to_string())
        });
        match score {
            Ok(s) => {
                let v = s.mean;
                candidates.push(Candidate::scored(hyper, s));
                Ok(v)
            }
            Err(e) => {
                log::warn!("forest candidate {hyper:?} failed: {e}");
                candidates.push(Candidate::failed(hyper, e.to_string()));
                // a failed point still informs the surrogate as a poor value
                Ok(0.0)
            }
        }
    })?;
    TuneResult::new(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ei_vanishes_without_uncertainty_below_incumbent() {
        assert_eq!(expected_improvement(-3.0, 0.0, 1.0, XI), 0.0);
        assert!(expected_improvement(-3.0, 1e-6, 1.0, XI) < 1e-12);
        assert!(expected_improvement(2.0, 0.5, 1.0, XI) > 0.9);
    }

    #[test]
    fn posterior_interpolates_observations() {
        let x = vec![vec![0.0], vec![0.3], vec![0.9]];
        let y = [0.5, -1.0, 2.0];
        let gp = Gp::fit(
            x.clone(),
            &y,
            KernelParams {
                log_length: vec![-1.0],
                log_signal: 0.0,
            },
        )
        .unwrap();
        for (xi, yi) in x.iter().zip(y) {
            let (m, s) = gp.posterior(xi);
            assert!((m - yi).abs() < 1e-4, "{m} vs {yi}");
            assert!(s < 1e-2);
        }
    }

    #[test]
    fn budget_below_design_is_an_error() {
        let b = IntBox::new(vec![0], vec![10]).unwrap();
        let r = bayes_opt(&b, 3, &BayesOptions::default(), |_| Ok(0.0));
        assert!(matches!(r, Err(TuningError::Budget { .. })));
    }

    #[test]
    fn one_dimensional_quadratic() {
        let b = IntBox::new(vec![0], vec![40]).unwrap();
        let opts = BayesOptions {
            seed: 3,
            ..BayesOptions::default()
        };
        let t = bayes_opt(&b, 15, &opts, |p| Ok(-((p[0] - 27) as f64).powi(2))).unwrap();
        assert!((t.points[t.best][0] - 27).abs() <= 1, "{:?}", t.points[t.best]);
    }
}
