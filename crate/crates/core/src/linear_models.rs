//! Logistic regression: unpenalized maximum likelihood by IRLS and the
//! elastic-net family by a proximal-Newton outer loop around cyclic
//! coordinate descent.
//!
//! The penalized objective is
//!
//! ```text
//! F(b0, b) = L(b0, b) + lambda * ((1 - alpha) / 2 * |b|_2^2 + alpha * |b|_1)
//! ```
//!
//! with `L` the mean cross-entropy. The intercept is never penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Design, FeatureTable, TableError};

/// Probability clamp used inside the loss.
pub const PROB_EPS: f64 = 1e-12;
/// A coefficient beyond this magnitude during IRLS signals separation.
pub const SEPARATION_LIMIT: f64 = 40.0;
// working weights below this are floored to keep the Newton system finite
const MIN_WEIGHT: f64 = 1e-10;
const INNER_TOL: f64 = 1e-22;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("design is rank deficient")]
    RankDeficient,
    #[error("complete or quasi-complete separation; diverging coefficients: {}", .columns.join(", "))]
    Separation { columns: Vec<String> },
    #[error("no convergence after {iterations} outer iterations; last objectives {:?}", &.trace[.trace.len().saturating_sub(3)..])]
    NonConvergence { iterations: usize, trace: Vec<f64> },
    #[error("invalid penalty (lambda {lambda}, alpha {alpha})")]
    BadPenalty { lambda: f64, alpha: f64 },
    #[error("cannot fit on an empty design")]
    Empty,
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub alpha: f64,
}

impl PenaltySpec {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self, LinearError> {
        if !(lambda >= 0.0 && lambda.is_finite() && (0.0..=1.0).contains(&alpha)) {
            return Err(LinearError::BadPenalty { lambda, alpha });
        }
        Ok(PenaltySpec { lambda, alpha })
    }

    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec { lambda, alpha: 1.0 }
    }

    pub fn ridge(lambda: f64) -> Self {
        PenaltySpec { lambda, alpha: 0.0 }
    }

    pub fn none() -> Self {
        PenaltySpec { lambda: 0.0, alpha: 1.0 }
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        self.lambda * ((1.0 - self.alpha) / 2.0 * l2 + self.alpha * l1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative objective change that stops the outer loop.
    pub tol: f64,
    pub max_outer: usize,
    /// Coordinate-descent sweeps per outer iteration.
    pub max_inner: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_outer: 100,
            max_inner: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub inner_sweeps: usize,
    pub objective: f64,
    /// Objective after each outer iteration, starting with the initial point.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub columns: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub penalty: PenaltySpec,
    pub convergence: ConvergenceReport,
    /// Wald standard errors (intercept first); IRLS fits only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
}

impl GlmModel {
    pub fn n_nonzero(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }

    pub fn linear_predictor(&self, design: &Design) -> Result<Vec<f64>, LinearError> {
        design.check_names(&self.columns)?;
        Ok(eta(design, self.intercept, &self.coefficients))
    }

    pub fn predict_design(&self, design: &Design) -> Result<Vec<f64>, LinearError> {
        Ok(self.linear_predictor(design)?.into_iter().map(sigmoid).collect())
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn eta(design: &Design, b0: f64, beta: &[f64]) -> Vec<f64> {
    let mut out = vec![b0; design.n_rows()];
    for (col, &b) in design.columns.iter().zip(beta) {
        if b != 0.0 {
            for (o, x) in out.iter_mut().zip(col) {
                *o += b * x;
            }
        }
    }
    out
}

fn loss_from_eta(eta: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    -eta.iter()
        .zip(y)
        .map(|(&e, &yi)| {
            let p = sigmoid(e).clamp(PROB_EPS, 1.0 - PROB_EPS);
            yi * p.ln() + (1.0 - yi) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / n
}

/// Mean cross-entropy with probabilities clamped to `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy(b0: f64, beta: &[f64], design: &Design) -> f64 {
    loss_from_eta(&eta(design, b0, beta), &design.y)
}

/// Gradient of the (unclamped) mean cross-entropy: intercept component
/// first, then one entry per column.
pub fn cross_entropy_gradient(b0: f64, beta: &[f64], design: &Design) -> (f64, Vec<f64>) {
    let n = design.n_rows() as f64;
    let resid: Vec<f64> = eta(design, b0, beta)
        .into_iter()
        .zip(&design.y)
        .map(|(e, y)| sigmoid(e) - y)
        .collect();
    let g0 = resid.iter().sum::<f64>() / n;
    let g = design
        .columns
        .iter()
        .map(|c| c.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n)
        .collect();
    (g0, g)
}

/// Unpenalized logistic regression with an intercept.
pub fn fit_logistic_irls(table: &FeatureTable) -> Result<GlmModel, LinearError> {
    fit_irls_design(&table.design()?, true)
}

/// IRLS on a design. Iterates Newton steps until the score satisfies
/// `|X'(y - p)|_inf <= 1e-10 n` (or stops improving).
pub fn fit_irls_design(design: &Design, intercept: bool) -> Result<GlmModel, LinearError> {
    let n = design.n_rows();
    if n == 0 {
        return Err(LinearError::Empty);
    }
    let p = design.n_cols();
    let q = p + usize::from(intercept);
    if q == 0 {
        return Err(LinearError::Empty);
    }
    let x = DMatrix::from_fn(n, q, |i, j| {
        if intercept {
            if j == 0 { 1.0 } else { design.columns[j - 1][i] }
        } else {
            design.columns[j][i]
        }
    });
    let y = DVector::from_column_slice(&design.y);
    let mut theta = DVector::zeros(q);
    let mut trace = Vec::new();
    let mut last_info = None;
    let mut iterations = 0;
    for it in 0..100 {
        iterations = it + 1;
        let e = &x * &theta;
        let mu = e.map(sigmoid);
        let w = mu.map(|m| (m * (1.0 - m)).max(MIN_WEIGHT));
        let score = x.transpose() * (&y - &mu);
        trace.push(loss_from_eta(e.as_slice(), &design.y));
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let info = x.transpose() * xw;
        let chol = info.clone().cholesky().ok_or(LinearError::RankDeficient)?;
        last_info = Some(chol);
        let step = last_info.as_ref().expect("set above").solve(&score);
        // a vanishing score with a Newton step that stays large means the
        // curvature vanishes too: the likelihood keeps improving toward infinity
        let flat = step.amax() > 1e-3 * theta.amax().max(1.0);
        if score.amax() <= 1e-10 * n as f64 && !flat {
            break;
        }
        theta += &step;
        if theta.amax() > SEPARATION_LIMIT || (flat && score.amax() <= 1e-10 * n as f64) {
            let names = (0..q)
                .filter(|&j| theta[j].abs() > 10.0 || step[j].abs() > 0.1)
                .map(|j| match (intercept, j) {
                    (true, 0) => "(intercept)".to_string(),
                    (true, j) => design.names[j - 1].clone(),
                    (false, j) => design.names[j].clone(),
                })
                .collect();
            return Err(LinearError::Separation { columns: names });
        }
    }
    let se = last_info.map(|c| {
        let inv = c.inverse();
        (0..q).map(|j| inv[(j, j)].max(0.0).sqrt()).collect()
    });
    let (b0, beta) = if intercept {
        (theta[0], theta.as_slice()[1..].to_vec())
    } else {
        (0.0, theta.as_slice().to_vec())
    };
    let objective = cross_entropy(b0, &beta, design);
    Ok(GlmModel {
        columns: design.names.clone(),
        intercept: b0,
        coefficients: beta,
        penalty: PenaltySpec::none(),
        convergence: ConvergenceReport {
            iterations,
            inner_sweeps: 0,
            objective,
            trace,
        },
        std_errors: se,
    })
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Coordinate update rule and penalty value of one member of the family.
trait Shrink {
    fn update(&self, z: f64, w: f64) -> f64;
    fn penalty(&self, beta: &[f64]) -> f64;
}

struct ElasticNet(PenaltySpec);

impl Shrink for ElasticNet {
    fn update(&self, z: f64, w: f64) -> f64 {
        let PenaltySpec { lambda, alpha } = self.0;
        soft_threshold(z, lambda * alpha) / (w + lambda * (1.0 - alpha))
    }
    fn penalty(&self, beta: &[f64]) -> f64 {
        self.0.value(beta)
    }
}

struct Lasso(f64);

impl Shrink for Lasso {
    fn update(&self, z: f64, w: f64) -> f64 {
        soft_threshold(z, self.0) / w
    }
    fn penalty(&self, beta: &[f64]) -> f64 {
        self.0 * beta.iter().map(|b| b.abs()).sum::<f64>()
    }
}

/// Starting point for a fit (warm start along a path).
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl From<&GlmModel> for WarmStart {
    fn from(m: &GlmModel) -> Self {
        WarmStart {
            intercept: m.intercept,
            coefficients: m.coefficients.clone(),
        }
    }
}

fn null_start(design: &Design) -> WarmStart {
    let ybar = design.y.iter().sum::<f64>() / design.n_rows() as f64;
    let b0 = logit(ybar.clamp(PROB_EPS, 1.0 - PROB_EPS));
    WarmStart {
        intercept: b0,
        coefficients: vec![0.0; design.n_cols()],
    }
}

/// Minimizes the penalized objective of a numeric table.
pub fn fit_penalized(table: &FeatureTable, penalty: PenaltySpec) -> Result<GlmModel, LinearError> {
    fit_penalized_design(&table.design()?, penalty, None, &SolverOptions::default())
}

pub fn fit_penalized_design(
    design: &Design,
    penalty: PenaltySpec,
    start: Option<&WarmStart>,
    opts: &SolverOptions,
) -> Result<GlmModel, LinearError> {
    let penalty = PenaltySpec::new(penalty.lambda, penalty.alpha)?;
    proximal_newton(design, &ElasticNet(penalty), penalty, start, opts)
}

/// Lasso-only solver. Shares the iteration schedule of
/// [`fit_penalized_design`] with `alpha = 1` and must agree with it exactly.
pub fn fit_lasso_design(
    design: &Design,
    lambda: f64,
    start: Option<&WarmStart>,
    opts: &SolverOptions,
) -> Result<GlmModel, LinearError> {
    let penalty = PenaltySpec::new(lambda, 1.0)?;
    proximal_newton(design, &Lasso(lambda), penalty, start, opts)
}

/// Fits every penalty in `lambdas` for a fixed `alpha`, visiting them from
/// the largest down and warm-starting each fit from the previous one.
/// Results come back in the input order.
pub fn fit_path(
    design: &Design,
    lambdas: &[f64],
    alpha: f64,
    opts: &SolverOptions,
) -> Vec<Result<GlmModel, LinearError>> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out: Vec<Option<Result<GlmModel, LinearError>>> = (0..lambdas.len()).map(|_| None).collect();
    let mut warm: Option<WarmStart> = None;
    for i in order {
        let r = match PenaltySpec::new(lambdas[i], alpha) {
            Ok(pen) => fit_penalized_design(design, pen, warm.as_ref(), opts),
            Err(e) => Err(e),
        };
        if let Ok(m) = &r {
            warm = Some(m.into());
        }
        out[i] = Some(r);
    }
    out.into_iter().map(|r| r.expect("every index visited")).collect()
}

fn proximal_newton(
    design: &Design,
    rule: &dyn Shrink,
    penalty: PenaltySpec,
    start: Option<&WarmStart>,
    opts: &SolverOptions,
) -> Result<GlmModel, LinearError> {
    let n = design.n_rows();
    let p = design.n_cols();
    if n == 0 {
        return Err(LinearError::Empty);
    }
    let nf = n as f64;
    let init = match start {
        Some(s) if s.coefficients.len() == p => s.clone(),
        _ => null_start(design),
    };
    let mut b0 = init.intercept;
    let mut beta = init.coefficients;
    let mut e = eta(design, b0, &beta);
    let mut obj = loss_from_eta(&e, &design.y) + rule.penalty(&beta);
    let mut trace = vec![obj];
    let mut sweeps = 0;
    let x = &design.columns;

    let mut w = vec![0.0; n];
    let mut r = vec![0.0; n];
    // weighted Gram matrix of [1, X] scaled by 1/n; coordinate updates then
    // cost O(p) instead of O(n)
    let q = p + 1;
    let mut gram = vec![0.0; q * q];
    let mut g = vec![0.0; q];
    for outer in 1..=opts.max_outer {
        // quadratic model of L at the current iterate
        for i in 0..n {
            let mu = sigmoid(e[i]);
            w[i] = (mu * (1.0 - mu)).max(MIN_WEIGHT);
            r[i] = (design.y[i] - mu) / w[i];
        }
        let col = |j: usize| if j == 0 { None } else { Some(&x[j - 1]) };
        for a in 0..q {
            for b in a..q {
                let v = match (col(a), col(b)) {
                    (None, None) => w.iter().sum::<f64>(),
                    (None, Some(xb)) | (Some(xb), None) => xb.iter().zip(&w).map(|(v, wi)| wi * v).sum(),
                    (Some(xa), Some(xb)) => xa.iter().zip(xb).zip(&w).map(|((u, v), wi)| wi * u * v).sum(),
                } / nf;
                gram[a * q + b] = v;
                gram[b * q + a] = v;
            }
            g[a] = match col(a) {
                None => w.iter().zip(&r).map(|(wi, ri)| wi * ri).sum::<f64>(),
                Some(xa) => xa.iter().zip(&w).zip(&r).map(|((v, wi), ri)| wi * v * ri).sum::<f64>(),
            } / nf;
        }
        let mut nb0 = b0;
        let mut nbeta = beta.clone();
        let mut full_sweep = true;
        for _ in 0..opts.max_inner {
            sweeps += 1;
            let mut max_change = 0.0f64;
            for j in 0..p {
                if !full_sweep && nbeta[j] == 0.0 {
                    continue;
                }
                let c = j + 1;
                let h = gram[c * q + c];
                if h <= 0.0 {
                    continue;
                }
                let new = rule.update(g[c] + h * nbeta[j], h);
                let d = new - nbeta[j];
                if d != 0.0 {
                    for (gk, gram_k) in g.iter_mut().zip(&gram[c * q..(c + 1) * q]) {
                        *gk -= d * gram_k;
                    }
                    nbeta[j] = new;
                    max_change = max_change.max(h * d * d);
                }
            }
            let d0 = g[0] / gram[0];
            if d0 != 0.0 {
                for (gk, gram_k) in g.iter_mut().zip(&gram[..q]) {
                    *gk -= d0 * gram_k;
                }
                nb0 += d0;
                max_change = max_change.max(gram[0] * d0 * d0);
            }
            if max_change < INNER_TOL {
                if full_sweep {
                    break;
                }
                full_sweep = true;
            } else {
                full_sweep = false;
            }
        }

        // backtracking keeps the objective monotone
        let db0 = nb0 - b0;
        let dbeta: Vec<f64> = nbeta.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let mut t = 1.0;
        let (cand_b0, cand_beta, cand_e, cand_obj) = loop {
            let cb0 = b0 + t * db0;
            let cbeta: Vec<f64> = if t == 1.0 {
                nbeta.clone()
            } else {
                beta.iter().zip(&dbeta).map(|(b, d)| b + t * d).collect()
            };
            let ce = eta(design, cb0, &cbeta);
            let co = loss_from_eta(&ce, &design.y) + rule.penalty(&cbeta);
            if co <= obj || t < 1e-10 {
                break (cb0, cbeta, ce, co);
            }
            t *= 0.5;
        };
        if cand_obj > obj {
            // no descent possible at machine precision
            trace.push(obj);
            return Ok(model(design, b0, beta, penalty, outer, sweeps, obj, trace));
        }
        let rel = (obj - cand_obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        b0 = cand_b0;
        beta = cand_beta;
        e = cand_e;
        obj = cand_obj;
        trace.push(obj);
        if rel < opts.tol {
            return Ok(model(design, b0, beta, penalty, outer, sweeps, obj, trace));
        }
    }
    Err(LinearError::NonConvergence {
        iterations: opts.max_outer,
        trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn model(
    design: &Design,
    b0: f64,
    beta: Vec<f64>,
    penalty: PenaltySpec,
    iterations: usize,
    inner_sweeps: usize,
    objective: f64,
    trace: Vec<f64>,
) -> GlmModel {
    GlmModel {
        columns: design.names.clone(),
        intercept: b0,
        coefficients: beta,
        penalty,
        convergence: ConvergenceReport {
            iterations,
            inner_sweeps,
            objective,
            trace,
        },
        std_errors: None,
    }
}

/// Largest violation of the elastic-net optimality conditions at `model`:
/// the intercept score must vanish, and for each column
/// `c_j = x_j'(y - p)/n - lambda (1 - alpha) b_j` must equal
/// `lambda alpha sign(b_j)` when `b_j != 0` and satisfy
/// `|c_j| <= lambda alpha` otherwise.
pub fn kkt_violation(model: &GlmModel, design: &Design) -> Result<f64, LinearError> {
    design.check_names(&model.columns)?;
    let (g0, g) = cross_entropy_gradient(model.intercept, &model.coefficients, design);
    let PenaltySpec { lambda, alpha } = model.penalty;
    let mut worst = g0.abs();
    for (gj, &bj) in g.iter().zip(&model.coefficients) {
        let c = -gj - lambda * (1.0 - alpha) * bj;
        let v = if bj == 0.0 {
            (c.abs() - lambda * alpha).max(0.0)
        } else {
            (c - lambda * alpha * bj.signum()).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Claim probabilities for the rows of `table`.
pub fn predict(model: &GlmModel, table: &FeatureTable) -> Result<Vec<f64>, LinearError> {
    model.predict_design(&table.design()?)
}

/// Columns ranked by `|b_j|`, largest first; ties in lexicographic order.
pub fn glm_importance(model: &GlmModel) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = model
        .columns
        .iter()
        .cloned()
        .zip(model.coefficients.iter().map(|b| b.abs()))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Design {
        Design {
            names: (0..cols.len()).map(|j| format!("x{j}")).collect(),
            columns: cols,
            y,
        }
    }

    #[test]
    fn half_probabilities_give_ln2() {
        let d = design(vec![vec![0.0; 4]], vec![0.0, 1.0, 0.0, 1.0]);
        assert!((cross_entropy(0.0, &[0.0], &d) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_prediction_has_tiny_loss() {
        let d = design(vec![vec![1.0, -1.0]], vec![1.0, 0.0]);
        assert!(cross_entropy(0.0, &[40.0], &d) <= 1e-10);
    }

    #[test]
    fn intercept_only_irls_is_logit_of_mean() {
        let y = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let d = design(vec![], y);
        let m = fit_irls_design(&d, true).unwrap();
        assert!((m.intercept - logit(0.2)).abs() < 1e-8);
    }

    #[test]
    fn binary_feature_gives_log_odds_difference() {
        // group 0: 2/8 positive, group 1: 5/10 positive
        let mut x = vec![0.0; 8];
        x.extend(vec![1.0; 10]);
        let mut y = vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        y.extend([1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = fit_irls_design(&design(vec![x], y), true).unwrap();
        assert!((m.intercept - logit(0.25)).abs() < 1e-9);
        assert!((m.coefficients[0] - (logit(0.5) - logit(0.25))).abs() < 1e-9);
    }

    #[test]
    fn separation_is_reported() {
        let d = design(vec![vec![-2.0, -1.0, 1.0, 2.0]], vec![0.0, 0.0, 1.0, 1.0]);
        match fit_irls_design(&d, true) {
            Err(LinearError::Separation { columns }) => assert!(columns.contains(&"x0".into())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collinear_design_is_rank_deficient() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let d = design(vec![x.clone(), x], vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(fit_irls_design(&d, true), Err(LinearError::RankDeficient)));
    }

    #[test]
    fn heavy_penalty_zeroes_everything() {
        let x = vec![-1.5, -0.5, 0.5, 1.5, -1.0, 1.0];
        let y = vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let d = design(vec![x], y);
        let m = fit_penalized_design(&d, PenaltySpec::lasso(10.0), None, &SolverOptions::default()).unwrap();
        assert_eq!(m.coefficients, vec![0.0]);
        assert!((m.intercept - logit(1.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn importance_ranks_by_magnitude_then_name() {
        let mut m = fit_irls_design(&design(vec![], vec![0.0, 1.0]), true).unwrap();
        m.columns = vec!["a".into(), "b".into(), "c".into()];
        m.coefficients = vec![0.5, -1.2, 0.0];
        let r: Vec<String> = glm_importance(&m).into_iter().map(|x| x.0).collect();
        assert_eq!(r, ["b", "a", "c"]);
        m.coefficients = vec![0.0; 3];
        let r: Vec<String> = glm_importance(&m).into_iter().map(|x| x.0).collect();
        assert_eq!(r, ["a", "b", "c"]);
    }

    #[test]
    fn predict_constant_models() {
        let d = design(vec![vec![1.0, 2.0]], vec![0.0, 1.0]);
        let mut m = fit_irls_design(&design(vec![vec![0.0, 1.0, 0.0, 1.0]], vec![0.0, 1.0, 1.0, 0.0]), false).unwrap();
        m.columns = d.names.clone();
        m.intercept = 0.0;
        m.coefficients = vec![0.0];
        assert_eq!(m.predict_design(&d).unwrap(), vec![0.5, 0.5]);
        m.intercept = logit(0.2);
        for p in m.predict_design(&d).unwrap() {
            assert!((p - 0.2).abs() < 1e-15);
        }
        let other = design(vec![vec![1.0, 2.0]], vec![0.0, 1.0]);
        let renamed = Design { names: vec!["zzz".into()], ..other };
        assert!(m.predict_design(&renamed).is_err());
    }
}
