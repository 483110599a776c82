//! Yeo-Johnson power transform and its maximum-likelihood exponent.

/// Search interval for the exponent.
pub const THETA_BOUNDS: (f64, f64) = (-5.0, 5.0);
pub const THETA_TOL: f64 = 1e-6;

/// `psi(x, theta)`:
///
/// ```text
/// x >= 0, theta != 0: ((x + 1)^theta - 1) / theta
/// x >= 0, theta == 0: ln(x + 1)
/// x <  0, theta != 2: -((1 - x)^(2 - theta) - 1) / (2 - theta)
/// x <  0, theta == 2: -ln(1 - x)
/// ```
pub fn yeo_johnson(x: f64, theta: f64) -> f64 {
    if theta == 1.0 {
        return x;
    }
    if x >= 0.0 {
        if theta == 0.0 {
            x.ln_1p()
        } else {
            (theta * x.ln_1p()).exp_m1() / theta
        }
    } else if theta == 2.0 {
        -(-x).ln_1p()
    } else {
        let a = 2.0 - theta;
        -(a * (-x).ln_1p()).exp_m1() / a
    }
}

/// Gaussian profile log-likelihood of the transformed sample, up to a
/// constant: `-n/2 ln(s^2) + (theta - 1) sum sign(x) ln(|x| + 1)` with `s^2`
/// the maximum-likelihood variance.
pub fn log_likelihood(x: &[f64], theta: f64) -> f64 {
    let n = x.len() as f64;
    let t: Vec<f64> = x.iter().map(|&v| yeo_johnson(v, theta)).collect();
    let m = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    let jac: f64 = x.iter().map(|&v| v.signum() * v.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (theta - 1.0) * jac
}

/// Exponent maximizing [`log_likelihood`] on [`THETA_BOUNDS`] by
/// golden-section search. Columns with fewer than two distinct finite
/// values get `theta = 1`.
pub fn yeo_johnson_fit(x: &[f64]) -> f64 {
    let finite: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    let distinct = finite.iter().any(|&v| v != finite[0]);
    if finite.len() < 2 || !distinct {
        return 1.0;
    }
    let f = |t: f64| {
        let v = log_likelihood(&finite, t);
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    };
    let (mut a, mut b) = THETA_BOUNDS;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > THETA_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // the likelihood is not guaranteed unimodal; keep an endpoint if better
    let mut best = (mid, f(mid));
    for t in [THETA_BOUNDS.0, THETA_BOUNDS.1] {
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        for t in [-5.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.3] {
            assert_eq!(yeo_johnson(0.0, t), 0.0);
        }
    }

    #[test]
    fn log_branches() {
        let ln4 = 4f64.ln();
        assert!((yeo_johnson(3.0, 0.0) - ln4).abs() <= f64::EPSILON * ln4);
        assert!((yeo_johnson(-3.0, 2.0) + ln4).abs() <= f64::EPSILON * ln4);
    }

    #[test]
    fn continuous_at_removable_points() {
        for x in [-2.0, -0.3, 0.4, 7.0] {
            assert!((yeo_johnson(x, 1e-9) - yeo_johnson(x, 0.0)).abs() < 1e-7);
            assert!((yeo_johnson(x, 2.0 - 1e-9) - yeo_johnson(x, 2.0)).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_column_is_identity() {
        assert_eq!(yeo_johnson_fit(&[3.0; 10]), 1.0);
        assert_eq!(yeo_johnson_fit(&[3.0]), 1.0);
    }
}
