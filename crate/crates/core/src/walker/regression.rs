//! Weighted log-log fits of return-probability estimates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `ln y = a + b ln n`.
    Power,
    /// `ln y = a + b (ln n + ln ln n)`.
    PowerLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: f64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// `1.96` standard errors, inflated by `sqrt(χ²/dof)` when the fit is worse than the error bars.
    pub half_width: f64,
    pub residuals: Vec<f64>,
    pub weighted_ssr: f64,
    pub reduced_chi2: f64,
    /// The tied coefficient of `ln ln n` in the power-log model.
    pub log_correction: Option<f64>,
}

/// Fits `ln(estimate)` against the model regressor.
///
/// Weights are `(estimate / stderr)^2`, the inverse delta-method variance of `ln(estimate)`.
/// If every `stderr` is zero the fit is unweighted.
pub fn fit_exponent(points: &[FitPoint], model: FitModel) -> Result<RegressionResult> {
    if points.len() < 4 {
        return invalid(format!("need at least 4 points, got {}", points.len()));
    }
    if let Some(p) = points.iter().find(|p| !(p.estimate > 0.0 && p.estimate.is_finite())) {
        return invalid(format!("nonpositive estimate {} at n = {}", p.estimate, p.n));
    }
    let min_n = if model == FitModel::PowerLog { 1.0 } else { 0.0 };
    if let Some(p) = points.iter().find(|p| !(p.n > min_n)) {
        return invalid(format!("horizon {} outside the model's domain", p.n));
    }
    let unweighted = points.iter().all(|p| p.stderr == 0.0);
    if !unweighted && points.iter().any(|p| !(p.stderr > 0.0)) {
        return invalid("standard errors must be all positive or all zero");
    }
    let xs: Vec<f64> = points
        .iter()
        .map(|p| match model {
            FitModel::Power => p.n.ln(),
            FitModel::PowerLog => p.n.ln() + p.n.ln().ln(),
        })
        .collect();
    let ys: Vec<f64> = points.iter().map(|p| p.estimate.ln()).collect();
    let ws: Vec<f64> = points
        .iter()
        .map(|p| if unweighted { 1.0 } else { (p.estimate / p.stderr).powi(2) })
        .collect();
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(&ys).zip(&ws) {
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let delta = s * sxx - sx * sx;
    if !(delta > 0.0) {
        return invalid("horizons must not all coincide");
    }
    let slope = (s * sxy - sx * sy) / delta;
    let intercept = (sy - slope * sx) / s;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    let weighted_ssr: f64 = residuals.iter().zip(&ws).map(|(r, w)| w * r * r).sum();
    let dof = (points.len() - 2) as f64;
    let reduced_chi2 = weighted_ssr / dof;
    let scale = if unweighted { reduced_chi2 } else { reduced_chi2.max(1.0) };
    let slope_stderr = (s / delta * scale).sqrt();
    Ok(RegressionResult {
        model,
        slope,
        intercept,
        slope_stderr,
        half_width: 1.96 * slope_stderr,
        residuals,
        weighted_ssr,
        reduced_chi2,
        log_correction: (model == FitModel::PowerLog).then_some(slope),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(f: impl Fn(f64) -> f64) -> Vec<FitPoint> {
        [16.0, 32.0, 64.0, 128.0, 256.0].iter().map(|&n| FitPoint { n, estimate: f(n), stderr: 0.0 }).collect()
    }

    #[test]
    fn exact_power_data() {
        let r = fit_exponent(&pts(|n| 3.0 * n.powi(-4)), FitModel::Power).unwrap();
        assert!((r.slope + 4.0).abs() < 1e-12);
        assert!((r.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(r.half_width < 1e-9);
    }

    #[test]
    fn exact_power_log_data() {
        let r = fit_exponent(&pts(|n| (n * n.ln()).powi(-2)), FitModel::PowerLog).unwrap();
        assert!((r.slope + 2.0).abs() < 1e-12);
        assert_eq!(r.log_correction, Some(r.slope));
        let p = fit_exponent(&pts(|n| (n * n.ln()).powi(-2)), FitModel::Power).unwrap();
        assert!(p.weighted_ssr > r.weighted_ssr);
    }

    #[test]
    fn weights_follow_relative_errors() {
        // A bad point with a huge error bar barely moves the fit.
        let mut p: Vec<FitPoint> =
            pts(|n| n.powi(-1)).into_iter().map(|q| FitPoint { stderr: q.estimate * 0.01, ..q }).collect();
        p[2].estimate *= 3.0;
        p[2].stderr = p[2].estimate * 100.0;
        let r = fit_exponent(&p, FitModel::Power).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        let mut p = pts(|n| n.powi(-1));
        assert!(fit_exponent(&p[..3], FitModel::Power).is_err());
        p[1].estimate = 0.0;
        assert!(fit_exponent(&p, FitModel::Power).is_err());
    }
}
