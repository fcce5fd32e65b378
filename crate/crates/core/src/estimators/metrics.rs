//! Estimator error metrics and the finite-difference noise-variance study.

use ndarray::{s, Array1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::ModelSpace;
use super::system::FdOrder;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Rescale the estimate by the real scalar minimising `‖x_T − a x_E‖₂`.
    Scaled,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub delta_h: f64,
    pub delta_hl: f64,
    /// `None` when the model has no dissipative coordinates or the true
    /// environment vanishes.
    pub delta_env: Option<f64>,
}

fn relative_error(truth: ndarray::ArrayView1<f64>, est: ndarray::ArrayView1<f64>) -> Option<f64> {
    let norm = truth.dot(&truth).sqrt();
    if norm == 0.0 {
        return None;
    }
    let d = &truth - &est;
    Some(d.dot(&d).sqrt() / norm)
}

/// Normalised 2-norm errors on the Hamiltonian sector, the full vector and
/// the dissipative sector.
pub fn error_metrics(x_true: &Array1<f64>, x_est: &Array1<f64>, model: &ModelSpace, mode: ScaleMode) -> Result<ErrorMetrics> {
    check_dim(model.dim(), x_true.len())?;
    check_dim(model.dim(), x_est.len())?;
    let est = match mode {
        ScaleMode::Absolute => x_est.clone(),
        ScaleMode::Scaled => {
            let ee = x_est.dot(x_est);
            let a = if ee > 0.0 { x_true.dot(x_est) / ee } else { 0.0 };
            x_est * a
        }
    };
    let h = model.hamiltonian_range();
    let delta_h = relative_error(x_true.slice(s![h.clone()]), est.slice(s![h]))
        .ok_or_else(|| Error::InvalidParameter("true Hamiltonian coordinates are all zero".into()))?;
    let delta_hl = relative_error(x_true.view(), est.view())
        .ok_or_else(|| Error::InvalidParameter("true model vector is zero".into()))?;
    let g = model.gamma_range();
    let delta_env = relative_error(x_true.slice(s![g.clone()]), est.slice(s![g]));
    Ok(ErrorMetrics { delta_h, delta_hl, delta_env })
}

pub const MIN_VARIANCE_SAMPLES: usize = 10_000;
const VARIANCE_BATCHES: usize = 20;

/// Monte-Carlo estimate of `Var[second-order stencil] / Var[first-order stencil]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatio {
    pub ratio: f64,
    /// 95% interval from batch means.
    pub ci_low: f64,
    pub ci_high: f64,
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Both stencils estimate the derivative at `t = 0` with the same step from
/// the same noisy triple `⟨O(0)⟩, ⟨O(δt)⟩, ⟨O(2δt)⟩`.
pub fn derivative_variance_ratio(samples: usize, sigma: f64, seed: u64) -> Result<VarianceRatio> {
    if samples < MIN_VARIANCE_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "{samples} samples is below the minimum of {MIN_VARIANCE_SAMPLES}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("noise level {sigma} must be > 0")));
    }
    let dt = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::with_capacity(samples);
    let mut second = Vec::with_capacity(samples);
    for _ in 0..samples {
        let triple: [f64; 3] = std::array::from_fn(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        });
        first.push(FdOrder::First.derivative(&triple, dt));
        second.push(FdOrder::Second.derivative(&triple, dt));
    }
    let ratio = variance(&second) / variance(&first);
    let per = samples / VARIANCE_BATCHES;
    let batches: Vec<f64> = (0..VARIANCE_BATCHES)
        .map(|b| {
            let r = b * per..(b + 1) * per;
            variance(&second[r.clone()]) / variance(&first[r])
        })
        .collect();
    let half = 2.093 * (variance(&batches) / VARIANCE_BATCHES as f64).sqrt();
    Ok(VarianceRatio { ratio, ci_low: ratio - half, ci_high: ratio + half })
}

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    check_dim(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::InvalidParameter("a line fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::model::GammaConstraint;

    fn model() -> ModelSpace {
        ModelSpace::local(2, 2, 1, GammaConstraint::UnconstrainedComplex).unwrap()
    }

    fn truth(m: &ModelSpace) -> Array1<f64> {
        Array1::from_shape_fn(m.dim(), |i| ((i * 7 + 3) % 11) as f64 - 5.0)
    }

    #[test]
    fn identical_and_rescaled_estimates() {
        let m = model();
        let x = truth(&m);
        let e = error_metrics(&x, &x, &m, ScaleMode::Absolute).unwrap();
        assert_eq!((e.delta_h, e.delta_hl, e.delta_env), (0.0, 0.0, Some(0.0)));
        let e = error_metrics(&x, &(&x * 2.0), &m, ScaleMode::Scaled).unwrap();
        assert!(e.delta_h < 1e-15 && e.delta_hl < 1e-15 && e.delta_env.unwrap() < 1e-15);
        let e = error_metrics(&x, &(&x * -0.5), &m, ScaleMode::Scaled).unwrap();
        assert!(e.delta_hl < 1e-15);
    }

    #[test]
    fn unit_perturbation_of_first_coordinate() {
        let m = model();
        let x = truth(&m);
        let h = x.slice(s![m.hamiltonian_range()]).to_owned();
        let mut est = x.clone();
        est[0] += h.dot(&h).sqrt();
        let e = error_metrics(&x, &est, &m, ScaleMode::Absolute).unwrap();
        assert!((e.delta_h - 1.0).abs() < 1e-14);
        assert_eq!(e.delta_env, Some(0.0));
    }

    #[test]
    fn zero_truth_sector_is_rejected() {
        let m = model();
        let mut x = truth(&m);
        x.slice_mut(s![m.hamiltonian_range()]).fill(0.0);
        assert!(error_metrics(&x, &x, &m, ScaleMode::Absolute).is_err());
        let mut x = truth(&m);
        x.slice_mut(s![m.gamma_range()]).fill(0.0);
        assert_eq!(error_metrics(&x, &x, &m, ScaleMode::Absolute).unwrap().delta_env, None);
        assert!(error_metrics(&x, &Array1::zeros(3), &m, ScaleMode::Absolute).is_err());
    }

    #[test]
    fn variance_ratio_analytic_value() {
        let r = derivative_variance_ratio(200_000, 0.01, 4).unwrap();
        assert!((r.ratio - 3.25).abs() < 0.05, "{r:?}");
        assert!(r.ci_low < r.ratio && r.ratio < r.ci_high);
        // Same stream scaled by σ gives the same ratio.
        let a = derivative_variance_ratio(20_000, 1.0, 9).unwrap();
        let b = derivative_variance_ratio(20_000, 1e-4, 9).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-9);
        assert!(derivative_variance_ratio(100, 1.0, 0).is_err());
    }

    #[test]
    fn fits() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        let y: Vec<f64> = x.iter().map(|v: &f64| 0.5 * v.powi(2)).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
    }
}
