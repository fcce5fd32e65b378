//! Solvers for correlation systems.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::metrics::{error_metrics, ErrorMetrics, ScaleMode};
use super::model::ModelSpace;
use super::system::CorrelationSystem;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, C64};

/// Default `gap / s0` below which a null vector is flagged ambiguous.
pub const DEFAULT_UNIQUENESS_RATIO: f64 = 10.0;
/// Relative singular-value cutoff for the pseudoinverse.
pub const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    SvdNull,
    #[serde(alias = "lsq")]
    LeastSquares,
    #[serde(alias = "psd")]
    PsdConstrained,
}

impl SolverKind {
    pub fn short_name(self) -> &'static str {
        match self {
            SolverKind::SvdNull => "svd-null",
            SolverKind::LeastSquares => "lsq",
            SolverKind::PsdConstrained => "psd",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd-null" => Ok(SolverKind::SvdNull),
            "lsq" | "least-squares" => Ok(SolverKind::LeastSquares),
            "psd" | "psd-constrained" => Ok(SolverKind::PsdConstrained),
            _ => Err(Error::InvalidParameter(format!("unknown solver {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub solver: SolverKind,
    pub x_est: Vec<f64>,
    /// Descending, padded with zeros to the model dimension.
    pub singular_values: Vec<f64>,
    pub s0: f64,
    pub gap: f64,
    pub ambiguous: bool,
    pub rank: usize,
    /// `‖C x‖` or `‖C' x − W‖`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: Option<f64>,
    /// Smallest eigenvalue over the Hermitized γ blocks.
    pub min_gamma_eigenvalue: Option<f64>,
    pub delta_h: Option<f64>,
    pub delta_hl: Option<f64>,
    pub delta_env: Option<f64>,
}

impl EstimationReport {
    /// Fills the error metrics against a known truth. Null-vector estimates are
    /// compared after optimal rescaling.
    pub fn evaluate(&mut self, x_true: &Array1<f64>, model: &ModelSpace) -> Result<ErrorMetrics> {
        let mode = match self.solver {
            SolverKind::SvdNull => ScaleMode::Scaled,
            _ => ScaleMode::Absolute,
        };
        let m = error_metrics(x_true, &Array1::from(self.x_est.clone()), model, mode)?;
        self.delta_h = Some(m.delta_h);
        self.delta_hl = Some(m.delta_hl);
        self.delta_env = m.delta_env;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain data")
    }

    pub fn x(&self) -> Array1<f64> {
        Array1::from(self.x_est.clone())
    }
}

/// `(s0, gap)` from a descending spectrum.
fn spectrum_tail(s: &[f64]) -> (f64, f64) {
    let n = s.len();
    let s0 = s[n - 1];
    let gap = if n >= 2 { s[n - 2] - s0 } else { f64::INFINITY };
    (s0, gap)
}

fn padded_spectrum(s: &Array1<f64>, cols: usize) -> Vec<f64> {
    let mut v: Vec<f64> = s.to_vec();
    v.resize(cols, 0.0);
    v
}

fn rank_of(s: &[f64]) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > PINV_CUTOFF * smax && v > 0.0).count()
}

pub fn svd_null_estimator(system: &CorrelationSystem) -> Result<EstimationReport> {
    svd_null_estimator_with(system, DEFAULT_UNIQUENESS_RATIO)
}

/// Right singular vector of the smallest singular value, unit norm, with the
/// first nonzero Hamiltonian coordinate made positive.
pub fn svd_null_estimator_with(system: &CorrelationSystem, uniqueness_ratio: f64) -> Result<EstimationReport> {
    if !system.is_homogeneous() {
        return Err(Error::InvalidParameter("null-vector estimator needs a homogeneous system".into()));
    }
    if system.rows() == 0 || system.cols() == 0 {
        return Err(Error::InvalidParameter("empty correlation system".into()));
    }
    let cols = system.cols();
    let a = system.matrix();
    let d = linalg::svd(a, a.nrows() < cols)?;
    let spectrum = padded_spectrum(&d.s, cols);
    let (s0, gap) = spectrum_tail(&spectrum);
    let mut x = d.v.column(cols - 1).to_owned();
    let pivot = x
        .iter()
        .take(system.hamiltonian_cols().max(1))
        .find(|v| v.abs() > 1e-12)
        .copied()
        .unwrap_or(1.0);
    if pivot < 0.0 {
        x.mapv_inplace(|v| -v);
    }
    // Roundoff-level singular values count as zero.
    let floor = f64::EPSILON * a.nrows().max(cols) as f64 * spectrum[0];
    let ambiguous = !(gap > 0.0 && gap >= uniqueness_ratio * s0.max(floor));
    let r = system.matrix().dot(&x);
    Ok(EstimationReport {
        solver: SolverKind::SvdNull,
        x_est: x.to_vec(),
        rank: rank_of(&spectrum),
        singular_values: spectrum,
        s0,
        gap,
        ambiguous,
        residual: r.dot(&r).sqrt(),
        iterations: 1,
        converged: true,
        objective: None,
        min_gamma_eigenvalue: None,
        delta_h: None,
        delta_hl: None,
        delta_env: None,
    })
}

fn rhs_of(system: &CorrelationSystem) -> Result<&Array1<f64>> {
    system
        .rhs()
        .ok_or_else(|| Error::InvalidParameter("least-squares estimators need a right-hand side".into()))
}

fn pseudo_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<(Array1<f64>, Vec<f64>, usize)> {
    let cols = a.ncols();
    if a.nrows() == 0 {
        return Ok((Array1::zeros(cols), vec![0.0; cols], 0));
    }
    let d = linalg::svd(a, false)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let mut x = Array1::zeros(cols);
    let mut rank = 0;
    for (k, &sk) in d.s.iter().enumerate() {
        if sk > PINV_CUTOFF * smax && sk > 0.0 {
            rank += 1;
            let coeff = d.u.column(k).dot(b) / sk;
            x.scaled_add(coeff, &d.v.column(k));
        }
    }
    Ok((x, padded_spectrum(&d.s, cols), rank))
}

/// Minimum-norm solution of `min ‖C' x − W‖₂` through the SVD pseudoinverse.
pub fn least_squares_estimator(system: &CorrelationSystem) -> Result<EstimationReport> {
    let b = rhs_of(system)?;
    let (x, spectrum, rank) = pseudo_solve(system.matrix(), b)?;
    let (s0, gap) = spectrum_tail(&spectrum);
    let r = system.matrix().dot(&x) - b;
    let residual = r.dot(&r).sqrt();
    Ok(EstimationReport {
        solver: SolverKind::LeastSquares,
        x_est: x.to_vec(),
        singular_values: spectrum,
        s0,
        gap,
        ambiguous: rank < system.cols(),
        rank,
        residual,
        iterations: 1,
        converged: true,
        objective: Some(residual * residual),
        min_gamma_eigenvalue: None,
        delta_h: None,
        delta_hl: None,
        delta_env: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdOptions {
    /// Stop when the relative objective change falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PsdOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 100_000 }
    }
}

/// Replaces the Hermitian part of every γ block by its projection onto the
/// PSD cone; the anti-Hermitian part is kept. Returns the smallest Hermitian
/// eigenvalue after projection.
pub fn project_gamma_blocks(x: &mut Array1<f64>, model: &ModelSpace) -> Result<f64> {
    let mut min_eig = f64::INFINITY;
    for r in 0..model.regions().len() {
        let gamma = model.gamma_matrix(x, r);
        let herm = linalg::hermitize(&gamma);
        let anti = &gamma - &herm;
        let (eigs, vecs) = linalg::hermitian_eig(&herm)?;
        let clipped = Array2::from_diag(&eigs.mapv(|e| C64::new(e.max(0.0), 0.0)));
        let projected = vecs.dot(&clipped).dot(&linalg::dagger(&vecs)) + anti;
        model.set_gamma(x, r, &projected);
        let after = linalg::hermitian_eig(&linalg::hermitize(&model.gamma_matrix(x, r)))?.0;
        min_eig = after.iter().copied().fold(min_eig, f64::min);
    }
    Ok(min_eig)
}

pub fn psd_constrained_estimator(system: &CorrelationSystem, model: &ModelSpace) -> Result<EstimationReport> {
    psd_constrained_estimator_with(system, model, PsdOptions::default())
}

/// `min ‖C' x − W‖₂²` subject to every Hermitized γ block being PSD, solved by
/// accelerated projected gradient with adaptive restart.
///
/// Iterates live in Frobenius-weighted coordinates `z = w ∘ x`, where the
/// block projection is the Euclidean one.
pub fn psd_constrained_estimator_with(
    system: &CorrelationSystem,
    model: &ModelSpace,
    opts: PsdOptions,
) -> Result<EstimationReport> {
    let b = rhs_of(system)?;
    check_dim(model.dim(), system.cols())?;
    let a = system.matrix();
    let w = model.frobenius_weights();
    let a_z = a / &w.view().insert_axis(ndarray::Axis(0));
    let q = a_z.t().dot(&a_z);
    let lin = a_z.t().dot(b);
    let bb = b.dot(b);
    let objective = |z: &Array1<f64>| z.dot(&q.dot(z)) - 2.0 * lin.dot(z) + bb;
    let lmax = linalg::symmetric_eigenvalues(&q)?.into_iter().fold(0.0, f64::max);

    let project = |z: &Array1<f64>| -> Result<(Array1<f64>, f64)> {
        let mut x = z / &w;
        let min_eig = project_gamma_blocks(&mut x, model)?;
        Ok((&x * &w, min_eig))
    };

    let lsq = least_squares_estimator(system)?;
    let (mut z, mut min_eig) = project(&(&lsq.x() * &w))?;
    let mut f = objective(&z);
    let mut iterations = 0;
    let mut converged = lmax == 0.0;
    if !converged {
        let step = 1.0 / (2.0 * lmax);
        let mut y = z.clone();
        let mut t = 1.0f64;
        while iterations < opts.max_iterations {
            iterations += 1;
            let grad = (q.dot(&y) - &lin) * 2.0;
            let (z_next, eig) = project(&(&y - &(grad * step)))?;
            let f_next = objective(&z_next);
            let restart = (&y - &z_next).dot(&(&z_next - &z)) > 0.0;
            if restart {
                t = 1.0;
                y = z_next.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                y = &z_next + &((&z_next - &z) * ((t - 1.0) / t_next));
                t = t_next;
            }
            let change = (f_next - f).abs();
            z = z_next;
            min_eig = eig;
            let scale = f.abs().max(f_next.abs());
            f = f_next;
            if change <= opts.tolerance * scale || scale == 0.0 {
                converged = true;
                break;
            }
        }
    }
    let x = &z / &w;
    let r = a.dot(&x) - b;
    Ok(EstimationReport {
        solver: SolverKind::PsdConstrained,
        x_est: x.to_vec(),
        singular_values: lsq.singular_values,
        s0: lsq.s0,
        gap: lsq.gap,
        ambiguous: lsq.ambiguous,
        rank: lsq.rank,
        residual: r.dot(&r).sqrt(),
        iterations,
        converged,
        objective: Some(f.max(0.0)),
        min_gamma_eigenvalue: if model.regions().is_empty() { None } else { Some(min_eig) },
        delta_h: None,
        delta_hl: None,
        delta_env: None,
    })
}
