//! Analytic critical lines from the replica saddle point.
//!
//! The only input the theory needs from a measure family is the covariance
//! coefficient `c`, defined by `E[y_i^ω y_i^ω'] = δ_ωω' + c / Ω`.

pub mod halfmoment;
pub mod saddle;

pub use halfmoment::{i1, i2, i_n_quadrature, normal_cdf, normal_pdf, MomentOrder};
pub use saddle::{saddle_residuals, solve_critical_n, SaddleBranch, SaddleSolution, SolveOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{AnalyticFamily, FamilyTemplate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("covariance coefficient diverges (volume infinite at every density)")]
    DivergentCoefficient,
    #[error("covariance coefficient {0} < -1 violates positive semidefiniteness")]
    CoefficientBelowMinusOne(f64),
    #[error("saddle solver did not converge for c_eff = {c_eff}: last iterate xi = {xi}, n = {n}, residual = {residual:e}")]
    NoConvergence { c_eff: f64, xi: f64, n: f64, residual: f64 },
    #[error("kappa = {0} outside (0, 1]")]
    InvalidKappa(f64),
    #[error("delta = {0} must be positive")]
    InvalidDelta(f64),
    #[error("finite-size evaluation needs a state count")]
    MissingStates,
    #[error("parameter grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error("no self-consistent density found for {param} = {value}")]
    NoSelfConsistentRoot { param: &'static str, value: f64 },
    #[error("critical line failed at {param} = {value}: {source}")]
    LinePoint {
        param: &'static str,
        value: f64,
        #[source]
        source: Box<TheoryError>,
    },
}

/// How the family's coefficient is fed into the saddle equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretation {
    /// The coefficient `c` itself.
    #[default]
    CoefficientDirect,
    /// `sign(c) √|c|`.
    SignedSqrt,
}

impl Interpretation {
    pub const ALL: [Interpretation; 2] = [Self::CoefficientDirect, Self::SignedSqrt];

    pub fn label(self) -> &'static str {
        match self {
            Self::CoefficientDirect => "direct",
            Self::SignedSqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovCoefficient {
    pub c: f64,
    pub interpretation: Interpretation,
}

impl CovCoefficient {
    pub fn new(c: f64, interpretation: Interpretation) -> Self {
        Self { c, interpretation }
    }

    pub fn effective(&self) -> f64 {
        match self.interpretation {
            Interpretation::CoefficientDirect => self.c,
            Interpretation::SignedSqrt => self.c.signum() * self.c.abs().sqrt(),
        }
    }
}

/// State count used when evaluating a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OmegaSpec {
    Thermodynamic,
    /// A fixed number of states.
    States(f64),
    /// A fixed number of assets; `Ω = N / n` is solved self-consistently
    /// with the critical density.
    Assets(f64),
}

/// `c = 1/κ − 2` for subsets; `c = Δ / Ω^(α−2) − 1` for perturbations.
///
/// In the thermodynamic limit the perturbed coefficient is `−1` for
/// `α > 2`, `Δ − 1` at `α = 2`, and divergent for `α < 2`.
pub fn cov_coefficient(
    family: &AnalyticFamily,
    omega: Option<f64>,
    interpretation: Interpretation,
) -> Result<CovCoefficient, TheoryError> {
    let c = match *family {
        AnalyticFamily::Subset { kappa } => {
            if !(kappa > 0.0 && kappa <= 1.0) {
                return Err(TheoryError::InvalidKappa(kappa));
            }
            1.0 / kappa - 2.0
        }
        AnalyticFamily::Perturbed { delta, alpha } => {
            if !(delta > 0.0) {
                return Err(TheoryError::InvalidDelta(delta));
            }
            match omega {
                Some(omega) => delta / omega.powf(alpha - 2.0) - 1.0,
                None if alpha > 2.0 => -1.0,
                None if alpha == 2.0 => delta - 1.0,
                None => return Err(TheoryError::DivergentCoefficient),
            }
        }
    };
    Ok(CovCoefficient::new(c, interpretation))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLine {
    pub family: FamilyTemplate,
    pub interpretation: Interpretation,
    pub omega: OmegaSpec,
    /// `(parameter, n_c)` pairs in increasing parameter order.
    pub points: Vec<(f64, f64)>,
}

impl CriticalLine {
    /// Linear interpolation of `n_c` at `param`; `None` outside the line.
    pub fn interpolate(&self, param: f64) -> Option<f64> {
        let pts = &self.points;
        let (first, last) = (pts.first()?, pts.last()?);
        let tol = 1e-9 * (last.0 - first.0).abs().max(1.0);
        if param < first.0 - tol || param > last.0 + tol {
            return None;
        }
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if param <= x1 + tol {
                let t = ((param - x0) / (x1 - x0)).clamp(0.0, 1.0);
                return Some(y0 + t * (y1 - y0));
            }
        }
        Some(last.1)
    }
}

fn point(
    analytic: &AnalyticFamily,
    omega: Option<f64>,
    interp: Interpretation,
    opts: &SolveOptions,
) -> Result<SaddleSolution, TheoryError> {
    let cc = cov_coefficient(analytic, omega, interp)?;
    solve_critical_n(&cc, opts)
}

/// `n_c` with `Ω = N / n_c`, found by scanning for the largest sign change of
/// `n_c(c(N/n)) − n` and bisecting.
fn self_consistent(
    analytic: &AnalyticFamily,
    n_assets: f64,
    interp: Interpretation,
    opts: &SolveOptions,
) -> Result<Option<f64>, TheoryError> {
    let h = |n: f64| -> Result<f64, TheoryError> {
        Ok(point(analytic, Some(n_assets / n), interp, opts)?.n_c - n)
    };
    const SCAN: usize = 400;
    let mut hi = 1.0;
    let mut h_hi = h(hi)?;
    if h_hi >= 0.0 {
        return Ok(Some(1.0));
    }
    for k in 1..=SCAN {
        let lo = 10f64.powf(-6.0 * k as f64 / SCAN as f64);
        let h_lo = h(lo)?;
        if h_lo >= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if h(mid)? >= 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a < 1e-14 {
                    break;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        hi = lo;
        h_hi = h_lo;
    }
    let _ = h_hi;
    Ok(None)
}

/// Maps each parameter through the coefficient and the saddle solver.
pub fn critical_line(
    family: &FamilyTemplate,
    param_grid: &[f64],
    omega: OmegaSpec,
    interpretation: Interpretation,
) -> Result<CriticalLine, TheoryError> {
    if param_grid.is_empty() || param_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TheoryError::BadGrid);
    }
    let name = family.param_name();
    let wrap = |value: f64| move |e: TheoryError| TheoryError::LinePoint {
        param: name,
        value,
        source: Box::new(e),
    };
    let mut opts = SolveOptions::default();
    let mut points = Vec::with_capacity(param_grid.len());
    for &value in param_grid {
        let analytic = family.analytic(value);
        let n_c = match omega {
            OmegaSpec::Thermodynamic | OmegaSpec::States(_) => {
                let states = match omega {
                    OmegaSpec::States(s) => Some(s),
                    _ => None,
                };
                let sol = point(&analytic, states, interpretation, &opts).map_err(wrap(value))?;
                if sol.xi.is_finite() {
                    opts.seed = Some((sol.xi, sol.n_c));
                }
                sol.n_c
            }
            OmegaSpec::Assets(n_assets) => self_consistent(&analytic, n_assets, interpretation, &opts)
                .map_err(wrap(value))?
                .ok_or(TheoryError::NoSelfConsistentRoot { param: name, value })?,
        };
        points.push((value, n_c));
    }
    Ok(CriticalLine {
        family: *family,
        interpretation,
        omega,
        points,
    })
}
