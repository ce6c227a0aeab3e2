//! Saddle-point systems for the critical asset density.
//!
//! With `a = ξ √(n |c|)` the two systems read
//!
//! ```text
//! c < 0:  1 + ξ² − I₂(a)/n = 0,   −ξ + √(|c|/n) I₁(a) = 0
//! c > 0:  1 − ξ² − I₂(a)/n = 0,    ξ + √(c/n)  I₁(a) = 0
//! ```
//!
//! In both cases the second equation gives `a + c I₁(a) = 0`, which has a
//! unique root for `c > −1` because its derivative `1 + c Φ(a)` is positive.
//! Since `ξ² = a² / (n |c|)` and `a² / |c| = ∓ a I₁(a)` on the root, the first
//! equation becomes `n = I₂(a) − a I₁(a) = Φ(a)`. The solver brackets that root,
//! then polishes `(ξ, n)` with damped Newton on the full system so the
//! reported residuals are those of the original equations.

use serde::{Deserialize, Serialize};

use super::halfmoment::{i1, i2, normal_cdf, normal_pdf};
use super::{CovCoefficient, TheoryError};

/// Below this distance from `c = −1` the root is treated as the `n_c = 1` limit.
pub const DEGENERATE_UNITY_GAP: f64 = 1e-6;
/// Magnitude under which the coefficient counts as exactly zero.
pub const DEGENERATE_ZERO_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaddleBranch {
    NegativeC,
    PositiveC,
    DegenerateUnity,
    DegenerateZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleSolution {
    pub xi: f64,
    pub n_c: f64,
    /// Overall saddle scale; fixed to 1 by the normalization `φ = s² = 1`.
    pub s_scale: f64,
    /// Max of `|f1| / (1 + ξ²)` and `|f2| / (1 + |ξ|)`.
    pub residual_norm: f64,
    pub branch: SaddleBranch,
    /// The effective coefficient actually fed to the equations.
    pub c_eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Starting point `(ξ, n)` for the Newton fallback, e.g. from a
    /// neighbouring point of a critical line.
    pub seed: Option<(f64, f64)>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
            seed: None,
        }
    }
}

/// `(f1, f2)` of the saddle system for the effective coefficient `c_eff`.
pub fn saddle_residuals(n: f64, xi: f64, c_eff: f64) -> (f64, f64) {
    let m = c_eff.abs();
    let a = xi * (n * m).sqrt();
    let ratio = (m / n).sqrt();
    if c_eff < 0.0 {
        (1.0 + xi * xi - i2(a) / n, -xi + ratio * i1(a))
    } else {
        (1.0 - xi * xi - i2(a) / n, xi + ratio * i1(a))
    }
}

fn scaled_residual(n: f64, xi: f64, c_eff: f64) -> f64 {
    let (f1, f2) = saddle_residuals(n, xi, c_eff);
    (f1.abs() / (1.0 + xi * xi)).max(f2.abs() / (1.0 + xi.abs()))
}

/// Root of `a + c I₁(a) = 0` by safeguarded Newton inside a sign-change bracket.
fn reduced_root(c: f64, max_iter: usize) -> Option<f64> {
    let g = |a: f64| a + c * i1(a);
    let dg = |a: f64| 1.0 + c * normal_cdf(a);
    let (mut lo, mut hi) = if c > 0.0 {
        // I₁ is increasing, so a ≥ −c I₁(0) on the root.
        (-c * i1(0.0) - 1.0, 0.0)
    } else {
        let m = -c;
        // I₁(a) ≤ a + φ(0) for a ≥ 0.
        (0.0, m * i1(0.0) / (1.0 - m) + 1.0)
    };
    if g(lo) > 0.0 || g(hi) < 0.0 {
        return None;
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..max_iter.max(200) {
        let ga = g(a);
        if ga == 0.0 {
            return Some(a);
        }
        if ga < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let step = a - ga / dg(a);
        let next = if (lo..=hi).contains(&step) { step } else { 0.5 * (lo + hi) };
        let scale = 4.0 * f64::EPSILON * next.abs().max(1.0);
        if (next - a).abs() <= scale || hi - lo <= scale {
            return Some(next);
        }
        a = next;
    }
    Some(a)
}

/// Damped Newton on the full two-equation system with a forward-difference
/// Jacobian. Returns the best iterate seen.
fn newton_polish(mut xi: f64, mut n: f64, c_eff: f64, opts: &SolveOptions) -> (f64, f64, f64) {
    let mut best = (xi, n, scaled_residual(n, xi, c_eff));
    for _ in 0..opts.max_iter {
        if best.2 < 1e-14 {
            break;
        }
        let (f1, f2) = saddle_residuals(n, xi, c_eff);
        let hx = 1e-7 * xi.abs().max(1.0);
        let hn = 1e-7 * n.abs().max(1e-3);
        let (g1x, g2x) = saddle_residuals(n, xi + hx, c_eff);
        let (g1n, g2n) = saddle_residuals(n + hn, xi, c_eff);
        let (j11, j21) = ((g1x - f1) / hx, (g2x - f2) / hx);
        let (j12, j22) = ((g1n - f1) / hn, (g2n - f2) / hn);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dxi = (f1 * j22 - f2 * j12) / det;
        let dn = (j11 * f2 - j21 * f1) / det;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let (cx, cn) = (xi - t * dxi, n - t * dn);
            if cn > 0.0 {
                let r = scaled_residual(cn, cx, c_eff);
                if r < best.2 {
                    xi = cx;
                    n = cn;
                    best = (xi, n, r);
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    best
}

/// Critical density for a covariance coefficient under its interpretation.
pub fn solve_critical_n(cc: &CovCoefficient, opts: &SolveOptions) -> Result<SaddleSolution, TheoryError> {
    let c = cc.effective();
    if !c.is_finite() {
        return Err(TheoryError::DivergentCoefficient);
    }
    if c < -1.0 - 1e-12 {
        return Err(TheoryError::CoefficientBelowMinusOne(c));
    }
    if c.abs() < DEGENERATE_ZERO_EPS {
        return Ok(SaddleSolution {
            xi: 0.0,
            n_c: 0.5,
            s_scale: 1.0,
            residual_norm: scaled_residual(0.5, 0.0, 0.0),
            branch: SaddleBranch::DegenerateZero,
            c_eff: c,
        });
    }
    if c + 1.0 < DEGENERATE_UNITY_GAP {
        // ξ → ∞ with n → 1.
        return Ok(SaddleSolution {
            xi: f64::INFINITY,
            n_c: 1.0,
            s_scale: 1.0,
            residual_norm: 0.0,
            branch: SaddleBranch::DegenerateUnity,
            c_eff: c,
        });
    }
    let branch = if c > 0.0 {
        SaddleBranch::PositiveC
    } else {
        SaddleBranch::NegativeC
    };
    let m = c.abs();
    let (xi0, n0) = match reduced_root(c, opts.max_iter) {
        Some(a) => {
            let n = normal_cdf(a);
            (a / (n * m).sqrt(), n)
        }
        None => opts.seed.unwrap_or((0.0, 0.5)),
    };
    let (xi, n, residual) = newton_polish(xi0, n0, c, opts);
    if !(residual < opts.tol) || !(n > 0.0 && n <= 1.0) {
        return Err(TheoryError::NoConvergence {
            c_eff: c,
            xi,
            n,
            residual,
        });
    }
    Ok(SaddleSolution {
        xi,
        n_c: n,
        s_scale: 1.0,
        residual_norm: residual,
        branch,
        c_eff: c,
    })
}

/// Slope `dn_c/dc` from implicit differentiation of `a + c I₁(a) = 0`.
pub fn critical_slope(c: f64) -> Option<f64> {
    let a = reduced_root(c, 200)?;
    let da_dc = -i1(a) / (1.0 + c * normal_cdf(a));
    Some(normal_pdf(a) * da_dc)
}
