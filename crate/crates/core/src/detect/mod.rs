//! Zero-versus-infinite arbitrage volume.
//!
//! The arbitrage region `{z : Σ_i z_i y_i^ω ≥ 0 ∀ω}` is a cone through the
//! origin, so its volume is either zero or infinite. It is infinite exactly
//! when the cone has an interior point, i.e. when some portfolio earns a
//! strictly positive excess return in every state. [`detect`] decides this
//! with a linear program; [`detect_hull_oracle`] decides it independently by
//! testing whether the origin lies in the convex hull of the state vectors.

mod hull;
mod simplex;

pub use hull::{detect_hull_oracle, HULL_ORACLE_MAX_ASSETS, HULL_ORACLE_MAX_STATES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("simplex did not terminate within {pivots} pivots; instance undecided")]
    Undecided { pivots: usize },
    #[error("non-finite excess return at asset {asset}, state {state}")]
    NonFinite { asset: usize, state: usize },
    #[error("empty return matrix ({0} x {1})")]
    Empty(usize, usize),
    #[error("oracle limited to N <= {max_assets}, Omega <= {max_states}; got {n_assets} x {n_states}")]
    OracleCap {
        n_assets: usize,
        n_states: usize,
        max_assets: usize,
        max_states: usize,
    },
    #[error("length mismatch: witness has {got} weights, market has {expected} assets")]
    Length { got: usize, expected: usize },
    #[error("numerical breakdown in simplex: {0}")]
    Numerical(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeKind {
    ZeroVolume,
    InfiniteVolume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    Bland,
    #[default]
    DantzigBlandFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Strict-positivity threshold on the optimal margin.
    pub tol: f64,
    pub max_pivots: usize,
    pub pivot_rule: PivotRule,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_pivots: 200_000,
            pivot_rule: PivotRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageVerdict {
    pub kind: VolumeKind,
    /// Portfolio with `max |z_i| ≤ 1` earning more than `tol` in every state.
    pub witness: Option<Vec<f64>>,
    /// `min_ω Σ_i z_i y_i^ω` for the LP portfolio (a lower bound on `t*`).
    pub margin: f64,
    /// `‖Σ_ω λ_ω y^ω‖₁` for the LP state weights (an upper bound on `t*`).
    pub dual_bound: f64,
    /// Neither bound clearly separates the instance from the threshold.
    pub marginal: bool,
    pub pivots: usize,
}

impl ArbitrageVerdict {
    pub fn is_infinite(&self) -> bool {
        self.kind == VolumeKind::InfiniteVolume
    }
}

fn check_input(returns: &Matrix) -> Result<(), DetectError> {
    if returns.rows() == 0 || returns.cols() == 0 {
        return Err(DetectError::Empty(returns.rows(), returns.cols()));
    }
    for i in 0..returns.rows() {
        if let Some(w) = returns.row(i).iter().position(|v| !v.is_finite()) {
            return Err(DetectError::NonFinite { asset: i, state: w });
        }
    }
    Ok(())
}

/// `min_ω Σ_i z_i y_i^ω` for an `N × Ω` return matrix.
pub fn portfolio_margin(returns: &Matrix, z: &[f64]) -> f64 {
    let mut state_returns = vec![0.0; returns.cols()];
    for (row, &zi) in returns.iter_rows().zip(z) {
        for (acc, &y) in state_returns.iter_mut().zip(row) {
            *acc += zi * y;
        }
    }
    state_returns.into_iter().fold(f64::INFINITY, f64::min)
}

fn combination_norm(returns: &Matrix, lambda: &[f64]) -> f64 {
    returns
        .iter_rows()
        .map(|row| row.iter().zip(lambda).map(|(y, l)| y * l).sum::<f64>().abs())
        .sum()
}

/// Decides the arbitrage volume of an `N × Ω` excess-return matrix.
///
/// Solves `max t` subject to `Σ_i z_i y_i^ω ≥ t` for every state and
/// `‖z‖∞ ≤ 1`. The verdict is `InfiniteVolume` when the LP portfolio clears
/// `cfg.tol` in every state. The instance is flagged marginal when the
/// primal margin stays below `10·tol` while the dual bound exceeds `tol/1000`.
pub fn detect(returns: &Matrix, cfg: &DetectorConfig) -> Result<ArbitrageVerdict, DetectError> {
    check_input(returns)?;
    let sol = simplex::solve(returns, cfg.pivot_rule, cfg.max_pivots)?;
    let margin = portfolio_margin(returns, &sol.z);
    let dual_bound = combination_norm(returns, &sol.lambda);
    let infinite = margin > cfg.tol;
    let marginal = margin < 10.0 * cfg.tol && dual_bound > 1e-3 * cfg.tol;
    Ok(ArbitrageVerdict {
        kind: if infinite {
            VolumeKind::InfiniteVolume
        } else {
            VolumeKind::ZeroVolume
        },
        witness: infinite.then_some(sol.z),
        margin,
        dual_bound,
        marginal,
        pivots: sol.pivots,
    })
}

/// True iff every state return of `z` exceeds `tol`.
pub fn verify_witness(returns: &Matrix, z: &[f64], tol: f64) -> Result<bool, DetectError> {
    if z.len() != returns.rows() {
        return Err(DetectError::Length {
            got: z.len(),
            expected: returns.rows(),
        });
    }
    Ok(portfolio_margin(returns, z) > tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketInstance, MarketParams, MeasureFamily};

    fn cfg() -> DetectorConfig {
        DetectorConfig::default()
    }

    #[test]
    fn half_line() {
        let y = Matrix::from_rows(&[vec![1.0]]);
        let v = detect(&y, &cfg()).unwrap();
        assert_eq!(v.kind, VolumeKind::InfiniteVolume);
        assert_eq!(v.witness.as_deref(), Some(&[1.0][..]));
        assert!((v.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn opposing_constraints() {
        let y = Matrix::from_rows(&[vec![1.0, -1.0]]);
        let v = detect(&y, &cfg()).unwrap();
        assert_eq!(v.kind, VolumeKind::ZeroVolume);
        assert!(v.witness.is_none());
        assert!(!v.marginal);
    }

    #[test]
    fn more_assets_than_states_is_infinite() {
        for seed in 0..50 {
            let p = MarketParams::new(3, 2, seed).unwrap();
            let inst = MarketInstance::generate(&p, &MeasureFamily::perturbed(1.0, 2.0, false)).unwrap();
            let v = detect(&inst.excess_returns, &cfg()).unwrap();
            assert!(v.is_infinite(), "seed {seed}");
            let z = v.witness.unwrap();
            assert!(verify_witness(&inst.excess_returns, &z, cfg().tol).unwrap());
            assert!(z.iter().all(|x| x.abs() <= 1.0));
        }
    }

    #[test]
    fn unit_vectors_contain_origin() {
        let mut rows = vec![vec![0.0; 6]; 3];
        for i in 0..3 {
            rows[i][2 * i] = 1.0;
            rows[i][2 * i + 1] = -1.0;
        }
        let y = Matrix::from_rows(&rows);
        assert_eq!(detect(&y, &cfg()).unwrap().kind, VolumeKind::ZeroVolume);
        assert_eq!(detect_hull_oracle(&y).unwrap().kind, VolumeKind::ZeroVolume);
    }

    #[test]
    fn nan_rejected() {
        let y = Matrix::from_rows(&[vec![1.0, f64::NAN]]);
        assert!(matches!(detect(&y, &cfg()), Err(DetectError::NonFinite { .. })));
    }

    #[test]
    fn pivot_cap_is_undecided() {
        let p = MarketParams::new(10, 40, 3).unwrap();
        let inst = MarketInstance::generate(&p, &MeasureFamily::subset(20)).unwrap();
        let tight = DetectorConfig {
            max_pivots: 1,
            ..cfg()
        };
        assert!(matches!(
            detect(&inst.excess_returns, &tight),
            Err(DetectError::Undecided { .. })
        ));
    }

    #[test]
    fn bland_rule_agrees_with_dantzig() {
        let bland = DetectorConfig {
            pivot_rule: PivotRule::Bland,
            ..cfg()
        };
        for seed in 0..40 {
            let p = MarketParams::new(6, 12, seed).unwrap();
            let inst = MarketInstance::generate(&p, &MeasureFamily::subset(6)).unwrap();
            let a = detect(&inst.excess_returns, &cfg()).unwrap();
            let b = detect(&inst.excess_returns, &bland).unwrap();
            assert_eq!(a.kind, b.kind, "seed {seed}");
        }
    }

    #[test]
    fn zero_witness_fails_verification() {
        let y = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, 0.1]]);
        assert!(!verify_witness(&y, &[0.0, 0.0], 1e-9).unwrap());
        assert!(verify_witness(&y, &[1.0], 1e-9).is_err());
    }

    #[test]
    fn negated_witness_fails() {
        let mut checked = 0;
        for seed in 0..30 {
            let p = MarketParams::new(4, 5, seed).unwrap();
            let inst = MarketInstance::generate(&p, &MeasureFamily::subset(2)).unwrap();
            let v = detect(&inst.excess_returns, &cfg()).unwrap();
            if let Some(z) = v.witness {
                let neg: Vec<f64> = z.iter().map(|x| -x).collect();
                assert!(!verify_witness(&inst.excess_returns, &neg, 1e-9).unwrap());
                checked += 1;
            }
        }
        assert!(checked > 5);
    }

    #[test]
    fn agrees_with_hull_oracle_on_small_instances() {
        let mut disagreements = 0;
        for seed in 0..100 {
            let p = MarketParams::new(4, 8, seed).unwrap();
            let inst = MarketInstance::generate(&p, &MeasureFamily::subset(3)).unwrap();
            let v = detect(&inst.excess_returns, &cfg()).unwrap();
            let o = detect_hull_oracle(&inst.excess_returns).unwrap();
            if !v.marginal && v.kind != o.kind {
                disagreements += 1;
            }
        }
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn larger_instance_solves() {
        let p = MarketParams::new(60, 150, 5).unwrap();
        let inst = MarketInstance::generate(&p, &MeasureFamily::subset(75)).unwrap();
        let v = detect(&inst.excess_returns, &cfg()).unwrap();
        // Well below n = 1/2: arbitrage-free with overwhelming probability.
        assert_eq!(v.kind, VolumeKind::ZeroVolume);
        assert!(v.dual_bound < 1e-9);
    }
}
