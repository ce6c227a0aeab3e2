//! Convex-hull membership oracle for small instances.
//!
//! By Gordan's alternative, a portfolio with strictly positive return in
//! every state exists iff the origin is outside the convex hull of the state
//! vectors `y^ω ∈ R^N`. By Carathéodory, if the origin is inside, it is a
//! convex combination of some affinely independent subset of at most `N + 1`
//! of them. The oracle enumerates those subsets and solves the barycentric
//! system for each one by Householder least squares.

use super::{check_input, ArbitrageVerdict, DetectError, VolumeKind};
use crate::matrix::Matrix;

pub const HULL_ORACLE_MAX_ASSETS: usize = 6;
pub const HULL_ORACLE_MAX_STATES: usize = 12;

const RANK_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-9;
const WEIGHT_TOL: f64 = 1e-12;

/// Exact (up to rounding) hull-membership verdict. No witness is produced.
pub fn detect_hull_oracle(returns: &Matrix) -> Result<ArbitrageVerdict, DetectError> {
    check_input(returns)?;
    let (n, omega) = (returns.rows(), returns.cols());
    if n > HULL_ORACLE_MAX_ASSETS || omega > HULL_ORACLE_MAX_STATES {
        return Err(DetectError::OracleCap {
            n_assets: n,
            n_states: omega,
            max_assets: HULL_ORACLE_MAX_ASSETS,
            max_states: HULL_ORACLE_MAX_STATES,
        });
    }
    let max_size = (n + 1).min(omega);
    let mut subset = Vec::with_capacity(max_size);
    let contains = (1..=max_size).any(|k| any_subset(omega, k, 0, &mut subset, &|s| origin_in_simplex(returns, s)));
    Ok(ArbitrageVerdict {
        kind: if contains {
            VolumeKind::ZeroVolume
        } else {
            VolumeKind::InfiniteVolume
        },
        witness: None,
        margin: f64::NAN,
        dual_bound: f64::NAN,
        marginal: false,
        pivots: 0,
    })
}

fn any_subset(
    omega: usize,
    k: usize,
    start: usize,
    current: &mut Vec<usize>,
    test: &dyn Fn(&[usize]) -> bool,
) -> bool {
    if current.len() == k {
        return test(current);
    }
    let remaining = k - current.len();
    for w in start..=(omega - remaining) {
        current.push(w);
        let found = any_subset(omega, k, w + 1, current, test);
        current.pop();
        if found {
            return true;
        }
    }
    false
}

/// Solves `[Y_S; 1ᵀ] λ = [0; 1]` and checks for an exact nonnegative solution.
fn origin_in_simplex(returns: &Matrix, subset: &[usize]) -> bool {
    let rows = returns.rows() + 1;
    let k = subset.len();
    // Column-major system matrix and right-hand side.
    let mut a = vec![0.0; rows * k];
    for (c, &w) in subset.iter().enumerate() {
        for i in 0..returns.rows() {
            a[c * rows + i] = returns.get(i, w);
        }
        a[c * rows + rows - 1] = 1.0;
    }
    let mut b = vec![0.0; rows];
    b[rows - 1] = 1.0;

    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    // Householder QR, applying reflections to b as we go.
    for c in 0..k {
        let col = &a[c * rows..(c + 1) * rows];
        let norm = col[c..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < RANK_TOL * scale {
            return false;
        }
        let alpha = if col[c] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[c..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for cc in c..k {
            let target = &mut a[cc * rows + c..(cc + 1) * rows];
            let dot: f64 = target.iter().zip(&v).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= f * vi;
            }
        }
        let dot: f64 = b[c..].iter().zip(&v).map(|(x, y)| x * y).sum();
        let f = 2.0 * dot / vnorm2;
        for (t, vi) in b[c..].iter_mut().zip(&v) {
            *t -= f * vi;
        }
    }
    // Residual of the least-squares fit lives in b[k..].
    let residual = b[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if residual > RESIDUAL_TOL {
        return false;
    }
    let mut lambda = vec![0.0; k];
    for r in (0..k).rev() {
        let mut acc = b[r];
        for c in r + 1..k {
            acc -= a[c * rows + r] * lambda[c];
        }
        lambda[r] = acc / a[r * rows + r];
    }
    lambda.iter().all(|&l| l >= -WEIGHT_TOL)
}
