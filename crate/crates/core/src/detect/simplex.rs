//! Revised simplex for the arbitrage-cone feasibility program.
//!
//! The program `max t  s.t.  Σ_i z_i y_i^ω ≥ t (all ω),  -1 ≤ z_i ≤ 1` is
//! solved through its dual
//!
//! ```text
//! min  Σ_i (u_i + v_i)
//! s.t. Σ_ω λ_ω = 1
//!      -Σ_ω λ_ω y_i^ω + u_i - v_i = 0      (i = 1..N)
//!      λ, u, v ≥ 0
//! ```
//!
//! i.e. the smallest `ℓ1` norm of a convex combination of the state vectors.
//! The dual has `N + 1` rows whatever `Ω` is, and `λ = e_0` gives a feasible
//! starting basis, so no phase one is needed. At optimality the simplex
//! multipliers are `(t*, z*)`.

use super::{DetectError, PivotRule};
use crate::matrix::Matrix;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 64;
/// Pivots between refactorizations of the basis inverse.
const REFACTOR_EVERY: usize = 128;
/// Minimum block width for partial pricing of the state columns.
const PRICING_BLOCK: usize = 64;
const PIVOT_TOL: f64 = 1e-11;
const OPT_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    /// Multipliers of the asset rows: the portfolio `z*`.
    pub z: Vec<f64>,
    /// Dual weights on the states (a point of the probability simplex).
    pub lambda: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Lambda(usize),
    Up(usize),
    Down(usize),
}

struct Solver<'a> {
    /// States as rows: `states.row(ω)[i] = y_i^ω`.
    states: &'a Matrix,
    m: usize,
    basis: Vec<Var>,
    /// Basic flags indexed by [`Var::index`].
    basic: Vec<bool>,
    /// Next state column block to price.
    cursor: usize,
    binv: Vec<f64>,
    x: Vec<f64>,
    pi: Vec<f64>,
}

impl Var {
    fn index(self, n_states: usize, n_assets: usize) -> usize {
        match self {
            Var::Lambda(w) => w,
            Var::Up(i) => n_states + i,
            Var::Down(i) => n_states + n_assets + i,
        }
    }

    fn cost(self) -> f64 {
        match self {
            Var::Lambda(_) => 0.0,
            Var::Up(_) | Var::Down(_) => 1.0,
        }
    }
}

impl<'a> Solver<'a> {
    fn new(states: &'a Matrix) -> Self {
        let n = states.cols();
        let m = n + 1;
        let first = states.row(0);
        let mut basis = Vec::with_capacity(m);
        basis.push(Var::Lambda(0));
        for (i, &y) in first.iter().enumerate() {
            basis.push(if y >= 0.0 { Var::Up(i) } else { Var::Down(i) });
        }
        let n_states = states.rows();
        let mut basic = vec![false; n_states + 2 * n];
        for &v in &basis {
            basic[v.index(n_states, n)] = true;
        }
        let mut s = Self {
            states,
            m,
            basis,
            basic,
            cursor: 0,
            binv: vec![0.0; m * m],
            x: vec![0.0; m],
            pi: vec![0.0; m],
        };
        s.refactor().expect("initial basis is triangular");
        s
    }

    fn column(&self, var: Var, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match var {
            Var::Lambda(w) => {
                out[0] = 1.0;
                for (o, &y) in out[1..].iter_mut().zip(self.states.row(w)) {
                    *o = -y;
                }
            }
            Var::Up(i) => out[i + 1] = 1.0,
            Var::Down(i) => out[i + 1] = -1.0,
        }
    }

    /// Rebuilds `B^{-1}`, `x_B` and `π` from the basis by Gauss-Jordan
    /// elimination with partial pivoting.
    fn refactor(&mut self) -> Result<(), DetectError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (k, &var) in self.basis.iter().enumerate() {
            self.column(var, &mut col);
            for r in 0..m {
                a[r * m + k] = col[r];
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[i * m + c].abs().total_cmp(&a[j * m + c].abs()))
                .unwrap();
            let pv = a[p * m + c];
            if pv.abs() < 1e-14 {
                return Err(DetectError::Numerical("singular basis"));
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let scale = 1.0 / pv;
            for k in 0..m {
                a[c * m + k] *= scale;
                inv[c * m + k] *= scale;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        // b = e_0, so x_B is the first column of B^{-1}.
        for r in 0..m {
            self.x[r] = self.binv[r * m].max(0.0);
        }
        self.update_pi();
        Ok(())
    }

    fn update_pi(&mut self) {
        let m = self.m;
        self.pi.iter_mut().for_each(|v| *v = 0.0);
        for (r, &var) in self.basis.iter().enumerate() {
            let c = var.cost();
            if c != 0.0 {
                for k in 0..m {
                    self.pi[k] += c * self.binv[r * m + k];
                }
            }
        }
    }

    fn reduced_cost(&self, var: Var) -> f64 {
        match var {
            Var::Lambda(w) => {
                let dot: f64 = self
                    .states
                    .row(w)
                    .iter()
                    .zip(&self.pi[1..])
                    .map(|(y, p)| y * p)
                    .sum();
                dot - self.pi[0]
            }
            Var::Up(i) => 1.0 - self.pi[i + 1],
            Var::Down(i) => 1.0 + self.pi[i + 1],
        }
    }

    fn consider(&self, var: Var, best: &mut Option<(Var, f64)>) {
        let (n_states, n_assets) = (self.states.rows(), self.states.cols());
        if self.basic[var.index(n_states, n_assets)] {
            return;
        }
        let d = self.reduced_cost(var);
        if d < -OPT_TOL && best.is_none_or(|(_, bd)| d < bd) {
            *best = Some((var, d));
        }
    }

    /// Entering variable and its reduced cost. Bland's rule takes the lowest
    /// improving index; otherwise the most negative reduced cost among the
    /// slack columns and the first block of state columns that has any
    /// improving candidate, scanning blocks cyclically.
    fn choose_entering(&mut self, bland: bool) -> Option<(Var, f64)> {
        let (n_states, n_assets) = (self.states.rows(), self.states.cols());
        if bland {
            let candidates = (0..n_states)
                .map(Var::Lambda)
                .chain((0..n_assets).map(Var::Up))
                .chain((0..n_assets).map(Var::Down));
            for var in candidates {
                if self.basic[var.index(n_states, n_assets)] {
                    continue;
                }
                let d = self.reduced_cost(var);
                if d < -OPT_TOL {
                    return Some((var, d));
                }
            }
            return None;
        }
        let mut best = None;
        for i in 0..n_assets {
            self.consider(Var::Up(i), &mut best);
            self.consider(Var::Down(i), &mut best);
        }
        let width = PRICING_BLOCK.max(self.m).min(n_states);
        let blocks = n_states.div_ceil(width);
        for step in 0..blocks {
            let b = (self.cursor + step) % blocks;
            let mut in_block = None;
            for w in b * width..((b + 1) * width).min(n_states) {
                self.consider(Var::Lambda(w), &mut in_block);
            }
            if let Some((v, d)) = in_block {
                self.cursor = b;
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((v, d));
                }
                break;
            }
        }
        best
    }

    /// Pivots `entering` (reduced cost `d_enter`) into `row`. The
    /// multipliers move along the new pivot row: `π' = π + d · (B'^{-1})_row`.
    fn pivot(&mut self, row: usize, alpha: &[f64], entering: Var, d_enter: f64) {
        let m = self.m;
        let (n_states, n_assets) = (self.states.rows(), self.states.cols());
        self.basic[self.basis[row].index(n_states, n_assets)] = false;
        self.basic[entering.index(n_states, n_assets)] = true;
        let pr = alpha[row];
        for k in 0..m {
            self.binv[row * m + k] /= pr;
        }
        self.x[row] /= pr;
        for r in 0..m {
            if r == row {
                continue;
            }
            let f = alpha[r];
            if f != 0.0 {
                for k in 0..m {
                    self.binv[r * m + k] -= f * self.binv[row * m + k];
                }
                self.x[r] = (self.x[r] - f * self.x[row]).max(0.0);
            }
        }
        self.basis[row] = entering;
        for k in 0..m {
            self.pi[k] += d_enter * self.binv[row * m + k];
        }
    }

    fn solve(mut self, rule: PivotRule, max_pivots: usize) -> Result<LpSolution, DetectError> {
        let (n_states, n_assets) = (self.states.rows(), self.states.cols());
        let mut bland = matches!(rule, PivotRule::Bland);
        let mut stall = 0usize;
        let mut pivots = 0usize;
        let mut alpha = vec![0.0; self.m];
        let mut col = vec![0.0; self.m];
        let mut since_refactor = 0usize;
        loop {
            let Some((entering, d_enter)) = self.choose_entering(bland) else {
                // Confirm optimality with exact multipliers.
                if since_refactor == 0 {
                    break;
                }
                self.refactor()?;
                since_refactor = 0;
                continue;
            };
            if pivots >= max_pivots {
                return Err(DetectError::Undecided { pivots });
            }
            self.column(entering, &mut col);
            for r in 0..self.m {
                alpha[r] = (0..self.m).map(|k| self.binv[r * self.m + k] * col[k]).sum();
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if alpha[r] > PIVOT_TOL {
                    let ratio = self.x[r] / alpha[r];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12 {
                                true
                            } else if ratio <= lratio + 1e-12 {
                                if bland {
                                    self.basis[r].index(n_states, n_assets)
                                        < self.basis[lr].index(n_states, n_assets)
                                } else {
                                    alpha[r] > alpha[lr]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            // The objective is bounded below by zero, so an unbounded ray
            // can only come from numerical breakdown.
            let Some((row, step)) = leave else {
                return Err(DetectError::Numerical("no leaving variable"));
            };
            if step <= 1e-14 {
                stall += 1;
                if stall >= STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            self.pivot(row, &alpha, entering, d_enter);
            pivots += 1;
            since_refactor += 1;
            if since_refactor == REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }

        let mut lambda = vec![0.0; n_states];
        for (r, &var) in self.basis.iter().enumerate() {
            if let Var::Lambda(w) = var {
                lambda[w] = self.x[r];
            }
        }
        let total: f64 = lambda.iter().sum();
        if total > 0.0 {
            lambda.iter_mut().for_each(|l| *l /= total);
        }
        let z = self.pi[1..].iter().map(|p| p.clamp(-1.0, 1.0)).collect();
        Ok(LpSolution { z, lambda, pivots })
    }
}

/// Solves the feasibility program for excess returns given as `N × Ω`.
pub(crate) fn solve(
    returns: &Matrix,
    rule: PivotRule,
    max_pivots: usize,
) -> Result<LpSolution, DetectError> {
    let states = returns.transpose();
    Solver::new(&states).solve(rule, max_pivots)
}
