//! Random one-period markets: Gaussian payoffs, instrument-specific pricing
//! measures, prices and excess returns.
//!
//! A market has `N` assets and `Ω` terminal states. Asset `i` pays
//! `s[i][ω]` in state `ω` and is priced as the expectation of its payoff
//! under its own measure `q[i]`. The excess returns `y[i][ω] = s[i][ω] - p[i]`
//! are the coefficients of the arbitrage cone.

use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Random stream used for every sampled quantity in the crate.
pub type MarketRng = ChaCha8Rng;

/// Tolerance on the row sums of a measure set.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("invalid market size: N = {n_assets}, Omega = {n_states} (both must be >= 1)")]
    InvalidSize { n_assets: usize, n_states: usize },
    #[error("subset size K = {k} outside [1, {n_states}]")]
    SubsetSize { k: usize, n_states: usize },
    #[error("perturbation variance Delta = {0} must be positive and finite")]
    NonPositiveDelta(f64),
    #[error("perturbation exponent alpha = {0} must be finite")]
    NonFiniteAlpha(f64),
    #[error("shape mismatch: {what} is {got:?}, expected {expected:?}")]
    Shape {
        what: &'static str,
        got: (usize, usize),
        expected: (usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketParams {
    pub n_assets: usize,
    pub n_states: usize,
    pub seed: u64,
}

impl MarketParams {
    pub fn new(n_assets: usize, n_states: usize, seed: u64) -> Result<Self, MarketError> {
        let p = Self {
            n_assets,
            n_states,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.n_assets == 0 || self.n_states == 0 {
            return Err(MarketError::InvalidSize {
                n_assets: self.n_assets,
                n_states: self.n_states,
            });
        }
        Ok(())
    }

    /// Asset density `n = N / Ω`.
    pub fn density(&self) -> f64 {
        self.n_assets as f64 / self.n_states as f64
    }

    pub fn rng(&self) -> MarketRng {
        MarketRng::seed_from_u64(self.seed)
    }
}

/// How subsets of states are drawn for the subset-uniform family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    /// Exactly `K` states, uniformly without replacement.
    #[default]
    ExactSize,
    /// Each state included independently with probability `K / Ω`; the
    /// measure is uniform over whatever was included.
    Bernoulli,
}

/// Parametric law of the local measures `q[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureFamily {
    SubsetUniform {
        k: usize,
        #[serde(default)]
        mode: SubsetMode,
    },
    PerturbedUniform {
        delta: f64,
        alpha: f64,
        #[serde(default)]
        hard_constraint: bool,
    },
}

impl MeasureFamily {
    pub fn subset(k: usize) -> Self {
        Self::SubsetUniform {
            k,
            mode: SubsetMode::ExactSize,
        }
    }

    pub fn perturbed(delta: f64, alpha: f64, hard_constraint: bool) -> Self {
        Self::PerturbedUniform {
            delta,
            alpha,
            hard_constraint,
        }
    }

    pub fn validate(&self, n_states: usize) -> Result<(), MarketError> {
        match *self {
            Self::SubsetUniform { k, .. } => {
                if k == 0 || k > n_states {
                    return Err(MarketError::SubsetSize { k, n_states });
                }
            }
            Self::PerturbedUniform { delta, alpha, .. } => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(MarketError::NonPositiveDelta(delta));
                }
                if !alpha.is_finite() {
                    return Err(MarketError::NonFiniteAlpha(alpha));
                }
            }
        }
        Ok(())
    }
}

/// Payoffs `s[i][ω]`, an `N × Ω` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix(pub Matrix);

/// Local measures `q[i][ω]`, an `N × Ω` matrix with unit row sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSet {
    pub values: Matrix,
    /// Pre-clipping values; only kept for the hard-constraint variant.
    pub raw_values: Option<Matrix>,
    pub family: MeasureFamily,
    /// Rows redrawn because clipping left nothing positive (or, in
    /// Bernoulli mode, because no state was included).
    pub resampled_rows: usize,
}

impl MeasureSet {
    pub fn n_assets(&self) -> usize {
        self.values.rows()
    }

    pub fn n_states(&self) -> usize {
        self.values.cols()
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.values
            .iter_rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// One sampled market together with its derived prices and excess returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInstance {
    pub payoffs: PayoffMatrix,
    pub measures: MeasureSet,
    pub prices: Vec<f64>,
    pub excess_returns: Matrix,
}

impl MarketInstance {
    /// Samples payoffs, then measures, from the same stream.
    pub fn sample<R: Rng + ?Sized>(
        params: &MarketParams,
        family: &MeasureFamily,
        rng: &mut R,
    ) -> Result<Self, MarketError> {
        let payoffs = sample_payoffs(params, rng)?;
        let measures = sample_measures(params, family, rng)?;
        Self::from_parts(payoffs, measures)
    }

    /// Samples with a stream seeded from `params.seed`.
    pub fn generate(params: &MarketParams, family: &MeasureFamily) -> Result<Self, MarketError> {
        Self::sample(params, family, &mut params.rng())
    }

    pub fn from_parts(payoffs: PayoffMatrix, measures: MeasureSet) -> Result<Self, MarketError> {
        let prices = compute_prices(&payoffs, &measures)?;
        let excess_returns = compute_excess_returns(&payoffs, &prices)?;
        Ok(Self {
            payoffs,
            measures,
            prices,
            excess_returns,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.prices.len()
    }

    pub fn n_states(&self) -> usize {
        self.excess_returns.cols()
    }
}

/// I.i.d. standard normal payoffs.
pub fn sample_payoffs<R: Rng + ?Sized>(
    params: &MarketParams,
    rng: &mut R,
) -> Result<PayoffMatrix, MarketError> {
    params.validate()?;
    let len = params.n_assets * params.n_states;
    let data: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    Ok(PayoffMatrix(Matrix::from_vec(
        params.n_assets,
        params.n_states,
        data,
    )))
}

/// Dispatches on the family.
pub fn sample_measures<R: Rng + ?Sized>(
    params: &MarketParams,
    family: &MeasureFamily,
    rng: &mut R,
) -> Result<MeasureSet, MarketError> {
    match *family {
        MeasureFamily::SubsetUniform { k, mode } => match mode {
            SubsetMode::ExactSize => sample_subset_measures(params, k, rng),
            SubsetMode::Bernoulli => sample_bernoulli_subset_measures(params, k, rng),
        },
        MeasureFamily::PerturbedUniform {
            delta,
            alpha,
            hard_constraint,
        } => sample_perturbed_measures(params, delta, alpha, hard_constraint, rng),
    }
}

/// Each asset prices uniformly over its own random size-`k` subset of
/// states, drawn independently across assets.
pub fn sample_subset_measures<R: Rng + ?Sized>(
    params: &MarketParams,
    k: usize,
    rng: &mut R,
) -> Result<MeasureSet, MarketError> {
    params.validate()?;
    let family = MeasureFamily::subset(k);
    family.validate(params.n_states)?;
    let weight = 1.0 / k as f64;
    let mut values = Matrix::zeros(params.n_assets, params.n_states);
    for i in 0..params.n_assets {
        let row = values.row_mut(i);
        for w in index::sample(rng, params.n_states, k).iter() {
            row[w] = weight;
        }
    }
    Ok(MeasureSet {
        values,
        raw_values: None,
        family,
        resampled_rows: 0,
    })
}

/// Thermodynamic-limit reading of the subset family: states enter the
/// support independently with probability `k / Ω`. Empty supports are
/// redrawn.
pub fn sample_bernoulli_subset_measures<R: Rng + ?Sized>(
    params: &MarketParams,
    k: usize,
    rng: &mut R,
) -> Result<MeasureSet, MarketError> {
    params.validate()?;
    let family = MeasureFamily::SubsetUniform {
        k,
        mode: SubsetMode::Bernoulli,
    };
    family.validate(params.n_states)?;
    let p = k as f64 / params.n_states as f64;
    let mut values = Matrix::zeros(params.n_assets, params.n_states);
    let mut resampled_rows = 0;
    let mut support = Vec::with_capacity(params.n_states);
    for i in 0..params.n_assets {
        loop {
            support.clear();
            support.extend((0..params.n_states).filter(|_| rng.random_bool(p)));
            if !support.is_empty() {
                break;
            }
            resampled_rows += 1;
        }
        let weight = 1.0 / support.len() as f64;
        let row = values.row_mut(i);
        for &w in &support {
            row[w] = weight;
        }
    }
    Ok(MeasureSet {
        values,
        raw_values: None,
        family,
        resampled_rows,
    })
}

/// Uniform measure plus zero-sum Gaussian noise of variance `delta / Ω^alpha`.
///
/// The zero-sum condition is imposed by subtracting the row mean. With
/// `hard_constraint`, negative entries are clipped to zero and the row is
/// renormalized; the unclipped values are kept in `raw_values`.
pub fn sample_perturbed_measures<R: Rng + ?Sized>(
    params: &MarketParams,
    delta: f64,
    alpha: f64,
    hard_constraint: bool,
    rng: &mut R,
) -> Result<MeasureSet, MarketError> {
    params.validate()?;
    let family = MeasureFamily::perturbed(delta, alpha, hard_constraint);
    family.validate(params.n_states)?;
    let omega = params.n_states;
    let omega_f = omega as f64;
    let sd = (delta / omega_f.powf(alpha)).sqrt();
    let noise = Normal::new(0.0, sd).map_err(|_| MarketError::NonPositiveDelta(delta))?;
    let uniform = 1.0 / omega_f;

    let mut values = Matrix::zeros(params.n_assets, omega);
    let mut raw = hard_constraint.then(|| Matrix::zeros(params.n_assets, omega));
    let mut resampled_rows = 0;
    let mut row = vec![0.0; omega];
    for i in 0..params.n_assets {
        loop {
            for v in row.iter_mut() {
                *v = noise.sample(rng);
            }
            let mean = row.iter().sum::<f64>() / omega_f;
            for v in row.iter_mut() {
                *v = uniform + (*v - mean);
            }
            if !hard_constraint {
                values.row_mut(i).copy_from_slice(&row);
                break;
            }
            let positive: f64 = row.iter().filter(|v| **v > 0.0).sum();
            if positive <= 0.0 {
                resampled_rows += 1;
                continue;
            }
            if let Some(raw) = raw.as_mut() {
                raw.row_mut(i).copy_from_slice(&row);
            }
            for (dst, &v) in values.row_mut(i).iter_mut().zip(&row) {
                *dst = if v > 0.0 { v / positive } else { 0.0 };
            }
            break;
        }
    }
    Ok(MeasureSet {
        values,
        raw_values: raw,
        family,
        resampled_rows,
    })
}

/// `p[i] = Σ_ω q[i][ω] s[i][ω]`.
pub fn compute_prices(
    payoffs: &PayoffMatrix,
    measures: &MeasureSet,
) -> Result<Vec<f64>, MarketError> {
    let s = &payoffs.0;
    let q = &measures.values;
    if (s.rows(), s.cols()) != (q.rows(), q.cols()) {
        return Err(MarketError::Shape {
            what: "measures",
            got: (q.rows(), q.cols()),
            expected: (s.rows(), s.cols()),
        });
    }
    Ok(s.iter_rows()
        .zip(q.iter_rows())
        .map(|(sr, qr)| sr.iter().zip(qr).map(|(a, b)| a * b).sum())
        .collect())
}

/// `y[i][ω] = s[i][ω] - p[i]`.
pub fn compute_excess_returns(
    payoffs: &PayoffMatrix,
    prices: &[f64],
) -> Result<Matrix, MarketError> {
    let s = &payoffs.0;
    if prices.len() != s.rows() {
        return Err(MarketError::Shape {
            what: "prices",
            got: (prices.len(), 1),
            expected: (s.rows(), 1),
        });
    }
    let mut y = s.clone();
    for (i, &p) in prices.iter().enumerate() {
        for v in y.row_mut(i) {
            *v -= p;
        }
    }
    Ok(y)
}

/// Fraction of strictly negative raw (pre-clipping) measure entries.
pub fn negative_fraction(measures: &MeasureSet) -> f64 {
    let m = measures.raw_values.as_ref().unwrap_or(&measures.values);
    let total = m.as_slice().len();
    if total == 0 {
        return 0.0;
    }
    m.as_slice().iter().filter(|v| **v < 0.0).count() as f64 / total as f64
}
