//! Invariant checks shared by the property suite and the acceptance run.
//! Each returns `Ok(true)` when the invariant holds, `Ok(false)` when the
//! case is skipped as marginal, and `Err` describing a violation.
#![allow(dead_code)]

use arbphase::detect::{detect, ArbitrageVerdict, DetectorConfig};
use arbphase::market::{sample_measures, MarketInstance, MarketParams, MeasureFamily, SubsetMode, ROW_SUM_TOL};
use arbphase::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance on `Σ_ω q_i^ω y_i^ω` for payoffs of order one.
pub const PRICING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct Case {
    pub n_assets: usize,
    pub n_states: usize,
    pub family: MeasureFamily,
    pub seed: u64,
}

/// Small random market description drawn from every family variant.
pub fn random_case<R: Rng>(rng: &mut R, max_assets: usize, max_states: usize) -> Case {
    let n_assets = rng.random_range(1..=max_assets);
    let n_states = rng.random_range(1..=max_states);
    let family = match rng.random_range(0..4) {
        0 => MeasureFamily::subset(rng.random_range(1..=n_states)),
        1 => MeasureFamily::SubsetUniform {
            k: rng.random_range(1..=n_states),
            mode: SubsetMode::Bernoulli,
        },
        k => MeasureFamily::perturbed(
            10f64.powf(rng.random_range(-1.0..0.5)),
            rng.random_range(1.0..3.5),
            k == 3,
        ),
    };
    Case {
        n_assets,
        n_states,
        family,
        seed: rng.random(),
    }
}

pub fn instance(case: &Case) -> MarketInstance {
    let params = MarketParams::new(case.n_assets, case.n_states, case.seed).unwrap();
    MarketInstance::generate(&params, &case.family).unwrap()
}

pub fn check_row_normalization(case: &Case) -> Result<bool, String> {
    let params = MarketParams::new(case.n_assets, case.n_states, case.seed).unwrap();
    let m = sample_measures(&params, &case.family, &mut params.rng()).map_err(|e| e.to_string())?;
    let err = m.max_row_sum_error();
    if err > ROW_SUM_TOL {
        return Err(format!("{case:?}: row sum error {err:e}"));
    }
    let clipped = matches!(case.family, MeasureFamily::SubsetUniform { .. })
        || matches!(case.family, MeasureFamily::PerturbedUniform { hard_constraint: true, .. });
    if clipped && m.values.as_slice().iter().any(|&q| q < 0.0) {
        return Err(format!("{case:?}: negative probability"));
    }
    Ok(true)
}

pub fn check_pricing_identity(case: &Case) -> Result<bool, String> {
    let inst = instance(case);
    for i in 0..case.n_assets {
        let q = inst.measures.values.row(i);
        let y = inst.excess_returns.row(i);
        let scale = 1.0 + inst.payoffs.0.row(i).iter().map(|s| s.abs()).fold(0.0, f64::max);
        let resid: f64 = q.iter().zip(y).map(|(a, b)| a * b).sum();
        if resid.abs() > PRICING_TOL * scale {
            return Err(format!("{case:?}: asset {i} residual {resid:e}"));
        }
    }
    Ok(true)
}

fn verdict(y: &Matrix) -> Result<ArbitrageVerdict, String> {
    detect(y, &DetectorConfig::default()).map_err(|e| e.to_string())
}

/// Positive rescaling and independent asset/state permutations keep the verdict.
pub fn check_scale_permutation(case: &Case, aux_seed: u64) -> Result<bool, String> {
    let y = instance(case).excess_returns;
    let mut rng = ChaCha8Rng::seed_from_u64(aux_seed);
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let mut rows: Vec<usize> = (0..y.rows()).collect();
    let mut cols: Vec<usize> = (0..y.cols()).collect();
    rows.shuffle(&mut rng);
    cols.shuffle(&mut rng);
    let transformed = y.select_rows(&rows).select_cols(&cols).scaled(scale);
    let (a, b) = (verdict(&y)?, verdict(&transformed)?);
    if a.marginal || b.marginal {
        return Ok(false);
    }
    if a.kind != b.kind {
        return Err(format!("{case:?}: scale {scale} changed {:?} to {:?}", a.kind, b.kind));
    }
    Ok(true)
}

/// Dropping a state can only turn zero volume into infinite volume, never
/// the reverse.
pub fn check_constraint_monotonicity(case: &Case) -> Result<bool, String> {
    if case.n_states < 2 {
        return Ok(false);
    }
    let y = instance(case).excess_returns;
    let keep: Vec<usize> = (0..y.cols() - 1).collect();
    let fewer = y.select_cols(&keep);
    let (full, reduced) = (verdict(&y)?, verdict(&fewer)?);
    if full.marginal || reduced.marginal {
        return Ok(false);
    }
    if full.is_infinite() && !reduced.is_infinite() {
        return Err(format!("{case:?}: removing a state destroyed arbitrage"));
    }
    Ok(true)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
}

/// Runs `check` over `cases` seeded random cases.
pub fn tally(
    cases: usize,
    seed: u64,
    max_assets: usize,
    max_states: usize,
    check: impl Fn(&Case, u64) -> Result<bool, String>,
) -> (Tally, Option<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    let mut first = None;
    for _ in 0..cases {
        let case = random_case(&mut rng, max_assets, max_states);
        match check(&case, rng.random()) {
            Ok(true) => t.checked += 1,
            Ok(false) => t.skipped += 1,
            Err(msg) => {
                t.violations += 1;
                first.get_or_insert(msg);
            }
        }
    }
    (t, first)
}
