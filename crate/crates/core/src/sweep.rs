//! Monte Carlo phase diagrams.
//!
//! A sweep fixes the number of assets `N` and, for every cell of a
//! (family parameter × density `n`) grid, samples `R` markets with
//! `Ω = round(N / n)` states and records the fraction whose arbitrage volume
//! is infinite. Each cell owns a seed derived from the master seed and its
//! grid indices; each realization within a cell owns a ChaCha stream of that
//! seed. Results are therefore identical under any scheduling.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{detect, DetectError, DetectorConfig};
use crate::family::FamilyTemplate;
use crate::market::{negative_fraction, MeasureFamily, sample_measures, MarketError, MarketInstance, MarketParams, MarketRng};
use crate::parallel::{map_indexed, map_indexed_sequential};
use crate::theory::CriticalLine;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("density n = {n} gives Omega = {omega} < 1 for N = {n_assets}")]
    NoStates { n: f64, n_assets: usize, omega: f64 },
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("every realization was undecided ({0} detector failures)")]
    AllUndecided(usize),
    #[error("lines do not overlap in parameter range")]
    DisjointRanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: FamilyTemplate,
    pub n_grid: Vec<f64>,
    pub param_grid: Vec<f64>,
    pub n_assets: usize,
    pub realizations: usize,
    pub master_seed: u64,
    /// Worker count hint; `0` = all cores, `1` = sequential.
    pub parallelism: usize,
    #[serde(default)]
    pub detector: DetectorConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::InvalidSpec(m.to_string()));
        if self.n_grid.is_empty() || self.param_grid.is_empty() {
            return bad("grids must be non-empty");
        }
        if self.n_grid.windows(2).any(|w| !(w[1] > w[0])) || self.param_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("grids must be strictly increasing");
        }
        if self.n_grid.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return bad("densities must be positive and finite");
        }
        if self.n_assets < 2 {
            return bad("N must be at least 2");
        }
        if self.realizations == 0 {
            return bad("R must be at least 1");
        }
        for &n in &self.n_grid {
            states_for(self.n_assets, n)?;
        }
        Ok(())
    }
}

/// `Ω = round(N / n)`.
pub fn states_for(n_assets: usize, n: f64) -> Result<usize, SweepError> {
    let omega = (n_assets as f64 / n).round();
    if !(omega >= 1.0) || !omega.is_finite() {
        return Err(SweepError::NoStates {
            n,
            n_assets,
            omega,
        });
    }
    Ok(omega as usize)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of cell `(param_index, n_index)`.
pub fn cell_seed(master_seed: u64, param_index: usize, n_index: usize) -> u64 {
    let a = splitmix64(master_seed ^ 0x005E_ED0F_A7B1_7A6E);
    let b = splitmix64(a ^ param_index as u64);
    splitmix64(b.rotate_left(17) ^ n_index as u64)
}

/// Stream for realization `r` of a cell.
pub fn realization_rng(cell_seed: u64, r: usize) -> MarketRng {
    let mut rng = MarketRng::seed_from_u64(cell_seed);
    rng.set_stream(r as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    /// `infinite / decided`.
    pub fraction: f64,
    pub infinite: usize,
    pub decided: usize,
    pub undecided: usize,
    pub marginal: usize,
    pub n_states: usize,
    pub resampled_rows: usize,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    infinite: Option<bool>,
    marginal: bool,
    resampled_rows: usize,
}

fn one_realization(
    family: &MeasureFamily,
    params: &MarketParams,
    seed: u64,
    r: usize,
    cfg: &DetectorConfig,
) -> Result<Outcome, MarketError> {
    let mut rng = realization_rng(seed, r);
    let inst = MarketInstance::sample(params, family, &mut rng)?;
    let resampled_rows = inst.measures.resampled_rows;
    Ok(match detect(&inst.excess_returns, cfg) {
        Ok(v) => Outcome {
            infinite: Some(v.is_infinite()),
            marginal: v.marginal,
            resampled_rows,
        },
        Err(DetectError::Undecided { .. } | DetectError::Numerical(_)) => Outcome {
            infinite: None,
            marginal: false,
            resampled_rows,
        },
        Err(e) => unreachable!("sampled returns are finite and non-empty: {e}"),
    })
}

fn aggregate(outcomes: Vec<Result<Outcome, MarketError>>, n_states: usize) -> Result<CellStats, SweepError> {
    let mut stats = CellStats {
        fraction: f64::NAN,
        infinite: 0,
        decided: 0,
        undecided: 0,
        marginal: 0,
        n_states,
        resampled_rows: 0,
    };
    for o in outcomes {
        let o = o?;
        stats.resampled_rows += o.resampled_rows;
        stats.marginal += o.marginal as usize;
        match o.infinite {
            Some(inf) => {
                stats.decided += 1;
                stats.infinite += inf as usize;
            }
            None => stats.undecided += 1,
        }
    }
    if stats.decided == 0 {
        return Err(SweepError::AllUndecided(stats.undecided));
    }
    stats.fraction = stats.infinite as f64 / stats.decided as f64;
    Ok(stats)
}

fn cell_inputs(
    family: &FamilyTemplate,
    param: f64,
    n: f64,
    n_assets: usize,
) -> Result<(MeasureFamily, MarketParams), SweepError> {
    let n_states = states_for(n_assets, n)?;
    let concrete = family.instantiate(param, n_states)?;
    let params = MarketParams::new(n_assets, n_states, 0)?;
    Ok((concrete, params))
}

/// Fraction of infinite-volume markets among `realizations` draws at one
/// grid point, parallel over realizations.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    family: &FamilyTemplate,
    param: f64,
    n: f64,
    n_assets: usize,
    realizations: usize,
    seed: u64,
    cfg: &DetectorConfig,
    parallelism: usize,
) -> Result<CellStats, SweepError> {
    let (concrete, params) = cell_inputs(family, param, n, n_assets)?;
    let outcomes = map_indexed(realizations, parallelism, |r| {
        one_realization(&concrete, &params, seed, r, cfg)
    });
    aggregate(outcomes, params.n_states)
}

fn run_cell_sequential(
    family: &FamilyTemplate,
    param: f64,
    n: f64,
    n_assets: usize,
    realizations: usize,
    seed: u64,
    cfg: &DetectorConfig,
) -> Result<CellStats, SweepError> {
    let (concrete, params) = cell_inputs(family, param, n, n_assets)?;
    let outcomes = map_indexed_sequential(realizations, |r| one_realization(&concrete, &params, seed, r, cfg));
    aggregate(outcomes, params.n_states)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub param_index: usize,
    pub n_index: usize,
    pub message: String,
}

/// Fractions indexed `[param_index][n_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub spec: SweepSpec,
    /// Failed cells hold NaN, written as `null`.
    #[serde(with = "nan_as_null")]
    pub fraction: Vec<Vec<f64>>,
    pub marginal_count: Vec<Vec<usize>>,
    pub undecided_count: Vec<Vec<usize>>,
    pub cell_seeds: Vec<Vec<u64>>,
    /// `Ω` used at each density.
    pub n_states: Vec<usize>,
    pub failures: Vec<CellFailure>,
}

impl PhaseGrid {
    pub fn row(&self, param_index: usize) -> &[f64] {
        &self.fraction[param_index]
    }
}

/// Evaluates every cell, in parallel over cells when enabled.
pub fn run_grid(spec: &SweepSpec) -> Result<PhaseGrid, SweepError> {
    run_grid_with(spec, |len, f| map_indexed(len, spec.parallelism, f))
}

/// Same as [`run_grid`] but always on the calling thread.
pub fn run_grid_sequential(spec: &SweepSpec) -> Result<PhaseGrid, SweepError> {
    run_grid_with(spec, |len, f| map_indexed_sequential(len, f))
}

type CellFn<'a> = dyn Fn(usize) -> Result<CellStats, SweepError> + Sync + Send + 'a;

fn run_grid_with<M>(spec: &SweepSpec, mapper: M) -> Result<PhaseGrid, SweepError>
where
    M: Fn(usize, &CellFn<'_>) -> Vec<Result<CellStats, SweepError>>,
{
    spec.validate()?;
    let (np, nn) = (spec.param_grid.len(), spec.n_grid.len());
    let cell_seeds: Vec<Vec<u64>> = (0..np)
        .map(|p| (0..nn).map(|j| cell_seed(spec.master_seed, p, j)).collect())
        .collect();
    let n_states = spec
        .n_grid
        .iter()
        .map(|&n| states_for(spec.n_assets, n))
        .collect::<Result<Vec<_>, _>>()?;

    let work = |idx: usize| {
        let (p, j) = (idx / nn, idx % nn);
        run_cell_sequential(
            &spec.family,
            spec.param_grid[p],
            spec.n_grid[j],
            spec.n_assets,
            spec.realizations,
            cell_seeds[p][j],
            &spec.detector,
        )
    };
    let results = mapper(np * nn, &work);

    let mut fraction = vec![vec![f64::NAN; nn]; np];
    let mut marginal_count = vec![vec![0; nn]; np];
    let mut undecided_count = vec![vec![0; nn]; np];
    let mut failures = Vec::new();
    for (idx, res) in results.into_iter().enumerate() {
        let (p, j) = (idx / nn, idx % nn);
        match res {
            Ok(stats) => {
                fraction[p][j] = stats.fraction;
                marginal_count[p][j] = stats.marginal;
                undecided_count[p][j] = stats.undecided;
            }
            Err(e) => failures.push(CellFailure {
                param_index: p,
                n_index: j,
                message: e.to_string(),
            }),
        }
    }
    Ok(PhaseGrid {
        spec: spec.clone(),
        fraction,
        marginal_count,
        undecided_count,
        cell_seeds,
        n_states,
        failures,
    })
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| (!x.is_nan()).then_some(x)).collect())
            .collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let opt = Vec::<Vec<Option<f64>>>::deserialize(d)?;
        Ok(opt
            .into_iter()
            .map(|r| r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    /// Every cell is at or above the level: the transition lies below the grid.
    BelowGrid,
    /// Every cell is below the level.
    AboveGrid,
    /// Failed cells prevented a decision.
    NoData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub level: f64,
    /// `(parameter, n at level)` by linear interpolation between adjacent cells.
    pub points: Vec<(f64, f64)>,
    pub censored: Vec<(f64, Censoring)>,
}

/// First upward crossing of `level` along a row, linearly interpolated.
pub fn row_crossing(n_grid: &[f64], row: &[f64], level: f64) -> Result<f64, Censoring> {
    if row.iter().any(|f| f.is_nan()) {
        return Err(Censoring::NoData);
    }
    if row.first().is_some_and(|&f| f >= level) {
        return Err(Censoring::BelowGrid);
    }
    for j in 0..row.len().saturating_sub(1) {
        let (f0, f1) = (row[j], row[j + 1]);
        if f0 < level && f1 >= level {
            let t = (level - f0) / (f1 - f0);
            return Ok(n_grid[j] + t * (n_grid[j + 1] - n_grid[j]));
        }
    }
    Err(Censoring::AboveGrid)
}

pub fn extract_transition(grid: &PhaseGrid, level: f64) -> TransitionLine {
    let mut points = Vec::new();
    let mut censored = Vec::new();
    for (p, &param) in grid.spec.param_grid.iter().enumerate() {
        match row_crossing(&grid.spec.n_grid, &grid.fraction[p], level) {
            Ok(n) => points.push((param, n)),
            Err(c) => censored.push((param, c)),
        }
    }
    TransitionLine {
        level,
        points,
        censored,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub param: f64,
    pub empirical: f64,
    pub analytic: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineComparison {
    pub max_abs_dev: f64,
    pub mean_abs_dev: f64,
    pub rows: Vec<ComparisonRow>,
}

impl LineComparison {
    /// Restricts the comparison to parameters satisfying `keep`.
    pub fn filtered(&self, keep: impl Fn(f64) -> bool) -> Self {
        let rows: Vec<_> = self.rows.iter().filter(|r| keep(r.param)).cloned().collect();
        summarize(rows)
    }
}

fn summarize(rows: Vec<ComparisonRow>) -> LineComparison {
    let max_abs_dev = rows.iter().map(|r| r.deviation.abs()).fold(0.0, f64::max);
    let mean_abs_dev = if rows.is_empty() {
        f64::NAN
    } else {
        rows.iter().map(|r| r.deviation.abs()).sum::<f64>() / rows.len() as f64
    };
    LineComparison {
        max_abs_dev,
        mean_abs_dev,
        rows,
    }
}

/// Deviations `empirical − analytic` at the empirical parameters, with the
/// analytic line linearly interpolated.
pub fn compare_lines(empirical: &TransitionLine, analytic: &CriticalLine) -> Result<LineComparison, SweepError> {
    let rows: Vec<ComparisonRow> = empirical
        .points
        .iter()
        .filter_map(|&(param, emp)| {
            analytic.interpolate(param).map(|ana| ComparisonRow {
                param,
                empirical: emp,
                analytic: ana,
                deviation: emp - ana,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(SweepError::DisjointRanges);
    }
    Ok(summarize(rows))
}

/// Adjacent-cell decreases larger than `sigmas` binomial standard errors.
pub fn monotonicity_violations(grid: &PhaseGrid, sigmas: f64) -> Vec<(usize, usize)> {
    let r = grid.spec.realizations as f64;
    let mut out = Vec::new();
    for (p, row) in grid.fraction.iter().enumerate() {
        for j in 0..row.len().saturating_sub(1) {
            let (a, b) = (row[j], row[j + 1]);
            if a.is_nan() || b.is_nan() {
                continue;
            }
            let pbar = 0.5 * (a + b);
            // A floor of one realization keeps 0/1 plateaus from reading as zero noise.
            let se = (2.0 * pbar * (1.0 - pbar) / r).sqrt().max(1.0 / r);
            if a - b > sigmas * se {
                out.push((p, j));
            }
        }
    }
    out
}

/// Half-width of the band between the `low` and `high` crossings of a row.
pub fn band_half_width(n_grid: &[f64], row: &[f64], low: f64, high: f64) -> Option<f64> {
    let a = row_crossing(n_grid, row, low).ok()?;
    let b = row_crossing(n_grid, row, high).ok()?;
    Some(0.5 * (b - a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeFractionPoint {
    pub param: f64,
    pub n: f64,
    pub n_states: usize,
    pub fraction: f64,
    /// Gaussian prediction; only perturbed families have one.
    pub reference: Option<f64>,
}

/// `P(1/Ω + d < 0)` for `d ~ N(0, (Δ/Ω^α)(1 − 1/Ω))`, the exact marginal of
/// a mean-subtracted perturbation. At `α = 2` and large `Ω` this is
/// `Φ(−1/√Δ)`, independent of `Ω`.
pub fn gaussian_negative_fraction(delta: f64, alpha: f64, n_states: usize) -> f64 {
    let omega = n_states as f64;
    let sd = (delta / omega.powf(alpha) * (1.0 - 1.0 / omega)).sqrt();
    if sd == 0.0 {
        return 0.0;
    }
    crate::theory::normal_cdf(-1.0 / (omega * sd))
}

/// Fraction of negative raw measure entries for every `(param, n)` pair,
/// averaged over `realizations` measure sets of `N` assets.
pub fn negative_fraction_curve(
    family: &FamilyTemplate,
    params: &[f64],
    n_values: &[f64],
    n_assets: usize,
    realizations: usize,
    master_seed: u64,
    parallelism: usize,
) -> Result<Vec<NegativeFractionPoint>, SweepError> {
    let nn = n_values.len();
    let results = map_indexed(params.len() * nn, parallelism, |idx| {
        let (p, j) = (idx / nn, idx % nn);
        let (concrete, market): (MeasureFamily, MarketParams) = cell_inputs(family, params[p], n_values[j], n_assets)?;
        let seed = cell_seed(master_seed, p, j);
        let mut total = 0.0;
        for r in 0..realizations.max(1) {
            let m = sample_measures(&market, &concrete, &mut realization_rng(seed, r))?;
            total += negative_fraction(&m);
        }
        let reference = match concrete {
            MeasureFamily::PerturbedUniform { delta, alpha, .. } => {
                Some(gaussian_negative_fraction(delta, alpha, market.n_states))
            }
            MeasureFamily::SubsetUniform { .. } => None,
        };
        Ok(NegativeFractionPoint {
            param: params[p],
            n: n_values[j],
            n_states: market.n_states,
            fraction: total / realizations.max(1) as f64,
            reference,
        })
    });
    results.into_iter().collect()
}
