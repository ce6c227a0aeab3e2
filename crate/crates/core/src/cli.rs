//! Command-line front end. Flags are resolved into a [`RunConfig`], echoed,
//! validated, then executed; a config file can be replayed with `run`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::detect::{detect, DetectorConfig};
use crate::family::FamilyTemplate;
use crate::io::{
    format_sig9, parse_grid, read_json, render_heatmap, write_comparison_csv, write_grid_csv, write_json,
    write_line_csv, write_negative_fraction_csv, write_svg, Command, DiagramRequest, HeatmapStyle, LineRequest,
    NegativeFractionRequest, OutputFormat, RunBundle, RunConfig, SimulateRequest,
};
use crate::market::{MarketInstance, MarketParams, MeasureFamily, SubsetMode};
use crate::sweep::{compare_lines, extract_transition, negative_fraction_curve, run_grid, SweepSpec};
use crate::theory::{critical_line, CriticalLine, Interpretation, OmegaSpec};

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "ARBPHASE_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "arbphase-out";

#[derive(Debug, Parser)]
#[command(name = "arbphase", version, about = "Arbitrage phase diagrams for random one-period markets")]
pub struct Cli {
    /// Output directory [default: $ARBPHASE_OUT_DIR, else ./arbphase-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg
    #[arg(long, global = true, value_delimiter = ',', default_value = "csv,json,svg")]
    formats: Vec<FormatArg>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Sample one market and decide its arbitrage volume
    Simulate(SimulateArgs),
    /// Monte Carlo phase diagram with the analytic line overlaid
    PhaseDiagram(DiagramArgs),
    /// Analytic critical density along a parameter grid
    CriticalLine(LineArgs),
    /// Phase diagram plus a point-by-point comparison with the analytic line
    Compare(DiagramArgs),
    /// Fraction of negative raw measure entries for perturbed families
    Pneg(PnegArgs),
    /// Replay a saved config (a bare config or a run bundle)
    Run {
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyKind {
    Subset,
    #[value(alias = "perturbed")]
    PerturbedAlpha,
    PerturbedDelta,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    #[arg(long, value_enum, default_value = "subset")]
    family: FamilyKind,
    /// Subset fraction K / Omega (grid syntax start:stop:step, list, or value)
    #[arg(long)]
    kappa: Option<String>,
    /// Perturbation exponent (grid for perturbed-alpha, value otherwise)
    #[arg(long)]
    alpha: Option<String>,
    /// Perturbation strength (grid for perturbed-delta, value otherwise)
    #[arg(long)]
    delta: Option<String>,
    /// Clip negative perturbed entries and renormalize
    #[arg(long)]
    hard: bool,
    /// Subset membership by independent coin flips instead of exact size
    #[arg(long)]
    bernoulli: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InterpretationArg {
    Direct,
    Sqrt,
}

impl From<InterpretationArg> for Interpretation {
    fn from(a: InterpretationArg) -> Self {
        match a {
            InterpretationArg::Direct => Interpretation::CoefficientDirect,
            InterpretationArg::Sqrt => Interpretation::SignedSqrt,
        }
    }
}

#[derive(Debug, Args)]
struct TheoryArgs {
    /// thermodynamic, states:<Omega>, assets:<N>, or auto
    #[arg(long, default_value = "auto")]
    omega: String,
    /// Coefficient interpretation [default: direct]
    #[arg(long, value_enum)]
    interpretation: Option<InterpretationArg>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long = "N")]
    n_assets: usize,
    #[arg(long = "Omega")]
    n_states: usize,
    #[command(flatten)]
    family: FamilyArgs,
    /// Subset size (alternative to --kappa)
    #[arg(long = "K")]
    subset_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DiagramArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long = "N", default_value_t = 64)]
    n_assets: usize,
    #[arg(long = "R", default_value_t = 50)]
    realizations: usize,
    /// Density grid
    #[arg(long = "n", default_value = "0.05:1.1:0.05")]
    n_grid: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0 = all cores, 1 = sequential)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Fraction level defining the empirical transition
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    #[command(flatten)]
    theory: TheoryArgs,
}

#[derive(Debug, Args)]
struct LineArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    theory: TheoryArgs,
}

#[derive(Debug, Args)]
struct PnegArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long = "N", default_value_t = 200)]
    n_assets: usize,
    #[arg(long = "R", default_value_t = 20)]
    realizations: usize,
    #[arg(long = "n", default_value = "0.5")]
    n_grid: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

/// Bad input: exits 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

fn grid(name: &str, text: Option<&str>) -> anyhow::Result<Vec<f64>> {
    match text {
        None => usage(format!("--{name} is required for this family")),
        Some(t) => parse_grid(t).or_else(|e| usage(e.to_string())),
    }
}

fn scalar(name: &str, text: Option<&str>, default: f64) -> anyhow::Result<f64> {
    let Some(t) = text else { return Ok(default) };
    match parse_grid(t).or_else(|e| usage(e.to_string()))?.as_slice() {
        [v] => Ok(*v),
        _ => usage(format!("--{name} takes a single value for this family")),
    }
}

impl FamilyArgs {
    /// Template plus its parameter grid.
    fn template(&self) -> anyhow::Result<(FamilyTemplate, Vec<f64>)> {
        let hard_constraint = self.hard;
        match self.family {
            FamilyKind::Subset => {
                let mode = if self.bernoulli { SubsetMode::Bernoulli } else { SubsetMode::ExactSize };
                Ok((FamilyTemplate::Subset { mode }, grid("kappa", self.kappa.as_deref())?))
            }
            FamilyKind::PerturbedAlpha => Ok((
                FamilyTemplate::PerturbedAlpha {
                    delta: scalar("delta", self.delta.as_deref(), 1.0)?,
                    hard_constraint,
                },
                grid("alpha", self.alpha.as_deref())?,
            )),
            FamilyKind::PerturbedDelta => Ok((
                FamilyTemplate::PerturbedDelta {
                    alpha: scalar("alpha", self.alpha.as_deref(), 2.0)?,
                    hard_constraint,
                },
                grid("delta", self.delta.as_deref())?,
            )),
        }
    }
}

impl TheoryArgs {
    fn resolve(&self, family: &FamilyTemplate, n_assets: Option<usize>) -> anyhow::Result<(OmegaSpec, Interpretation)> {
        let interpretation = self.interpretation.map(Into::into).unwrap_or_default();
        let value = |v: &str| v.parse::<f64>().ok().filter(|x| *x > 0.0 && x.is_finite());
        let omega = match self.omega.split_once(':') {
            None if self.omega == "thermodynamic" => OmegaSpec::Thermodynamic,
            None if self.omega == "auto" => match (family, n_assets) {
                (FamilyTemplate::Subset { .. }, _) | (_, None) => OmegaSpec::Thermodynamic,
                (_, Some(n)) => OmegaSpec::Assets(n as f64),
            },
            Some(("states", v)) if value(v).is_some() => OmegaSpec::States(value(v).unwrap()),
            Some(("assets", v)) if value(v).is_some() => OmegaSpec::Assets(value(v).unwrap()),
            _ => return usage(format!("bad --omega `{}`", self.omega)),
        };
        Ok((omega, interpretation))
    }
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn diagram_request(a: &DiagramArgs) -> anyhow::Result<DiagramRequest> {
    let (family, param_grid) = a.family.template()?;
    let (omega, interpretation) = a.theory.resolve(&family, Some(a.n_assets))?;
    Ok(DiagramRequest {
        sweep: SweepSpec {
            family,
            n_grid: grid("n", Some(&a.n_grid))?,
            param_grid,
            n_assets: a.n_assets,
            realizations: a.realizations,
            master_seed: a.seed,
            parallelism: a.workers,
            detector: DetectorConfig::default(),
        },
        interpretation,
        omega,
        level: a.level,
    })
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let command = match &cli.command {
        Sub::Run { config } => return load_config(config),
        Sub::Simulate(a) => {
            let family = match (a.family.family, a.subset_size) {
                (FamilyKind::Subset, Some(k)) => MeasureFamily::SubsetUniform {
                    k,
                    mode: if a.family.bernoulli { SubsetMode::Bernoulli } else { SubsetMode::ExactSize },
                },
                (kind, _) => {
                    let (template, _) = match kind {
                        FamilyKind::Subset => a.family.template()?,
                        // Both perturbed parameters are plain values here.
                        _ => (
                            FamilyTemplate::PerturbedAlpha {
                                delta: scalar("delta", a.family.delta.as_deref(), 1.0)?,
                                hard_constraint: a.family.hard,
                            },
                            vec![],
                        ),
                    };
                    let param = match kind {
                        FamilyKind::Subset => scalar("kappa", a.family.kappa.as_deref(), f64::NAN)?,
                        _ => scalar("alpha", a.family.alpha.as_deref(), 2.0)?,
                    };
                    if a.n_states == 0 {
                        return usage("--Omega must be at least 1");
                    }
                    template.instantiate(param, a.n_states).or_else(|e| usage(e.to_string()))?
                }
            };
            Command::Simulate(SimulateRequest {
                n_assets: a.n_assets,
                n_states: a.n_states,
                family,
                seed: a.seed,
                detector: DetectorConfig::default(),
            })
        }
        Sub::PhaseDiagram(a) => Command::PhaseDiagram(diagram_request(a)?),
        Sub::Compare(a) => Command::Compare(diagram_request(a)?),
        Sub::CriticalLine(a) => {
            let (family, params) = a.family.template()?;
            let (omega, interpretation) = a.theory.resolve(&family, None)?;
            Command::CriticalLine(LineRequest {
                family,
                params,
                omega,
                interpretation,
            })
        }
        Sub::Pneg(a) => {
            let (family, params) = a.family.template()?;
            Command::NegativeFraction(NegativeFractionRequest {
                family,
                params,
                n_values: grid("n", Some(&a.n_grid))?,
                n_assets: a.n_assets,
                realizations: a.realizations,
                seed: a.seed,
                parallelism: a.workers,
            })
        }
    };
    let mut formats: Vec<OutputFormat> = cli
        .formats
        .iter()
        .map(|f| match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Svg => OutputFormat::Svg,
        })
        .collect();
    formats.sort();
    formats.dedup();
    Ok(RunConfig {
        command,
        output_dir: out_dir(&cli.out),
        formats,
    })
}

/// Accepts either a bare [`RunConfig`] or a [`RunBundle`] written by a previous run.
fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let value: serde_json::Value = read_json(path).or_else(|e| usage(e.to_string()))?;
    let parsed = if value.get("config").is_some() && value.get("tool").is_some() {
        serde_json::from_value::<RunBundle>(value).map(|b| b.config)
    } else {
        serde_json::from_value::<RunConfig>(value)
    };
    parsed.or_else(|e| usage(format!("{}: {e}", path.display())))
}

fn analytic_for(req: &DiagramRequest) -> anyhow::Result<CriticalLine> {
    Ok(critical_line(&req.sweep.family, &req.sweep.param_grid, req.omega, req.interpretation)?)
}

fn execute(cfg: &RunConfig, out: &mut dyn Write) -> anyhow::Result<()> {
    let dir = &cfg.output_dir;
    match &cfg.command {
        Command::Simulate(r) => {
            let params = MarketParams::new(r.n_assets, r.n_states, r.seed)?;
            let inst = MarketInstance::generate(&params, &r.family)?;
            let v = detect(&inst.excess_returns, &r.detector)?;
            writeln!(out, "verdict: {:?}", v.kind)?;
            writeln!(out, "margin: {}", format_sig9(v.margin))?;
            writeln!(out, "dual_bound: {}", format_sig9(v.dual_bound))?;
            writeln!(out, "marginal: {}", v.marginal)?;
            if let Some(z) = &v.witness {
                let z: Vec<String> = z.iter().map(|&x| format_sig9(x)).collect();
                writeln!(out, "witness: {}", z.join(" "))?;
            }
        }
        Command::CriticalLine(r) => {
            let line = critical_line(&r.family, &r.params, r.omega, r.interpretation)?;
            writeln!(out, "{},n_c", r.family.param_name())?;
            for &(p, n) in &line.points {
                writeln!(out, "{},{}", format_sig9(p), format_sig9(n))?;
            }
            if cfg.wants(OutputFormat::Csv) {
                write_line_csv(&line.points, "n_c", &dir.join("critical_line.csv"))?;
            }
            if cfg.wants(OutputFormat::Json) {
                let mut bundle = RunBundle::new(cfg.clone());
                bundle.analytic = Some(line);
                write_json(&bundle, &dir.join("bundle.json"))?;
            }
        }
        Command::PhaseDiagram(r) | Command::Compare(r) => {
            let is_compare = matches!(cfg.command, Command::Compare(_));
            let grid = run_grid(&r.sweep)?;
            for f in &grid.failures {
                eprintln!("warning: cell ({}, {}) failed: {}", f.param_index, f.n_index, f.message);
            }
            let empirical = extract_transition(&grid, r.level);
            let analytic = match analytic_for(r) {
                Ok(line) => Some(line),
                Err(e) if !is_compare => {
                    eprintln!("warning: analytic overlay skipped: {e:#}");
                    None
                }
                Err(e) => return Err(e),
            };
            let comparison = match &analytic {
                Some(line) if is_compare => Some(compare_lines(&empirical, line)?),
                _ => None,
            };
            let undecided: usize = grid.undecided_count.iter().flatten().sum();
            let marginal: usize = grid.marginal_count.iter().flatten().sum();
            writeln!(
                out,
                "cells: {}  undecided: {undecided}  marginal: {marginal}  failed: {}",
                grid.spec.param_grid.len() * grid.spec.n_grid.len(),
                grid.failures.len()
            )?;
            writeln!(out, "{},n_empirical", r.sweep.family.param_name())?;
            for &(p, n) in &empirical.points {
                writeln!(out, "{},{}", format_sig9(p), format_sig9(n))?;
            }
            for (p, c) in &empirical.censored {
                writeln!(out, "{},censored:{}", format_sig9(*p), serde_json::to_string(c)?.trim_matches('"'))?;
            }
            if let Some(cmp) = &comparison {
                writeln!(out, "param,empirical,analytic,deviation")?;
                for row in &cmp.rows {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        format_sig9(row.param),
                        format_sig9(row.empirical),
                        format_sig9(row.analytic),
                        format_sig9(row.deviation)
                    )?;
                }
                writeln!(out, "max_abs_dev: {}", format_sig9(cmp.max_abs_dev))?;
                writeln!(out, "mean_abs_dev: {}", format_sig9(cmp.mean_abs_dev))?;
            }
            if cfg.wants(OutputFormat::Csv) {
                write_grid_csv(&grid, &dir.join("grid.csv"))?;
                write_line_csv(&empirical.points, "n_empirical", &dir.join("transition.csv"))?;
                if let Some(line) = &analytic {
                    write_line_csv(&line.points, "n_c", &dir.join("critical_line.csv"))?;
                }
                if let Some(cmp) = &comparison {
                    write_comparison_csv(cmp, &dir.join("comparison.csv"))?;
                }
            }
            if cfg.wants(OutputFormat::Svg) {
                let style = HeatmapStyle {
                    title: Some(format!(
                        "N = {}, R = {}, seed = {}",
                        r.sweep.n_assets, r.sweep.realizations, r.sweep.master_seed
                    )),
                    ..HeatmapStyle::default()
                };
                let doc = render_heatmap(&grid, analytic.as_ref(), Some(&empirical), &style);
                write_svg(&doc, &dir.join("phase.svg"))?;
            }
            if cfg.wants(OutputFormat::Json) {
                let mut bundle = RunBundle::new(cfg.clone());
                bundle.grid = Some(grid);
                bundle.empirical = Some(empirical);
                bundle.analytic = analytic;
                bundle.comparison = comparison;
                write_json(&bundle, &dir.join("bundle.json"))?;
            }
        }
        Command::NegativeFraction(r) => {
            if matches!(r.family, FamilyTemplate::Subset { .. }) {
                bail!(UsageError("pneg needs a perturbed family".into()));
            }
            let points = negative_fraction_curve(
                &r.family,
                &r.params,
                &r.n_values,
                r.n_assets,
                r.realizations,
                r.seed,
                r.parallelism,
            )?;
            writeln!(out, "{},n,n_states,fraction,gaussian_reference", r.family.param_name())?;
            for p in &points {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    format_sig9(p.param),
                    format_sig9(p.n),
                    p.n_states,
                    format_sig9(p.fraction),
                    p.reference.map(format_sig9).unwrap_or_default()
                )?;
            }
            if cfg.wants(OutputFormat::Csv) {
                write_negative_fraction_csv(&points, &dir.join("pneg.csv"))?;
            }
            if cfg.wants(OutputFormat::Json) {
                let mut bundle = RunBundle::new(cfg.clone());
                bundle.negative_fraction = Some(points);
                write_json(&bundle, &dir.join("bundle.json"))?;
            }
        }
    }
    Ok(())
}

/// Whether the command writes files by default. Simulate and critical-line
/// only print unless an output directory was asked for.
fn writes_files(cli: &Cli) -> bool {
    match cli.command {
        Sub::Simulate(_) | Sub::CriticalLine(_) => cli.out.is_some() || std::env::var_os(OUT_DIR_ENV).is_some(),
        _ => true,
    }
}

/// Runs the CLI and returns the process exit code: 0 on success, 2 for
/// usage errors, 1 for numerical or I/O failures.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve(&cli).and_then(|mut cfg| {
        if !writes_files(&cli) && !matches!(cli.command, Sub::Run { .. }) {
            cfg.formats.clear();
        }
        writeln!(out, "# config: {}", serde_json::to_string(&cfg)?)?;
        cfg.validate().map_err(UsageError)?;
        execute(&cfg, out)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
