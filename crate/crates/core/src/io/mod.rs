//! Flat-file outputs: CSV tables, a JSON run bundle, and the SVG heatmap.

mod config;
mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sweep::{LineComparison, NegativeFractionPoint, PhaseGrid, TransitionLine};
use crate::theory::CriticalLine;

pub use config::{
    Command, DiagramRequest, LineRequest, NegativeFractionRequest, OutputFormat, RunConfig, SimulateRequest,
};
pub use svg::{render_heatmap, HeatmapStyle};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("bad grid `{spec}`: {reason}")]
    Grid { spec: String, reason: String },
}

/// Plain decimal with at most 9 significant digits and no trailing zeros.
/// Magnitudes outside `[1e-7, 1e16)` fall back to scientific notation.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-7..=15).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.truncate(s.trim_end_matches('0').trim_end_matches('.').len());
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Parses `start:stop:step` (endpoints inclusive within half a step), a
/// comma-separated list, or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, IoError> {
    let err = |reason: &str| IoError::Grid {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = match (num(start), num(stop), num(step)) {
                (Some(a), Some(b), Some(h)) => (a, b, h),
                _ => return Err(err("expected three finite numbers")),
            };
            if !(step > 0.0) {
                return Err(err("step must be positive"));
            }
            if stop < start {
                return Err(err("stop is below start"));
            }
            let count = ((stop - start) / step + 0.5).floor() as usize + 1;
            if count > 1_000_000 {
                return Err(err("more than 10^6 points"));
            }
            // Snap to 12 decimals so 0.05 * 3 prints as 0.15.
            Ok((0..count)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        [list] => {
            let values: Option<Vec<f64>> = list.split(',').map(num).collect();
            let values = values.ok_or_else(|| err("expected numbers"))?;
            if values.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(err("values must be strictly increasing"));
            }
            Ok(values)
        }
        _ => Err(err("expected start:stop:step, a list, or a number")),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| IoError::File {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn grid_csv(grid: &PhaseGrid) -> String {
    let mut out = String::from("param,n,fraction,marginal_count\n");
    for (p, &param) in grid.spec.param_grid.iter().enumerate() {
        for (j, &n) in grid.spec.n_grid.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_sig9(param),
                format_sig9(n),
                format_sig9(grid.fraction[p][j]),
                grid.marginal_count[p][j]
            );
        }
    }
    out
}

/// One row per cell in parameter-major order.
pub fn write_grid_csv(grid: &PhaseGrid, path: &Path) -> Result<(), IoError> {
    write_file(path, &grid_csv(grid))
}

pub fn line_csv(points: &[(f64, f64)], value_column: &str) -> String {
    let mut out = format!("param,{value_column}\n");
    for &(param, n) in points {
        let _ = writeln!(out, "{},{}", format_sig9(param), format_sig9(n));
    }
    out
}

/// `param,<value_column>` rows.
pub fn write_line_csv(points: &[(f64, f64)], value_column: &str, path: &Path) -> Result<(), IoError> {
    write_file(path, &line_csv(points, value_column))
}

pub fn write_comparison_csv(cmp: &LineComparison, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("param,empirical,analytic,deviation\n");
    for r in &cmp.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_sig9(r.param),
            format_sig9(r.empirical),
            format_sig9(r.analytic),
            format_sig9(r.deviation)
        );
    }
    write_file(path, &out)
}

pub fn write_negative_fraction_csv(points: &[NegativeFractionPoint], path: &Path) -> Result<(), IoError> {
    let mut out = String::from("param,n,n_states,fraction,gaussian_reference\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig9(p.param),
            format_sig9(p.n),
            p.n_states,
            format_sig9(p.fraction),
            p.reference.map(format_sig9).unwrap_or_default()
        );
    }
    write_file(path, &out)
}

/// Everything needed to re-run and re-plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunBundle {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PhaseGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<TransitionLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<CriticalLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<LineComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_fraction: Option<Vec<NegativeFractionPoint>>,
}

impl RunBundle {
    pub fn new(config: RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            grid: None,
            empirical: None,
            analytic: None,
            comparison: None,
            negative_fraction: None,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_file(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_svg(doc: &str, path: &Path) -> Result<(), IoError> {
    write_file(path, doc)
}
