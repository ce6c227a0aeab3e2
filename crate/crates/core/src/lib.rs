//! Arbitrage phase transitions in random one-period markets whose assets are
//! priced under heterogeneous local measures.
//!
//! - [`market`] samples payoffs and measures and derives excess returns.
//! - [`detect`] decides zero versus infinite arbitrage volume per instance.
//! - [`theory`] solves the saddle-point equations for the critical line.
//! - [`sweep`] estimates Monte Carlo phase diagrams over parameter grids.
//! - [`io`] writes CSV/JSON records and renders SVG heatmaps.

pub mod cli;
pub mod detect;
pub mod family;
pub mod io;
pub mod market;
pub mod matrix;
pub mod parallel;
pub mod sweep;
pub mod theory;

pub use detect::{detect, detect_hull_oracle, verify_witness, ArbitrageVerdict, DetectorConfig, VolumeKind};
pub use family::{AnalyticFamily, FamilyTemplate};
pub use market::{MarketInstance, MarketParams, MeasureFamily};
pub use matrix::Matrix;
pub use theory::{critical_line, solve_critical_n, CriticalLine, Interpretation, OmegaSpec};
