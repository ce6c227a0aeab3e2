//! Resolved run configuration. Echoed by every command and embedded in the
//! JSON bundle, so any output can be reproduced from it alone.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::detect::DetectorConfig;
use crate::family::FamilyTemplate;
use crate::market::{MarketParams, MeasureFamily};
use crate::sweep::{states_for, SweepSpec};
use crate::theory::{Interpretation, OmegaSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Simulate(SimulateRequest),
    PhaseDiagram(DiagramRequest),
    CriticalLine(LineRequest),
    Compare(DiagramRequest),
    #[serde(rename = "pneg")]
    NegativeFraction(NegativeFractionRequest),
}

/// One market instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub n_assets: usize,
    pub n_states: usize,
    pub family: MeasureFamily,
    pub seed: u64,
    #[serde(default)]
    pub detector: DetectorConfig,
}

/// A sweep plus the analytic line it is drawn and compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramRequest {
    pub sweep: SweepSpec,
    #[serde(default)]
    pub interpretation: Interpretation,
    pub omega: OmegaSpec,
    #[serde(default = "half")]
    pub level: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRequest {
    pub family: FamilyTemplate,
    pub params: Vec<f64>,
    pub omega: OmegaSpec,
    #[serde(default)]
    pub interpretation: Interpretation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeFractionRequest {
    pub family: FamilyTemplate,
    pub params: Vec<f64>,
    pub n_values: Vec<f64>,
    pub n_assets: usize,
    pub realizations: usize,
    pub seed: u64,
    #[serde(default)]
    pub parallelism: usize,
}

fn increasing(name: &str, values: &[f64]) -> Result<(), String> {
    if values.is_empty() {
        return Err(format!("{name} is empty"));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
        return Err(format!("{name} must be finite and strictly increasing"));
    }
    Ok(())
}

impl RunConfig {
    pub fn new(command: Command, output_dir: PathBuf) -> Self {
        Self {
            command,
            output_dir,
            formats: OutputFormat::ALL.to_vec(),
        }
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }

    /// Shape checks that need no numerics. Family parameter domains are
    /// checked by the modules that consume them.
    pub fn validate(&self) -> Result<(), String> {
        match &self.command {
            Command::Simulate(r) => {
                MarketParams::new(r.n_assets, r.n_states, r.seed).map_err(|e| e.to_string())?;
                r.family.validate(r.n_states).map_err(|e| e.to_string())
            }
            Command::PhaseDiagram(r) | Command::Compare(r) => {
                r.sweep.validate().map_err(|e| e.to_string())?;
                if !(r.level > 0.0 && r.level < 1.0) {
                    return Err(format!("level {} outside (0, 1)", r.level));
                }
                Ok(())
            }
            Command::CriticalLine(r) => increasing("parameter grid", &r.params),
            Command::NegativeFraction(r) => {
                increasing("parameter grid", &r.params)?;
                increasing("density grid", &r.n_values)?;
                if r.n_assets < 1 || r.realizations < 1 {
                    return Err("N and R must be at least 1".into());
                }
                for &n in &r.n_values {
                    states_for(r.n_assets, n).map_err(|e| e.to_string())?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_config() -> RunConfig {
        RunConfig::new(
            Command::CriticalLine(LineRequest {
                family: FamilyTemplate::subset(),
                params: vec![0.5],
                omega: OmegaSpec::Thermodynamic,
                interpretation: Interpretation::default(),
            }),
            "out".into(),
        )
    }

    #[test]
    fn round_trip() {
        let cfg = line_config();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = serde_json::to_string(&line_config()).unwrap();
        let top = text.replacen('{', "{\"extra\":1,", 1);
        assert!(serde_json::from_str::<RunConfig>(&top).is_err());
        let inner = text.replace("\"params\"", "\"bogus\":0,\"params\"");
        assert!(serde_json::from_str::<RunConfig>(&inner).is_err());
        let family = text.replace("\"kind\":\"subset\"", "\"kind\":\"subset\",\"kappa\":0.5");
        assert!(serde_json::from_str::<RunConfig>(&family).is_err(), "{family}");
    }

    #[test]
    fn validation() {
        assert!(line_config().validate().is_ok());
        let mut bad = line_config();
        if let Command::CriticalLine(r) = &mut bad.command {
            r.params = vec![0.5, 0.4];
        }
        assert!(bad.validate().is_err());
        let sim = RunConfig::new(
            Command::Simulate(SimulateRequest {
                n_assets: 3,
                n_states: 2,
                family: MeasureFamily::subset(3),
                seed: 1,
                detector: DetectorConfig::default(),
            }),
            "out".into(),
        );
        assert!(sim.validate().is_err());
    }
}
