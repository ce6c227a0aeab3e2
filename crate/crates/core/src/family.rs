//! One-parameter families of local measures, as swept in phase diagrams.

use serde::{Deserialize, Serialize};

use crate::market::{MarketError, MeasureFamily, SubsetMode};

/// A measure family with one free parameter left open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyTemplate {
    /// Free parameter `κ = K / Ω`.
    Subset {
        #[serde(default)]
        mode: SubsetMode,
    },
    /// Free parameter `α` at fixed `Δ`.
    PerturbedAlpha {
        delta: f64,
        #[serde(default)]
        hard_constraint: bool,
    },
    /// Free parameter `Δ` at fixed `α`.
    PerturbedDelta {
        alpha: f64,
        #[serde(default)]
        hard_constraint: bool,
    },
}

/// Intensive description used by the analytic side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticFamily {
    Subset { kappa: f64 },
    Perturbed { delta: f64, alpha: f64 },
}

impl FamilyTemplate {
    pub fn subset() -> Self {
        Self::Subset {
            mode: SubsetMode::ExactSize,
        }
    }

    pub fn param_name(&self) -> &'static str {
        match self {
            Self::Subset { .. } => "kappa",
            Self::PerturbedAlpha { .. } => "alpha",
            Self::PerturbedDelta { .. } => "delta",
        }
    }

    /// Concrete family for `Ω` states. For subsets, `K = round(κ Ω)` clamped
    /// to `[1, Ω]`.
    pub fn instantiate(&self, param: f64, n_states: usize) -> Result<MeasureFamily, MarketError> {
        let family = match *self {
            Self::Subset { mode } => {
                let k = (param * n_states as f64).round().clamp(1.0, n_states as f64) as usize;
                MeasureFamily::SubsetUniform { k, mode }
            }
            Self::PerturbedAlpha {
                delta,
                hard_constraint,
            } => MeasureFamily::perturbed(delta, param, hard_constraint),
            Self::PerturbedDelta {
                alpha,
                hard_constraint,
            } => MeasureFamily::perturbed(param, alpha, hard_constraint),
        };
        family.validate(n_states)?;
        Ok(family)
    }

    pub fn analytic(&self, param: f64) -> AnalyticFamily {
        match *self {
            Self::Subset { .. } => AnalyticFamily::Subset { kappa: param },
            Self::PerturbedAlpha { delta, .. } => AnalyticFamily::Perturbed { delta, alpha: param },
            Self::PerturbedDelta { alpha, .. } => AnalyticFamily::Perturbed { delta: param, alpha },
        }
    }
}
