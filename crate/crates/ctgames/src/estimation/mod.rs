//! Maximum likelihood estimation from continuous-time event data and
//! discretely sampled panels.
//!
//! Rate-type parameters are estimated on the log scale and cost-type
//! parameters untransformed; the optimizer works entirely in the transformed
//! space. One equilibrium solve backs each likelihood evaluation, optionally
//! warm-started from the nearest previously solved parameter point.

mod fit;
mod likelihood;
mod mc;
mod optimize;

pub use fit::{fit, lr_test, standard_errors, FitOptions, FitResult, LrTest, StartRecord};
pub use likelihood::{loglik_ct, loglik_ct_eval, loglik_dt, loglik_dt_counts, PanelCounts};
pub use mc::{mc_run, InitialState, McDesign, McScheme, McSummary, ParamSummary, SchemeSummary};
pub use optimize::{fd_gradient, minimize, OptimOptions, OptimResult};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumSolution, WarmCache};
use crate::error::{Error, Result};
use crate::jumpprocess::{IntensityMatrix, MoveChannel};

/// Scale on which a structural parameter is optimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// Positive parameter, optimized as its logarithm (rates).
    LogPositive,
    /// Unconstrained parameter (costs).
    Identity,
}

impl Transform {
    pub fn to_internal(self, structural: f64) -> f64 {
        match self {
            Transform::LogPositive => structural.ln(),
            Transform::Identity => structural,
        }
    }

    pub fn from_internal(self, internal: f64) -> f64 {
        match self {
            Transform::LogPositive => internal.exp(),
            Transform::Identity => internal,
        }
    }

    /// Jacobian `d structural / d internal` at the structural value.
    pub fn jacobian(self, structural: f64) -> f64 {
        match self {
            Transform::LogPositive => structural,
            Transform::Identity => 1.0,
        }
    }
}

/// Parameter names, transforms, and optional structural-scale box bounds for
/// a model family.
#[derive(Clone, Debug)]
pub struct ParameterSpec {
    names: Vec<String>,
    transforms: Vec<Transform>,
    bounds: Vec<(f64, f64)>,
}

impl ParameterSpec {
    pub fn new(entries: Vec<(&str, Transform)>) -> Self {
        let names = entries.iter().map(|(n, _)| n.to_string()).collect();
        let transforms: Vec<Transform> = entries.iter().map(|(_, t)| *t).collect();
        let bounds = transforms
            .iter()
            .map(|t| match t {
                Transform::LogPositive => (0.0, f64::INFINITY),
                Transform::Identity => (f64::NEG_INFINITY, f64::INFINITY),
            })
            .collect();
        ParameterSpec { names, transforms, bounds }
    }

    pub fn with_bounds(mut self, name: &str, lo: f64, hi: f64) -> Result<Self> {
        let i = self.index_of(name)?;
        self.bounds[i] = (lo, hi);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::arg(format!("unknown parameter '{name}'")))
    }

    /// Bounds mapped to the internal (transformed) scale.
    pub fn internal_bounds(&self) -> Vec<(f64, f64)> {
        self.transforms
            .iter()
            .zip(&self.bounds)
            .map(|(t, &(lo, hi))| match t {
                Transform::LogPositive => (
                    if lo <= 0.0 { f64::NEG_INFINITY } else { lo.ln() },
                    if hi.is_finite() { hi.ln() } else { f64::INFINITY },
                ),
                Transform::Identity => (lo, hi),
            })
            .collect()
    }

    pub fn to_internal(&self, structural: &[f64]) -> Result<Vec<f64>> {
        self.check_len(structural)?;
        Ok(structural
            .iter()
            .zip(&self.transforms)
            .map(|(&v, t)| t.to_internal(v))
            .collect())
    }

    pub fn from_internal(&self, internal: &[f64]) -> Result<Vec<f64>> {
        self.check_len(internal)?;
        Ok(internal
            .iter()
            .zip(&self.transforms)
            .map(|(&v, t)| t.from_internal(v))
            .collect())
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, spec has {}",
                v.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Validates a structural vector against transforms and bounds.
    pub fn validate(&self, structural: &[f64]) -> Result<()> {
        self.check_len(structural)?;
        for ((name, &v), (t, &(lo, hi))) in self
            .names
            .iter()
            .zip(structural)
            .zip(self.transforms.iter().zip(&self.bounds))
        {
            if !v.is_finite() {
                return Err(Error::arg(format!("parameter '{name}' must be finite, got {v}")));
            }
            if *t == Transform::LogPositive && v <= 0.0 {
                return Err(Error::arg(format!("parameter '{name}' must be positive, got {v}")));
            }
            if v < lo || v > hi {
                return Err(Error::arg(format!(
                    "parameter '{name}' = {v} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn vector(&self, values: Vec<f64>) -> Result<ParameterVector> {
        self.validate(&values)?;
        Ok(ParameterVector {
            names: self.names.clone(),
            transforms: self.transforms.clone(),
            bounds: self.bounds.clone(),
            values,
        })
    }
}

/// Named structural parameters with their transforms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParameterVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub transforms: Vec<Transform>,
    pub bounds: Vec<(f64, f64)>,
}

impl ParameterVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// A model evaluated at a parameter point: the observable jump process
/// (nature, labeled move channels, and their aggregate) plus the underlying
/// equilibrium solution.
///
/// For anonymous-encoded games the observable process lives on the market
/// configuration space while `solution` lives on the per-firm perspective
/// space.
#[derive(Clone, Debug)]
pub struct EvaluatedModel {
    pub nature: IntensityMatrix,
    pub channels: Vec<MoveChannel>,
    pub aggregate: IntensityMatrix,
    pub solution: EquilibriumSolution,
}

impl EvaluatedModel {
    pub fn n_states(&self) -> usize {
        self.aggregate.dim()
    }

    /// Rate of a labeled event `(player, action)` in `state` landing on
    /// `next_state`; zero when the event is impossible under the model.
    pub fn event_rate(&self, player: usize, action: usize, state: usize, next_state: usize) -> f64 {
        if player == 0 {
            return self.nature.rate(state, next_state);
        }
        for ch in &self.channels {
            if ch.player == player && ch.action == action {
                if ch.dest[state - 1] == Some(next_state) {
                    return ch.rates[state - 1];
                }
                return 0.0;
            }
        }
        0.0
    }
}

/// A model family exposing a parameter spec and an equilibrium evaluation at
/// any parameter point.
pub trait CtModel: Sync {
    fn parameters(&self) -> &ParameterSpec;

    /// Solves the model at structural `theta`, optionally warm-starting value
    /// iteration from the nearest cached parameter point.
    fn evaluate_with(&self, theta: &[f64], cache: Option<&mut WarmCache>) -> Result<EvaluatedModel>;

    /// Cold evaluation (deterministic in `theta`).
    fn evaluate(&self, theta: &[f64]) -> Result<EvaluatedModel> {
        self.evaluate_with(theta, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms_roundtrip() {
        let spec = ParameterSpec::new(vec![("rate", Transform::LogPositive), ("cost", Transform::Identity)]);
        let internal = spec.to_internal(&[0.25, -3.0]).unwrap();
        assert!((internal[0] - 0.25f64.ln()).abs() < 1e-15);
        assert_eq!(internal[1], -3.0);
        let back = spec.from_internal(&internal).unwrap();
        assert!((back[0] - 0.25).abs() < 1e-15);
        assert_eq!(back[1], -3.0);
        assert!(spec.validate(&[-0.1, 0.0]).is_err());
    }
}
