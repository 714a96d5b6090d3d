//! Single-agent renewal model (bus engine replacement).
//!
//! Mileage occupies bins `1..=K`; nature advances it one bin at rate
//! `gamma` (no advance past bin `K`). At Poisson move arrivals the agent
//! keeps the engine or replaces it, which resets mileage to bin 1 at
//! instantaneous cost `mu`. The flow cost is proportional to the mileage
//! fraction, `u_k = beta * k / K`, and move arrivals come at `lambda_low`
//! in the lower half of bins (`k <= floor(K/2)`) and `lambda_high` above.

use crate::equilibrium::{
    solve_equilibrium, ChoiceSpec, Dest, GameSpec, PlayerSpec, SolveOptions, WarmCache,
};
use crate::error::{Error, Result};
use crate::estimation::{CtModel, EvaluatedModel, ParameterSpec, Transform};
use crate::jumpprocess::IntensityMatrix;
use crate::statespace::ContinuationMap;

/// Structural parameters `(lambda_low, lambda_high, gamma, beta, mu)`.
#[derive(Clone, Copy, Debug)]
pub struct RenewalParams {
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub gamma: f64,
    pub beta: f64,
    pub mu: f64,
}

impl RenewalParams {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.lambda_low, self.lambda_high, self.gamma, self.beta, self.mu]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 5 {
            return Err(Error::Dimension(format!("renewal model has 5 parameters, got {}", v.len())));
        }
        Ok(RenewalParams { lambda_low: v[0], lambda_high: v[1], gamma: v[2], beta: v[3], mu: v[4] })
    }
}

/// Continuation map: keep stays put, replace resets to bin 1 (a self-reset
/// in bin 1 itself).
pub fn renewal_map(k: usize) -> Result<ContinuationMap> {
    ContinuationMap::with_self_resets(1, 2, k, |_i, j, s| if j == 0 { s } else { 1 })
}

/// Assembles the renewal game.
pub fn renewal_build(params: &RenewalParams, k: usize, rho: f64) -> Result<GameSpec> {
    if k < 2 {
        return Err(Error::arg(format!(
            "renewal model needs at least 2 mileage bins for any dynamics, got {k}"
        )));
    }
    for (name, v) in [
        ("lambda_low", params.lambda_low),
        ("lambda_high", params.lambda_high),
        ("gamma", params.gamma),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::arg(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if !(rho > 0.0) {
        return Err(Error::arg(format!("rho must be positive, got {rho}")));
    }
    if !params.beta.is_finite() || !params.mu.is_finite() {
        return Err(Error::arg("beta and mu must be finite".into()));
    }
    let split = k / 2;
    let nature = IntensityMatrix::from_entries(k, (1..k).map(|s| (s, s + 1, params.gamma)))?;
    let flow: Vec<f64> = (1..=k).map(|s| params.beta * s as f64 / k as f64).collect();
    let rates: Vec<f64> = (1..=k)
        .map(|s| if s <= split { params.lambda_low } else { params.lambda_high })
        .collect();
    Ok(GameSpec {
        n_states: k,
        nature,
        players: vec![PlayerSpec {
            name: "manager".into(),
            rho,
            flow,
            rates,
            choices: vec![
                ChoiceSpec { name: "keep".into(), psi: vec![0.0; k], dest: Dest::Stay },
                ChoiceSpec { name: "replace".into(), psi: vec![params.mu; k], dest: Dest::State(vec![1; k]) },
            ],
        }],
        shadows: vec![],
    })
}

/// The renewal family as an estimable model.
#[derive(Clone, Debug)]
pub struct RenewalModel {
    pub k: usize,
    pub rho: f64,
    pub solve: SolveOptions,
    params: ParameterSpec,
}

impl RenewalModel {
    pub fn new(k: usize, rho: f64) -> Self {
        RenewalModel {
            k,
            rho,
            // empirical default for this family
            solve: SolveOptions { tol: 1e-16, ..Default::default() },
            params: ParameterSpec::new(vec![
                ("lambda_low", Transform::LogPositive),
                ("lambda_high", Transform::LogPositive),
                ("gamma", Transform::LogPositive),
                ("beta", Transform::Identity),
                ("mu", Transform::Identity),
            ]),
        }
    }

    /// Standard configuration: 90 mileage bins, discount rate 0.05.
    pub fn standard() -> Self {
        RenewalModel::new(90, 0.05)
    }

    /// A restricted copy whose likelihood ties `lambda_low = lambda_high`
    /// (for nested testing); parameter order is `(lambda, gamma, beta, mu)`.
    pub fn homogeneous(self) -> HomogeneousRenewalModel {
        HomogeneousRenewalModel {
            params: ParameterSpec::new(vec![
                ("lambda", Transform::LogPositive),
                ("gamma", Transform::LogPositive),
                ("beta", Transform::Identity),
                ("mu", Transform::Identity),
            ]),
            inner: self,
        }
    }
}

impl CtModel for RenewalModel {
    fn parameters(&self) -> &ParameterSpec {
        &self.params
    }

    fn evaluate_with(&self, theta: &[f64], cache: Option<&mut WarmCache>) -> Result<EvaluatedModel> {
        self.params.validate(theta)?;
        let p = RenewalParams::from_slice(theta)?;
        let spec = renewal_build(&p, self.k, self.rho)?;
        evaluate_standard_game(&spec, &self.solve, theta, cache)
    }
}

/// Restricted renewal model with a single move arrival rate.
#[derive(Clone, Debug)]
pub struct HomogeneousRenewalModel {
    inner: RenewalModel,
    params: ParameterSpec,
}

impl CtModel for HomogeneousRenewalModel {
    fn parameters(&self) -> &ParameterSpec {
        &self.params
    }

    fn evaluate_with(&self, theta: &[f64], cache: Option<&mut WarmCache>) -> Result<EvaluatedModel> {
        self.params.validate(theta)?;
        let full = [theta[0], theta[0], theta[1], theta[2], theta[3]];
        self.inner.evaluate_with(&full, cache)
    }
}

/// Shared evaluation path for games whose observable process lives on the
/// same state space as the equilibrium (renewal and entry families).
pub(crate) fn evaluate_standard_game(
    spec: &GameSpec,
    solve: &SolveOptions,
    theta: &[f64],
    cache: Option<&mut WarmCache>,
) -> Result<EvaluatedModel> {
    let solution = match cache {
        Some(c) => {
            let warm = c.nearest(theta);
            let sol = solve_equilibrium(spec, solve, warm.as_deref())?;
            c.insert(theta.to_vec(), sol.values.clone());
            sol
        }
        None => solve_equilibrium(spec, solve, None)?,
    };
    let channels = solution.move_channels(spec);
    Ok(EvaluatedModel {
        nature: spec.nature.clone(),
        channels,
        aggregate: solution.aggregate.clone(),
        solution,
    })
}
