//! Markov perfect equilibrium machinery.
//!
//! A [`GameSpec`] describes one or more value-carrying players plus any
//! number of shadow actors on a common encoded state space. Players choose
//! among discrete actions with type-I extreme value payoff shocks when a
//! Poisson move arrival occurs; shadow actors are decision processes whose
//! choice probabilities are derived from a player's value function rather
//! than solved for separately (anonymous rivals in symmetric games, or
//! short-lived entrants). Nature moves the state through an exogenous
//! intensity matrix.
//!
//! Value functions satisfy, state by state, a recursion whose denominator is
//! the discount rate plus every event rate that can move the state, and
//! whose numerator collects the flow payoff, rate-weighted continuation
//! values for nature and rival moves, and the expected maximum over own
//! choices. With standard type-I extreme value shocks the expected maximum
//! is the log-sum-exp of choice-specific values plus the Euler-Mascheroni
//! constant, and the conditional mean of the shock for a chosen action is
//! `EULER_MASCHERONI - ln(sigma)`.

mod linear;
mod solver;

pub use linear::{recover_flow_payoffs, value_linear, xi_matrix};
pub use solver::{
    bellman_apply, ccps_from_values, solve_equilibrium, EquilibriumSolution, SolveOptions,
    WarmCache,
};

use crate::error::{Error, Result};
use crate::jumpprocess::IntensityMatrix;
use crate::util::log_sum_exp;

/// Where a choice sends the state.
#[derive(Clone, Debug)]
pub enum Dest {
    /// Stay in the current state (the continuation choice `j = 0`).
    Stay,
    /// Deterministic per-state continuation targets, 1-based. A target equal
    /// to the current state is allowed and produces no observable change.
    State(Vec<usize>),
    /// Terminal action: the instantaneous payoff is collected and the
    /// player's value stream ends (quality ladder exit).
    Terminal,
}

/// One choice available to a player.
#[derive(Clone, Debug)]
pub struct ChoiceSpec {
    pub name: String,
    /// Instantaneous payoff per state.
    pub psi: Vec<f64>,
    pub dest: Dest,
}

/// A value-carrying player.
#[derive(Clone, Debug)]
pub struct PlayerSpec {
    pub name: String,
    /// Discount rate, `> 0`.
    pub rho: f64,
    /// Flow payoff per state (utils per unit time).
    pub flow: Vec<f64>,
    /// Move arrival rate per state (events per unit time).
    pub rates: Vec<f64>,
    /// Choices, with `j = 0` the costless continuation.
    pub choices: Vec<ChoiceSpec>,
}

/// Choice-probability source for a shadow actor.
#[derive(Clone, Debug)]
pub enum ShadowCcp {
    /// Copy a player's choice probabilities evaluated at a mapped state:
    /// `sigma_shadow(j | k) = sigma_player(j | state_map[k-1])`.
    Mirror { player: usize, state_map: Vec<usize> },
    /// Logit best response computed from a player's value function with the
    /// shadow's own choice structure; `cont[j][k-1] = None` denotes a choice
    /// with no continuation value.
    Logit { player: usize, psi: Vec<Vec<f64>>, cont: Vec<Vec<Option<usize>>> },
}

/// A decision process whose probabilities mirror a player's solution.
#[derive(Clone, Debug)]
pub struct ShadowActor {
    pub name: String,
    /// Label used when attributing simulated events (players occupy their
    /// 1-based position; pick labels that do not collide).
    pub label: usize,
    /// Move arrival rate per state; zero where the actor is absent.
    pub rates: Vec<f64>,
    /// Per-choice, per-state destinations (1-based; equal to the state for
    /// choices that do not move it).
    pub dests: Vec<Vec<usize>>,
}

/// A continuous-time dynamic discrete game on an encoded state space.
#[derive(Clone, Debug)]
pub struct GameSpec {
    pub n_states: usize,
    /// Nature's intensity matrix `Q_0`.
    pub nature: IntensityMatrix,
    pub players: Vec<PlayerSpec>,
    pub shadows: Vec<(ShadowActor, ShadowCcp)>,
}

impl GameSpec {
    /// Number of actors (players followed by shadows).
    pub fn n_actors(&self) -> usize {
        self.players.len() + self.shadows.len()
    }

    /// Validates dimensions, payoff finiteness, the costless-continuation
    /// normalization, and the positive-total-rate condition (for `K > 1`).
    pub fn validate(&self) -> Result<()> {
        let k = self.n_states;
        if k == 0 {
            return Err(Error::arg("game must have at least one state"));
        }
        if self.nature.dim() != k {
            return Err(Error::Dimension(format!(
                "nature matrix has dimension {}, game has {k} states",
                self.nature.dim()
            )));
        }
        if self.players.is_empty() {
            return Err(Error::arg("game must have at least one player"));
        }
        for (pi, p) in self.players.iter().enumerate() {
            if !(p.rho > 0.0) {
                return Err(Error::arg(format!("player {} discount rate must be > 0", pi + 1)));
            }
            if p.flow.len() != k || p.rates.len() != k {
                return Err(Error::Dimension(format!(
                    "player {} flow/rate vectors must have length {k}",
                    pi + 1
                )));
            }
            if p.flow.iter().any(|u| !u.is_finite()) {
                return Err(Error::arg(format!("player {} flow payoffs must be finite", pi + 1)));
            }
            if p.rates.iter().any(|l| !l.is_finite() || *l < 0.0) {
                return Err(Error::arg(format!("player {} move rates must be finite and >= 0", pi + 1)));
            }
            if p.choices.is_empty() {
                return Err(Error::arg(format!("player {} must have at least one choice", pi + 1)));
            }
            for (j, c) in p.choices.iter().enumerate() {
                if c.psi.len() != k {
                    return Err(Error::Dimension(format!(
                        "player {} choice {j} psi must have length {k}",
                        pi + 1
                    )));
                }
                if c.psi.iter().any(|x| !x.is_finite()) {
                    return Err(Error::arg(format!(
                        "player {} choice {j} instantaneous payoffs must be finite",
                        pi + 1
                    )));
                }
                match (&c.dest, j) {
                    (Dest::Stay, 0) => {
                        if c.psi.iter().any(|&x| x != 0.0) {
                            return Err(Error::arg(format!(
                                "player {} continuation choice must have zero instantaneous payoff",
                                pi + 1
                            )));
                        }
                    }
                    (_, 0) => {
                        return Err(Error::arg(format!(
                            "player {} choice 0 must be the costless continuation",
                            pi + 1
                        )))
                    }
                    (Dest::State(v), _) => {
                        if v.len() != k || v.iter().any(|&t| t < 1 || t > k) {
                            return Err(Error::arg(format!(
                                "player {} choice {j} destinations must be valid states",
                                pi + 1
                            )));
                        }
                    }
                    (Dest::Terminal, _) => {
                        if self.players.len() > 1 {
                            return Err(Error::Structure(
                                "terminal choices are only supported in single-player specifications".into(),
                            ));
                        }
                    }
                    (Dest::Stay, _) => {}
                }
            }
        }
        for (a, ccp) in &self.shadows {
            if a.rates.len() != k {
                return Err(Error::Dimension(format!(
                    "shadow '{}' rate vector must have length {k}",
                    a.name
                )));
            }
            if a.rates.iter().any(|l| !l.is_finite() || *l < 0.0) {
                return Err(Error::arg(format!("shadow '{}' move rates must be finite and >= 0", a.name)));
            }
            let n_choices = a.dests.len();
            if n_choices == 0 {
                return Err(Error::arg(format!("shadow '{}' must have at least one choice", a.name)));
            }
            for d in &a.dests {
                if d.len() != k || d.iter().any(|&t| t < 1 || t > k) {
                    return Err(Error::arg(format!("shadow '{}' destinations must be valid states", a.name)));
                }
            }
            match ccp {
                ShadowCcp::Mirror { player, state_map } => {
                    let p = self
                        .players
                        .get(player.wrapping_sub(1))
                        .ok_or_else(|| Error::arg(format!("shadow '{}' mirrors unknown player {player}", a.name)))?;
                    if p.choices.len() != n_choices {
                        return Err(Error::Dimension(format!(
                            "shadow '{}' has {n_choices} choices but mirrors a player with {}",
                            a.name,
                            p.choices.len()
                        )));
                    }
                    if state_map.len() != k || state_map.iter().any(|&t| t < 1 || t > k) {
                        return Err(Error::arg(format!(
                            "shadow '{}' state map must cover all states",
                            a.name
                        )));
                    }
                }
                ShadowCcp::Logit { player, psi, cont } => {
                    if self.players.get(player.wrapping_sub(1)).is_none() {
                        return Err(Error::arg(format!(
                            "shadow '{}' references unknown player {player}",
                            a.name
                        )));
                    }
                    if psi.len() != n_choices || cont.len() != n_choices {
                        return Err(Error::Dimension(format!(
                            "shadow '{}' logit basis must cover {n_choices} choices",
                            a.name
                        )));
                    }
                    for (pj, cj) in psi.iter().zip(cont) {
                        if pj.len() != k || cj.len() != k {
                            return Err(Error::Dimension(format!(
                                "shadow '{}' logit basis must cover {k} states",
                                a.name
                            )));
                        }
                        if cj.iter().flatten().any(|&t| t < 1 || t > k) {
                            return Err(Error::arg(format!(
                                "shadow '{}' continuation states must be valid",
                                a.name
                            )));
                        }
                    }
                }
            }
        }
        if k > 1 {
            for s in 1..=k {
                let total: f64 = self.nature.total_rate(s)
                    + self.players.iter().map(|p| p.rates[s - 1]).sum::<f64>()
                    + self.shadows.iter().map(|(a, _)| a.rates[s - 1]).sum::<f64>();
                if !(total > 0.0) {
                    return Err(Error::arg(format!(
                        "state {s} has zero total event rate; some move or jump rate must be positive"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Conditional choice probabilities of one actor, stored per state.
#[derive(Clone, Debug, PartialEq)]
pub struct CcpTable {
    n_choices: usize,
    n_states: usize,
    p: Vec<f64>,
}

impl CcpTable {
    pub fn new(n_choices: usize, n_states: usize) -> Self {
        CcpTable { n_choices, n_states, p: vec![0.0; n_choices * n_states] }
    }

    /// Builds a table from per-state probability rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_states = rows.len();
        let n_choices = rows.first().map(Vec::len).unwrap_or(0);
        if n_states == 0 || n_choices == 0 {
            return Err(Error::arg("choice probability table must be nonempty"));
        }
        let mut t = CcpTable::new(n_choices, n_states);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n_choices {
                return Err(Error::Dimension("ragged choice probability rows".into()));
            }
            t.state_probs_mut(s + 1).copy_from_slice(row);
        }
        Ok(t)
    }

    pub fn n_choices(&self) -> usize {
        self.n_choices
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Probability of choice `j` in 1-based `state`.
    pub fn prob(&self, j: usize, state: usize) -> f64 {
        self.p[(state - 1) * self.n_choices + j]
    }

    /// Per-choice probabilities for a 1-based `state`.
    pub fn state_probs(&self, state: usize) -> &[f64] {
        &self.p[(state - 1) * self.n_choices..state * self.n_choices]
    }

    pub fn state_probs_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.p[(state - 1) * self.n_choices..state * self.n_choices]
    }

    /// Largest absolute difference against another table.
    pub fn sup_distance(&self, other: &CcpTable) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Log-sum-exp inclusive value of choice-specific payoffs, computed with a
/// max shift. Under standard type-I extreme value shocks the expected
/// maximum equals this plus [`crate::EULER_MASCHERONI`].
pub fn emax(v_choice: &[f64]) -> f64 {
    log_sum_exp(v_choice)
}

/// Logit best response over `psi[j] + v_cont[j]`, max-shifted.
pub fn best_response_ccp(psi: &[f64], v_cont: &[f64]) -> Vec<f64> {
    debug_assert_eq!(psi.len(), v_cont.len());
    let w: Vec<f64> = psi.iter().zip(v_cont).map(|(a, b)| a + b).collect();
    softmax(&w)
}

pub(crate) fn softmax(w: &[f64]) -> Vec<f64> {
    let m = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = w.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = out.iter().sum();
    for v in &mut out {
        *v /= s;
    }
    out
}

/// Hotz-Miller style inversion under type-I extreme value shocks: the
/// difference in choice-specific values of `j` over `j_prime` implied by the
/// choice probabilities, `ln sigma_j - ln sigma_j'`.
pub fn ccp_inversion_phi(j: usize, j_prime: usize, sigma_state: &[f64]) -> Result<f64> {
    let get = |idx: usize| -> Result<f64> {
        let p = *sigma_state
            .get(idx)
            .ok_or_else(|| Error::arg(format!("choice {idx} out of range 0..{}", sigma_state.len())))?;
        if p <= 0.0 {
            return Err(Error::LogDomain(format!(
                "choice probability for choice {idx} must be positive, got {p}"
            )));
        }
        Ok(p)
    };
    Ok(get(j)?.ln() - get(j_prime)?.ln())
}
