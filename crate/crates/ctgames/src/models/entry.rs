//! Two-player entry/exit game with a binary exogenous demand state.
//!
//! The state is `(x1, x2, d)` with activity bits `x_i` and demand
//! `d in {L, H}`, encoded with demand slowest and firm 1 fastest:
//! states 1-4 are the low-demand block, 5-8 the high-demand block.
//! Choice 1 switches the firm's own activity bit; nature toggles demand at
//! rates `gamma_lh` (L to H) and `gamma_hl` (H to L).

use crate::equilibrium::{ChoiceSpec, Dest, GameSpec, PlayerSpec, SolveOptions, WarmCache};
use crate::error::{Error, Result};
use crate::estimation::{CtModel, EvaluatedModel, ParameterSpec, Transform};
use crate::jumpprocess::IntensityMatrix;
use crate::statespace::{ContinuationMap, StateSpace};

use super::renewal::evaluate_standard_game;

pub const ENTRY_STATES: usize = 8;

/// Move arrival rate specification.
#[derive(Clone, Copy, Debug)]
pub enum EntryRates {
    /// Firm-specific, state-constant rates.
    PerFirm([f64; 2]),
    /// Demand-dependent rates shared by both firms.
    PerDemand { low: f64, high: f64 },
}

/// Structural parameters of the entry game.
#[derive(Clone, Copy, Debug)]
pub struct EntryParams {
    pub gamma_lh: f64,
    pub gamma_hl: f64,
    pub rates: EntryRates,
    /// Instantaneous payoff of switching while inactive (entry cost, < 0).
    pub entry_cost: f64,
    /// Instantaneous payoff of switching while active (scrap value).
    pub scrap: f64,
}

/// Per-firm flow payoffs over the 8 encoded states.
pub type FlowTable = [[f64; ENTRY_STATES]; 2];

/// The encoded state space `(d, x2, x1)` of the entry game.
pub fn entry_space() -> StateSpace {
    StateSpace::product(2, 2, 2).expect("fixed 2x2x2 space")
}

/// Continuation map: choice 1 toggles the acting firm's activity bit.
pub fn entry_map() -> ContinuationMap {
    let space = entry_space();
    ContinuationMap::new(2, 2, ENTRY_STATES, move |i, j, s| {
        if j == 0 {
            return s;
        }
        let mut t = space.decode(s).expect("valid state");
        t[i] = 3 - t[i]; // toggle 1 <-> 2
        space.encode(&t).expect("valid tuple")
    })
    .expect("entry map satisfies distinct actions")
}

/// Flow table from four profit levels: an active firm earns the monopoly or
/// duopoly profit for the demand level; inactive firms earn `inactive`.
pub fn symmetric_flow_table(
    mono_low: f64,
    duo_low: f64,
    mono_high: f64,
    duo_high: f64,
    inactive: f64,
) -> FlowTable {
    let space = entry_space();
    let mut table = [[0.0; ENTRY_STATES]; 2];
    for s in 1..=ENTRY_STATES {
        let t = space.decode(s).unwrap();
        let (d, x1, x2) = (t[0], t[1], t[2]);
        for (fi, (own, rival)) in [(x1, x2), (x2, x1)].into_iter().enumerate() {
            table[fi][s - 1] = if own == 1 {
                inactive
            } else {
                match (d, rival) {
                    (1, 1) => mono_low,
                    (1, _) => duo_low,
                    (_, 1) => mono_high,
                    (_, _) => duo_high,
                }
            };
        }
    }
    table
}

/// Assembles the 8-state entry game.
pub fn entry_build(params: &EntryParams, flow: &FlowTable, rho: f64) -> Result<GameSpec> {
    for (name, v) in [("gamma_lh", params.gamma_lh), ("gamma_hl", params.gamma_hl)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::arg(format!("{name} must be positive and finite, got {v}")));
        }
    }
    match params.rates {
        EntryRates::PerFirm(r) => {
            if r.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::arg("firm move rates must be positive and finite".into()));
            }
        }
        EntryRates::PerDemand { low, high } => {
            if !(low > 0.0 && high > 0.0) || !low.is_finite() || !high.is_finite() {
                return Err(Error::arg("demand-level move rates must be positive and finite".into()));
            }
        }
    }
    if !(rho > 0.0) {
        return Err(Error::arg(format!("rho must be positive, got {rho}")));
    }
    if flow.iter().flatten().any(|u| !u.is_finite()) {
        return Err(Error::arg("flow payoff table must be complete and finite over 8 states x 2 firms".into()));
    }
    if !params.entry_cost.is_finite() || !params.scrap.is_finite() {
        return Err(Error::arg("entry cost and scrap value must be finite".into()));
    }
    let space = entry_space();
    let map = entry_map();
    // nature: demand toggles only
    let mut nature = IntensityMatrix::zeros(ENTRY_STATES);
    for s in 1..=ENTRY_STATES {
        let t = space.decode(s)?;
        let mut flipped = t.clone();
        flipped[0] = 3 - t[0];
        let target = space.encode(&flipped)?;
        let rate = if t[0] == 1 { params.gamma_lh } else { params.gamma_hl };
        nature.add(s, target, rate)?;
    }
    let mut players = Vec::with_capacity(2);
    for fi in 1..=2usize {
        let mut psi_switch = [0.0; ENTRY_STATES];
        let mut dest = vec![0usize; ENTRY_STATES];
        let mut rates = vec![0.0; ENTRY_STATES];
        for s in 1..=ENTRY_STATES {
            let t = space.decode(s)?;
            let active = t[fi] == 2;
            psi_switch[s - 1] = if active { params.scrap } else { params.entry_cost };
            dest[s - 1] = map.target(fi, 1, s)?;
            rates[s - 1] = match params.rates {
                EntryRates::PerFirm(r) => r[fi - 1],
                EntryRates::PerDemand { low, high } => {
                    if t[0] == 1 {
                        low
                    } else {
                        high
                    }
                }
            };
        }
        players.push(PlayerSpec {
            name: format!("firm{fi}"),
            rho,
            flow: flow[fi - 1].to_vec(),
            rates,
            choices: vec![
                ChoiceSpec { name: "hold".into(), psi: vec![0.0; ENTRY_STATES], dest: Dest::Stay },
                ChoiceSpec { name: "switch".into(), psi: psi_switch.to_vec(), dest: Dest::State(dest) },
            ],
        });
    }
    Ok(GameSpec { n_states: ENTRY_STATES, nature, players, shadows: vec![] })
}

/// The entry family as an estimable model with firm-specific rates;
/// parameters `(gamma_lh, gamma_hl, lambda_1, lambda_2, entry_cost, scrap)`
/// over a fixed flow table.
#[derive(Clone, Debug)]
pub struct EntryModel {
    pub rho: f64,
    pub flow: FlowTable,
    pub solve: SolveOptions,
    params: ParameterSpec,
}

impl EntryModel {
    pub fn new(flow: FlowTable, rho: f64) -> Self {
        EntryModel {
            rho,
            flow,
            solve: SolveOptions::default(),
            params: ParameterSpec::new(vec![
                ("gamma_lh", Transform::LogPositive),
                ("gamma_hl", Transform::LogPositive),
                ("lambda_1", Transform::LogPositive),
                ("lambda_2", Transform::LogPositive),
                ("entry_cost", Transform::Identity),
                ("scrap", Transform::Identity),
            ]),
        }
    }
}

impl CtModel for EntryModel {
    fn parameters(&self) -> &ParameterSpec {
        &self.params
    }

    fn evaluate_with(&self, theta: &[f64], cache: Option<&mut WarmCache>) -> Result<EvaluatedModel> {
        self.params.validate(theta)?;
        let p = EntryParams {
            gamma_lh: theta[0],
            gamma_hl: theta[1],
            rates: EntryRates::PerFirm([theta[2], theta[3]]),
            entry_cost: theta[4],
            scrap: theta[5],
        };
        let spec = entry_build(&p, &self.flow, self.rho)?;
        evaluate_standard_game(&spec, &self.solve, theta, cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_equilibrium;

    fn base_params() -> EntryParams {
        EntryParams {
            gamma_lh: 0.2,
            gamma_hl: 0.2,
            rates: EntryRates::PerFirm([0.8, 0.8]),
            entry_cost: -2.0,
            scrap: 0.5,
        }
    }

    fn base_flow() -> FlowTable {
        symmetric_flow_table(1.0, 0.4, 2.0, 1.0, 0.0)
    }

    #[test]
    fn incomplete_table_rejected() {
        let mut flow = base_flow();
        flow[1][3] = f64::NAN;
        assert!(entry_build(&base_params(), &flow, 0.05).is_err());
    }

    #[test]
    fn q_matches_displayed_sparsity_pattern() {
        let spec = entry_build(&base_params(), &base_flow(), 0.05).unwrap();
        let sol = solve_equilibrium(&spec, &SolveOptions::default(), None).unwrap();
        let q = &sol.aggregate;
        // per row: 1-based nonzero columns of the 8x8 display
        let pattern: [&[usize]; 8] = [
            &[2, 3, 5],
            &[1, 4, 6],
            &[1, 4, 7],
            &[2, 3, 8],
            &[1, 6, 7],
            &[2, 5, 8],
            &[3, 5, 8],
            &[4, 6, 7],
        ];
        for r in 1..=8 {
            let got: Vec<usize> = q.row(r).map(|(c, _)| c).collect();
            assert_eq!(got, pattern[r - 1], "row {r}");
        }
        // demand entries carry the nature rates
        assert_eq!(q.rate(1, 5), 0.2);
        assert_eq!(q.rate(5, 1), 0.2);
        // firm hazards are lambda * sigma
        let h12 = q.rate(1, 2); // firm 1 enters at (0,0,L)
        let sigma = sol.ccps[0].prob(1, 1);
        assert!((h12 - 0.8 * sigma).abs() < 1e-12);
    }

    #[test]
    fn symmetric_primitives_give_exchangeable_ccps() {
        let spec = entry_build(&base_params(), &base_flow(), 0.05).unwrap();
        let sol = solve_equilibrium(&spec, &SolveOptions { tol: 1e-13, ..Default::default() }, None).unwrap();
        let space = entry_space();
        // swapping firm labels maps state (x1, x2, d) to (x2, x1, d)
        for s in 1..=8 {
            let t = space.decode(s).unwrap();
            let swapped = space.encode(&[t[0], t[2], t[1]]).unwrap();
            for j in 0..2 {
                let a = sol.ccps[0].prob(j, s);
                let b = sol.ccps[1].prob(j, swapped);
                assert!((a - b).abs() < 1e-10, "state {s} choice {j}: {a} vs {b}");
            }
            let va = sol.values[0][s - 1];
            let vb = sol.values[1][swapped - 1];
            assert!((va - vb).abs() < 1e-8);
        }
    }

    #[test]
    fn rival_presence_lowers_activity() {
        // with duopoly profits below monopoly profits, firm 1 enters less
        // often when firm 2 is active
        let spec = entry_build(&base_params(), &base_flow(), 0.05).unwrap();
        let sol = solve_equilibrium(&spec, &SolveOptions::default(), None).unwrap();
        let space = entry_space();
        for d in 1..=2 {
            let alone = space.encode(&[d, 1, 1]).unwrap();
            let crowded = space.encode(&[d, 1, 2]).unwrap();
            let p_alone = sol.ccps[0].prob(1, alone);
            let p_crowded = sol.ccps[0].prob(1, crowded);
            assert!(
                p_alone > p_crowded,
                "demand {d}: entry prob alone {p_alone} <= crowded {p_crowded}"
            );
        }
    }

    #[test]
    fn structural_sparsity_of_parts() {
        // nature never touches firm bits; firms never touch demand or rival bits
        let spec = entry_build(&base_params(), &base_flow(), 0.05).unwrap();
        let sol = solve_equilibrium(&spec, &SolveOptions::default(), None).unwrap();
        let space = entry_space();
        for (r, c, _) in spec.nature.entries() {
            let (a, b) = (space.decode(r).unwrap(), space.decode(c).unwrap());
            assert_eq!(a[1], b[1]);
            assert_eq!(a[2], b[2]);
            assert_ne!(a[0], b[0]);
        }
        for ch in sol.move_channels(&spec) {
            for s in 1..=8 {
                if let Some(t) = ch.dest[s - 1] {
                    let (a, b) = (space.decode(s).unwrap(), space.decode(t).unwrap());
                    assert_eq!(a[0], b[0], "player move changed demand");
                    let rival = 3 - ch.player;
                    assert_eq!(a[rival], b[rival], "player move changed rival bit");
                    assert_ne!(a[ch.player], b[ch.player]);
                }
            }
        }
    }
}
