//! Linear representation of the value function.
//!
//! For fixed choice probabilities `sigma`, each player's value vector solves
//! `Xi_i V_i = u_i + L_i C_i(sigma_i)` where
//! `Xi_i = rho_i I + sum_m L_m [I - Sigma_m(sigma_m)] - Q_0`,
//! `L_m` is the diagonal matrix of move rates, `Sigma_m` the state-transition
//! matrix induced by player `m`'s choice probabilities and continuation map,
//! and `C_i` the expected instantaneous payoff inclusive of the conditional
//! shock mean `EULER_MASCHERONI - ln(sigma)`. The matrix is strictly
//! diagonally dominant, hence nonsingular.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::EULER_MASCHERONI;

use super::{CcpTable, Dest, GameSpec};

/// Threshold beyond which the solve switches from dense LU to Gauss-Seidel
/// sweeps on the sparse rows.
const DENSE_LIMIT: usize = 2048;

struct SparseRows {
    diag: Vec<f64>,
    cols: Vec<Vec<usize>>, // 0-based
    vals: Vec<Vec<f64>>,
}

/// Assembles `Xi_i` for `player` (1-based) as sparse rows.
fn xi_rows(spec: &GameSpec, player: usize, ccps: &[CcpTable]) -> SparseRows {
    let k = spec.n_states;
    let rho = spec.players[player - 1].rho;
    let mut diag = vec![rho; k];
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut vals: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut push = |cols: &mut Vec<Vec<usize>>, vals: &mut Vec<Vec<f64>>, diag: &mut Vec<f64>, r: usize, c: usize, v: f64| {
        if r == c {
            diag[r] += v;
        } else if v != 0.0 {
            cols[r].push(c);
            vals[r].push(v);
        }
    };
    // -Q_0
    for s in 1..=k {
        diag[s - 1] += spec.nature.total_rate(s);
        for (l, q) in spec.nature.row(s) {
            push(&mut cols, &mut vals, &mut diag, s - 1, l - 1, -q);
        }
    }
    // sum_m L_m (I - Sigma_m) over players and shadows
    for (ai, t) in ccps.iter().enumerate() {
        let (rates, dests): (&[f64], Vec<Option<&Dest>>) = if ai < spec.players.len() {
            let p = &spec.players[ai];
            (&p.rates, p.choices.iter().map(|c| Some(&c.dest)).collect())
        } else {
            let a = &spec.shadows[ai - spec.players.len()].0;
            (&a.rates, a.dests.iter().map(|_| None).collect())
        };
        for s in 1..=k {
            let rate = rates[s - 1];
            if rate == 0.0 {
                continue;
            }
            diag[s - 1] += rate;
            let probs = t.state_probs(s);
            for (j, p) in probs.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let target = if ai < spec.players.len() {
                    match dests[j].unwrap() {
                        Dest::Stay => Some(s),
                        Dest::State(d) => Some(d[s - 1]),
                        Dest::Terminal => None,
                    }
                } else {
                    Some(spec.shadows[ai - spec.players.len()].0.dests[j][s - 1])
                };
                if let Some(tg) = target {
                    push(&mut cols, &mut vals, &mut diag, s - 1, tg - 1, -rate * p);
                }
            }
        }
    }
    // merge duplicate columns
    for r in 0..k {
        if cols[r].len() > 1 {
            let mut pairs: Vec<(usize, f64)> = cols[r].iter().copied().zip(vals[r].iter().copied()).collect();
            pairs.sort_by_key(|&(c, _)| c);
            let mut mc = Vec::with_capacity(pairs.len());
            let mut mv: Vec<f64> = Vec::with_capacity(pairs.len());
            for (c, v) in pairs {
                if mc.last() == Some(&c) {
                    *mv.last_mut().unwrap() += v;
                } else {
                    mc.push(c);
                    mv.push(v);
                }
            }
            cols[r] = mc;
            vals[r] = mv;
        }
    }
    SparseRows { diag, cols, vals }
}

/// Dense copy of `Xi_i` for `player` (1-based) at the given choice
/// probabilities.
pub fn xi_matrix(spec: &GameSpec, player: usize, ccps: &[CcpTable]) -> Result<DMatrix<f64>> {
    check_player(spec, player)?;
    let rows = xi_rows(spec, player, ccps);
    let k = spec.n_states;
    let mut m = DMatrix::zeros(k, k);
    for r in 0..k {
        m[(r, r)] = rows.diag[r];
        for (c, v) in rows.cols[r].iter().zip(&rows.vals[r]) {
            m[(r, *c)] += *v;
        }
    }
    Ok(m)
}

/// Expected instantaneous payoff vector `C_i(sigma_i)`: per state,
/// `sum_j sigma_j (psi_j + EULER_MASCHERONI - ln sigma_j)`.
fn expected_instant_payoff(spec: &GameSpec, player: usize, ccp: &CcpTable) -> Vec<f64> {
    let p = &spec.players[player - 1];
    let k = spec.n_states;
    let mut c = vec![0.0f64; k];
    for s in 1..=k {
        let probs = ccp.state_probs(s);
        let mut acc = 0.0;
        for (j, choice) in p.choices.iter().enumerate() {
            let pj = probs[j];
            if pj > 0.0 {
                acc += pj * (choice.psi[s - 1] + EULER_MASCHERONI - pj.ln());
            }
        }
        c[s - 1] = acc;
    }
    c
}

/// Solves the linear value representation for every player at fixed choice
/// probabilities. Agrees with the fixed point of value iteration.
pub fn value_linear(spec: &GameSpec, ccps: &[CcpTable]) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if ccps.len() != spec.n_actors() {
        return Err(Error::Dimension(format!(
            "expected {} choice probability tables, got {}",
            spec.n_actors(),
            ccps.len()
        )));
    }
    let mut out = Vec::with_capacity(spec.players.len());
    for pi in 1..=spec.players.len() {
        out.push(solve_player(spec, pi, ccps)?);
    }
    Ok(out)
}

fn check_player(spec: &GameSpec, player: usize) -> Result<()> {
    if player < 1 || player > spec.players.len() {
        return Err(Error::arg(format!("player {player} out of range 1..={}", spec.players.len())));
    }
    Ok(())
}

fn solve_player(spec: &GameSpec, player: usize, ccps: &[CcpTable]) -> Result<Vec<f64>> {
    let k = spec.n_states;
    let p = &spec.players[player - 1];
    let c = expected_instant_payoff(spec, player, &ccps[player - 1]);
    let rhs: Vec<f64> = (0..k).map(|s| p.flow[s] + p.rates[s] * c[s]).collect();
    if k <= DENSE_LIMIT {
        let xi = xi_matrix(spec, player, ccps)?;
        let lu = xi.lu();
        let sol = lu
            .solve(&DVector::from_column_slice(&rhs))
            .ok_or_else(|| Error::Singular("value representation matrix is singular".into()))?;
        Ok(sol.iter().copied().collect())
    } else {
        // Gauss-Seidel on the strictly diagonally dominant rows
        let rows = xi_rows(spec, player, ccps);
        let mut v = vec![0.0f64; k];
        for sweep in 0..100_000 {
            let mut delta: f64 = 0.0;
            for r in 0..k {
                let mut acc = rhs[r];
                for (c, val) in rows.cols[r].iter().zip(&rows.vals[r]) {
                    acc -= val * v[*c];
                }
                let nv = acc / rows.diag[r];
                delta = delta.max((nv - v[r]).abs());
                v[r] = nv;
            }
            if delta < 1e-12 * (1.0 + v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))) {
                return Ok(v);
            }
            if sweep == 99_999 {
                return Err(Error::NoConvergence { iterations: sweep, residual: delta });
            }
        }
        Ok(v)
    }
}

/// Recovers flow payoffs from a value vector and choice probabilities:
/// `u_i = Xi_i(sigma) V_i - L_i C_i(sigma_i)`.
pub fn recover_flow_payoffs(
    spec: &GameSpec,
    player: usize,
    values: &[f64],
    ccps: &[CcpTable],
) -> Result<Vec<f64>> {
    check_player(spec, player)?;
    let k = spec.n_states;
    if values.len() != k {
        return Err(Error::Dimension(format!("value vector must have length {k}")));
    }
    let p = &spec.players[player - 1];
    let c = expected_instant_payoff(spec, player, &ccps[player - 1]);
    let rows = xi_rows(spec, player, ccps);
    let mut u = vec![0.0f64; k];
    for r in 0..k {
        let mut acc = rows.diag[r] * values[r];
        for (col, val) in rows.cols[r].iter().zip(&rows.vals[r]) {
            acc += val * values[*col];
        }
        u[r] = acc - p.rates[r] * c[r];
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{
        ccps_from_values, solve_equilibrium, ChoiceSpec, PlayerSpec, SolveOptions,
    };
    use crate::jumpprocess::IntensityMatrix;

    fn toy_spec() -> GameSpec {
        let nature = IntensityMatrix::from_entries(2, [(1, 2, 0.4), (2, 1, 0.25)]).unwrap();
        GameSpec {
            n_states: 2,
            nature,
            players: vec![PlayerSpec {
                name: "agent".into(),
                rho: 0.08,
                flow: vec![1.2, -0.9],
                rates: vec![0.6, 0.5],
                choices: vec![
                    ChoiceSpec { name: "stay".into(), psi: vec![0.0, 0.0], dest: Dest::Stay },
                    ChoiceSpec { name: "switch".into(), psi: vec![-0.4, -0.1], dest: Dest::State(vec![2, 1]) },
                ],
            }],
            shadows: vec![],
        }
    }

    #[test]
    fn linear_representation_matches_fixed_point() {
        let spec = toy_spec();
        let sol = solve_equilibrium(&spec, &SolveOptions { tol: 1e-14, ..Default::default() }, None).unwrap();
        let lin = value_linear(&spec, &sol.ccps).unwrap();
        for (a, b) in sol.values[0].iter().zip(&lin[0]) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn single_state_value_is_perpetuity() {
        let spec = GameSpec {
            n_states: 1,
            nature: IntensityMatrix::zeros(1),
            players: vec![PlayerSpec {
                name: "agent".into(),
                rho: 0.05,
                flow: vec![3.0],
                rates: vec![0.0],
                choices: vec![ChoiceSpec { name: "continue".into(), psi: vec![0.0], dest: Dest::Stay }],
            }],
            shadows: vec![],
        };
        let ccps = ccps_from_values(&spec, &[vec![0.0]]);
        let v = value_linear(&spec, &ccps).unwrap();
        assert!((v[0][0] - 60.0).abs() < 1e-10);
        // and flow recovery inverts it
        let u = recover_flow_payoffs(&spec, 1, &v[0], &ccps).unwrap();
        assert!((u[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn xi_is_strictly_diagonally_dominant() {
        let spec = toy_spec();
        let sol = solve_equilibrium(&spec, &SolveOptions::default(), None).unwrap();
        let xi = xi_matrix(&spec, 1, &sol.ccps).unwrap();
        for r in 0..2 {
            let off: f64 = (0..2).filter(|&c| c != r).map(|c| xi[(r, c)].abs()).sum();
            assert!(xi[(r, r)].abs() > off, "row {r}: {} <= {off}", xi[(r, r)].abs());
        }
    }

    #[test]
    fn flow_recovery_round_trips_through_equilibrium() {
        let spec = toy_spec();
        let sol = solve_equilibrium(&spec, &SolveOptions { tol: 1e-14, ..Default::default() }, None).unwrap();
        let u = recover_flow_payoffs(&spec, 1, &sol.values[0], &sol.ccps).unwrap();
        assert!((u[0] - 1.2).abs() < 1e-9, "{}", u[0]);
        assert!((u[1] + 0.9).abs() < 1e-9, "{}", u[1]);
    }

    #[test]
    fn translation_of_flow_shifts_values_leaves_ccps() {
        let spec = toy_spec();
        let sol = solve_equilibrium(&spec, &SolveOptions { tol: 1e-15, ..Default::default() }, None).unwrap();
        let mut shifted = spec.clone();
        let c = 5.0;
        for u in shifted.players[0].flow.iter_mut() {
            *u += c;
        }
        let sol2 = solve_equilibrium(&shifted, &SolveOptions { tol: 1e-15, ..Default::default() }, None).unwrap();
        let rho = spec.players[0].rho;
        for s in 0..2 {
            assert!(
                (sol2.values[0][s] - sol.values[0][s] - c / rho).abs() < 1e-7,
                "state {s}: {} vs {}",
                sol2.values[0][s],
                sol.values[0][s] + c / rho
            );
        }
        assert!(sol.ccps[0].sup_distance(&sol2.ccps[0]) < 1e-12);
    }
}
