//! Fixed-point solver: value function iteration on choice probabilities.

use crate::error::{Error, Result};
use crate::jumpprocess::{IntensityMatrix, MoveChannel};
use crate::util::log_sum_exp;
use crate::EULER_MASCHERONI;

use super::{softmax, CcpTable, Dest, GameSpec, ShadowCcp};

/// Options for [`solve_equilibrium`].
///
/// Convergence requires both the sup-norm change in choice probabilities and
/// the relative sup-norm change in value functions to fall below `tol`;
/// choice probabilities depend only on value differences and settle long
/// before value levels do.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Sup-norm tolerance on per-iteration changes.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation factor in `(0, 1]`; `1` is plain successive approximation.
    pub relaxation: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-13, max_iter: 500_000, relaxation: 1.0 }
    }
}

/// A solved equilibrium: value vectors per player, choice probabilities and
/// hazards per actor (players first, shadows after), and the aggregate
/// intensity matrix implied by nature plus all visible moves.
#[derive(Clone, Debug)]
pub struct EquilibriumSolution {
    pub values: Vec<Vec<f64>>,
    pub ccps: Vec<CcpTable>,
    /// `hazards[a].prob(j, k)` holds `rate_a(k) * sigma_a(j | k)`.
    pub hazards: Vec<CcpTable>,
    pub aggregate: IntensityMatrix,
    pub iterations: usize,
    /// Sup-norm of the last change in choice probabilities.
    pub residual: f64,
    /// Relative sup-norm of the last change in value functions.
    pub value_residual: f64,
}

impl EquilibriumSolution {
    /// Labeled state-changing move streams (for simulation attribution and
    /// event likelihoods). Choice 0 and invisible self-transitions carry no
    /// channel.
    pub fn move_channels(&self, spec: &GameSpec) -> Vec<MoveChannel> {
        move_channels(spec, &self.ccps)
    }
}

/// Computes every actor's choice probabilities from value functions.
/// Players come first (logit best responses over their own choices), then
/// shadows (mirrored or logit-derived).
pub fn ccps_from_values(spec: &GameSpec, values: &[Vec<f64>]) -> Vec<CcpTable> {
    let k = spec.n_states;
    let mut out: Vec<CcpTable> = Vec::with_capacity(spec.n_actors());
    for (pi, p) in spec.players.iter().enumerate() {
        let v = &values[pi];
        let nj = p.choices.len();
        let mut t = CcpTable::new(nj, k);
        let mut w = vec![0.0f64; nj];
        for s in 1..=k {
            for (j, c) in p.choices.iter().enumerate() {
                w[j] = c.psi[s - 1]
                    + match &c.dest {
                        Dest::Stay => v[s - 1],
                        Dest::State(d) => v[d[s - 1] - 1],
                        Dest::Terminal => 0.0,
                    };
            }
            t.state_probs_mut(s).copy_from_slice(&softmax(&w));
        }
        out.push(t);
    }
    for (a, ccp) in &spec.shadows {
        let nj = a.dests.len();
        let mut t = CcpTable::new(nj, k);
        match ccp {
            ShadowCcp::Mirror { player, state_map } => {
                let src = &out[player - 1];
                for s in 1..=k {
                    let mapped = state_map[s - 1];
                    let probs = src.state_probs(mapped).to_vec();
                    t.state_probs_mut(s).copy_from_slice(&probs);
                }
            }
            ShadowCcp::Logit { player, psi, cont } => {
                let v = &values[player - 1];
                let mut w = vec![0.0f64; nj];
                for s in 1..=k {
                    for j in 0..nj {
                        w[j] = psi[j][s - 1] + cont[j][s - 1].map_or(0.0, |c| v[c - 1]);
                    }
                    t.state_probs_mut(s).copy_from_slice(&softmax(&w));
                }
            }
        }
        out.push(t);
    }
    out
}

/// One Jacobi sweep of the value recursion for every player, holding the
/// supplied beliefs (choice probabilities of all actors) fixed.
pub fn bellman_apply(spec: &GameSpec, ccps: &[CcpTable], values: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = spec.n_states;
    let n_players = spec.players.len();
    let mut out = Vec::with_capacity(n_players);
    for (pi, p) in spec.players.iter().enumerate() {
        let v = &values[pi];
        let mut vn = vec![0.0f64; k];
        let mut w: Vec<f64> = Vec::with_capacity(p.choices.len());
        for s in 1..=k {
            let mut denom = p.rho + spec.nature.total_rate(s);
            let mut num = p.flow[s - 1];
            for (l, q) in spec.nature.row(s) {
                num += q * v[l - 1];
            }
            // rival players
            for (mi, m) in spec.players.iter().enumerate() {
                let rate = m.rates[s - 1];
                if mi == pi {
                    denom += rate;
                    continue;
                }
                denom += rate;
                if rate > 0.0 {
                    let probs = ccps[mi].state_probs(s);
                    let mut cont = 0.0;
                    for (j, c) in m.choices.iter().enumerate() {
                        let tgt = match &c.dest {
                            Dest::Stay => s,
                            Dest::State(d) => d[s - 1],
                            // validation rejects rival terminals in
                            // multi-player specs
                            Dest::Terminal => s,
                        };
                        cont += probs[j] * v[tgt - 1];
                    }
                    num += rate * cont;
                }
            }
            // shadow actors
            for (ai, (a, _)) in spec.shadows.iter().enumerate() {
                let rate = a.rates[s - 1];
                denom += rate;
                if rate > 0.0 {
                    let probs = ccps[n_players + ai].state_probs(s);
                    let mut cont = 0.0;
                    for (j, d) in a.dests.iter().enumerate() {
                        cont += probs[j] * v[d[s - 1] - 1];
                    }
                    num += rate * cont;
                }
            }
            // own expected maximum
            let own_rate = p.rates[s - 1];
            if own_rate > 0.0 {
                w.clear();
                for c in &p.choices {
                    w.push(
                        c.psi[s - 1]
                            + match &c.dest {
                                Dest::Stay => v[s - 1],
                                Dest::State(d) => v[d[s - 1] - 1],
                                Dest::Terminal => 0.0,
                            },
                    );
                }
                num += own_rate * (EULER_MASCHERONI + log_sum_exp(&w));
            }
            vn[s - 1] = num / denom;
        }
        out.push(vn);
    }
    out
}

/// Iterates best responses and value sweeps until choice probabilities
/// change by less than `opts.tol` in sup norm.
///
/// Returns the equilibrium reached from the given start (`warm_start` or
/// zero values); no equilibrium enumeration is attempted. When the iteration
/// reaches a floating-point fixed point whose residual no longer decreases
/// but sits within a few ulps of zero, it is accepted as converged.
pub fn solve_equilibrium(
    spec: &GameSpec,
    opts: &SolveOptions,
    warm_start: Option<&[Vec<f64>]>,
) -> Result<EquilibriumSolution> {
    spec.validate()?;
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::arg(format!("relaxation must be in (0, 1], got {}", opts.relaxation)));
    }
    let k = spec.n_states;
    let mut values: Vec<Vec<f64>> = match warm_start {
        Some(v) => {
            if v.len() != spec.players.len() || v.iter().any(|x| x.len() != k) {
                return Err(Error::Dimension("warm start must supply one K-vector per player".into()));
            }
            v.to_vec()
        }
        None => vec![vec![0.0; k]; spec.players.len()],
    };
    let mut ccps = ccps_from_values(spec, &values);
    let mut residual = f64::INFINITY;
    let mut value_residual = f64::INFINITY;
    let mut prev_combined = f64::INFINITY;
    let stall_floor = 64.0 * f64::EPSILON;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let swept = bellman_apply(spec, &ccps, &values);
        let mut scale: f64 = 1.0;
        let mut dv: f64 = 0.0;
        for (v, s) in values.iter().zip(&swept) {
            for (a, b) in v.iter().zip(s) {
                scale = scale.max(a.abs());
                dv = dv.max((b - a).abs());
            }
        }
        value_residual = dv / scale;
        if opts.relaxation < 1.0 {
            for (v, s) in values.iter_mut().zip(&swept) {
                for (a, b) in v.iter_mut().zip(s) {
                    *a += opts.relaxation * (b - *a);
                }
            }
        } else {
            values = swept;
        }
        let next = ccps_from_values(spec, &values);
        residual = ccps
            .iter()
            .zip(&next)
            .map(|(a, b)| a.sup_distance(b))
            .fold(0.0, f64::max);
        ccps = next;
        let combined = residual.max(value_residual);
        if combined <= opts.tol {
            break;
        }
        if it > 16 && combined < stall_floor && combined >= prev_combined {
            // floating-point fixed point, cannot tighten further
            break;
        }
        prev_combined = combined;
        if it == opts.max_iter {
            return Err(Error::NoConvergence { iterations: it, residual: combined });
        }
    }
    let hazards = hazard_tables(spec, &ccps);
    let aggregate = assemble_aggregate(spec, &ccps)?;
    Ok(EquilibriumSolution { values, ccps, hazards, aggregate, iterations, residual, value_residual })
}

fn hazard_tables(spec: &GameSpec, ccps: &[CcpTable]) -> Vec<CcpTable> {
    let k = spec.n_states;
    let mut out = Vec::with_capacity(ccps.len());
    for (ai, t) in ccps.iter().enumerate() {
        let rates: &[f64] = if ai < spec.players.len() {
            &spec.players[ai].rates
        } else {
            &spec.shadows[ai - spec.players.len()].0.rates
        };
        let mut h = CcpTable::new(t.n_choices(), k);
        for s in 1..=k {
            let probs = t.state_probs(s).to_vec();
            let hs = h.state_probs_mut(s);
            for (j, p) in probs.iter().enumerate() {
                hs[j] = rates[s - 1] * p;
            }
        }
        out.push(h);
    }
    out
}

/// Builds the labeled move channels implied by the spec and a set of choice
/// probabilities. Only state-changing choices appear.
pub(crate) fn move_channels(spec: &GameSpec, ccps: &[CcpTable]) -> Vec<MoveChannel> {
    let k = spec.n_states;
    let mut channels = Vec::new();
    for (pi, p) in spec.players.iter().enumerate() {
        for (j, c) in p.choices.iter().enumerate() {
            let Dest::State(d) = &c.dest else { continue };
            let mut rates = vec![0.0f64; k];
            let mut dest = vec![None; k];
            let mut any = false;
            for s in 1..=k {
                if d[s - 1] != s {
                    rates[s - 1] = p.rates[s - 1] * ccps[pi].prob(j, s);
                    dest[s - 1] = Some(d[s - 1]);
                    any = true;
                }
            }
            if any {
                channels.push(MoveChannel { player: pi + 1, action: j, rates, dest });
            }
        }
    }
    for (ai, (a, _)) in spec.shadows.iter().enumerate() {
        for (j, d) in a.dests.iter().enumerate() {
            let mut rates = vec![0.0f64; k];
            let mut dest = vec![None; k];
            let mut any = false;
            for s in 1..=k {
                if d[s - 1] != s {
                    rates[s - 1] = a.rates[s - 1] * ccps[spec.players.len() + ai].prob(j, s);
                    dest[s - 1] = Some(d[s - 1]);
                    any = true;
                }
            }
            if any {
                channels.push(MoveChannel { player: a.label, action: j, rates, dest });
            }
        }
    }
    channels
}

fn assemble_aggregate(spec: &GameSpec, ccps: &[CcpTable]) -> Result<IntensityMatrix> {
    let mut q = IntensityMatrix::zeros(spec.n_states);
    for (r, c, rate) in spec.nature.entries() {
        q.add(r, c, rate)?;
    }
    for ch in move_channels(spec, ccps) {
        for s in 1..=spec.n_states {
            if let Some(t) = ch.dest[s - 1] {
                if ch.rates[s - 1] > 0.0 {
                    q.add(s, t, ch.rates[s - 1])?;
                }
            }
        }
    }
    Ok(q)
}

/// A least-recently-used cache of `(parameter point, value functions)` pairs
/// for warm-starting repeated solves along an optimizer path. Lookup returns
/// the entry nearest in Euclidean distance.
#[derive(Clone, Debug)]
pub struct WarmCache {
    cap: usize,
    stamp: u64,
    entries: Vec<(Vec<f64>, Vec<Vec<f64>>, u64)>,
}

impl WarmCache {
    pub fn new(cap: usize) -> Self {
        WarmCache { cap: cap.max(1), stamp: 0, entries: Vec::new() }
    }

    /// Cache sized per the estimation default (100 entries).
    pub fn standard() -> Self {
        WarmCache::new(100)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Values stored for the parameter point nearest to `key`.
    pub fn nearest(&mut self, key: &[f64]) -> Option<Vec<Vec<f64>>> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (k, _, _)) in self.entries.iter().enumerate() {
            if k.len() != key.len() {
                continue;
            }
            let d: f64 = k.iter().zip(key).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best?;
        self.stamp += 1;
        self.entries[i].2 = self.stamp;
        Some(self.entries[i].1.clone())
    }

    pub fn insert(&mut self, key: Vec<f64>, values: Vec<Vec<f64>>) {
        self.stamp += 1;
        if let Some(e) = self.entries.iter_mut().find(|(k, _, _)| *k == key) {
            e.1 = values;
            e.2 = self.stamp;
            return;
        }
        if self.entries.len() >= self.cap {
            if let Some(i) = self
                .entries
                .iter()
                .enumerate()
                .min_by_key(|(_, (_, _, used))| *used)
                .map(|(i, _)| i)
            {
                self.entries.swap_remove(i);
            }
        }
        self.entries.push((key, values, self.stamp));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{ChoiceSpec, PlayerSpec};

    fn single_state_perpetuity(u: f64, rho: f64) -> GameSpec {
        GameSpec {
            n_states: 1,
            nature: IntensityMatrix::zeros(1),
            players: vec![PlayerSpec {
                name: "agent".into(),
                rho,
                flow: vec![u],
                rates: vec![0.0],
                choices: vec![ChoiceSpec { name: "continue".into(), psi: vec![0.0], dest: Dest::Stay }],
            }],
            shadows: vec![],
        }
    }

    #[test]
    fn perpetuity_value() {
        let spec = single_state_perpetuity(2.5, 0.05);
        let sol = solve_equilibrium(&spec, &SolveOptions::default(), None).unwrap();
        assert!((sol.values[0][0] - 2.5 / 0.05).abs() < 1e-9, "got {}", sol.values[0][0]);
    }

    /// Two-state single-agent toy with a binary choice; the fixed point must
    /// match a hand-built solve of the linear value representation.
    #[test]
    fn two_state_toy_matches_direct_linear_solve() {
        let gamma = 0.4;
        let (rho, lam) = (0.1, 0.7);
        let (u1, u2) = (1.0, -0.5);
        let psi_move = -0.3;
        let nature = IntensityMatrix::from_entries(2, [(1, 2, gamma), (2, 1, gamma)]).unwrap();
        // action 1 toggles the state
        let spec = GameSpec {
            n_states: 2,
            nature,
            players: vec![PlayerSpec {
                name: "agent".into(),
                rho,
                flow: vec![u1, u2],
                rates: vec![lam, lam],
                choices: vec![
                    ChoiceSpec { name: "stay".into(), psi: vec![0.0, 0.0], dest: Dest::Stay },
                    ChoiceSpec { name: "switch".into(), psi: vec![psi_move, psi_move], dest: Dest::State(vec![2, 1]) },
                ],
            }],
            shadows: vec![],
        };
        let sol = solve_equilibrium(&spec, &SolveOptions { tol: 1e-14, ..Default::default() }, None).unwrap();
        // independent 2x2 solve of (rho I + L(I - Sigma) - Q0) V = u + L C at
        // the solved choice probabilities
        let s = &sol.ccps[0];
        let (p11, p12) = (s.prob(0, 1), s.prob(1, 1));
        let (p21, p22) = (s.prob(0, 2), s.prob(1, 2));
        let a11 = rho + lam * (1.0 - p11) + gamma;
        let a12 = -lam * p12 - gamma;
        let a21 = -lam * p22 - gamma;
        let a22 = rho + lam * (1.0 - p21) + gamma;
        let c1 = p11 * (crate::EULER_MASCHERONI - p11.ln()) + p12 * (psi_move + crate::EULER_MASCHERONI - p12.ln());
        let c2 = p21 * (crate::EULER_MASCHERONI - p21.ln()) + p22 * (psi_move + crate::EULER_MASCHERONI - p22.ln());
        let b1 = u1 + lam * c1;
        let b2 = u2 + lam * c2;
        let det = a11 * a22 - a12 * a21;
        let v1 = (b1 * a22 - a12 * b2) / det;
        let v2 = (a11 * b2 - b1 * a21) / det;
        assert!((sol.values[0][0] - v1).abs() < 1e-9, "{} vs {v1}", sol.values[0][0]);
        assert!((sol.values[0][1] - v2).abs() < 1e-9, "{} vs {v2}", sol.values[0][1]);
        // aggregate matrix carries the switch hazards
        assert!((sol.aggregate.rate(1, 2) - (gamma + lam * p12)).abs() < 1e-12);
        assert!((sol.aggregate.rate(2, 1) - (gamma + lam * p22)).abs() < 1e-12);
    }

    #[test]
    fn ccp_rows_sum_to_one() {
        let spec = single_state_perpetuity(1.0, 0.1);
        let sol = solve_equilibrium(&spec, &SolveOptions::default(), None).unwrap();
        let sum: f64 = sol.ccps[0].state_probs(1).iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn warm_cache_returns_nearest_and_evicts_lru() {
        let mut c = WarmCache::new(2);
        c.insert(vec![0.0], vec![vec![1.0]]);
        c.insert(vec![10.0], vec![vec![2.0]]);
        assert_eq!(c.nearest(&[9.0]).unwrap()[0][0], 2.0);
        // inserting a third point evicts the least recently used ([0.0])
        c.insert(vec![20.0], vec![vec![3.0]]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.nearest(&[0.0]).unwrap()[0][0], 2.0); // 10.0 is now nearest
    }
}
