//! Exact trajectory simulation and discrete-time sampling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::statespace::ContinuationMap;

use super::IntensityMatrix;

/// One event of a continuous-time trajectory: the holding time since the
/// previous event and the labeled transition. `player == 0` denotes nature
/// (with `action == 0`); unattributed simulations label every event with
/// `player == 0, action == 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRecord {
    pub tau: f64,
    pub player: usize,
    pub action: usize,
    pub state: usize,
    pub next_state: usize,
}

/// A labeled stream of state-changing moves: for each state the hazard of
/// `(player, action)` firing and the destination (`None` when the action
/// does not change the state and is therefore invisible in the jump process).
#[derive(Clone, Debug)]
pub struct MoveChannel {
    pub player: usize,
    pub action: usize,
    pub rates: Vec<f64>,
    pub dest: Vec<Option<usize>>,
}

impl MoveChannel {
    /// Builds one channel per (player, action >= 1) from a continuation map
    /// and per-player per-choice hazards `hazards[i-1][j][k-1]`.
    pub fn from_hazards(map: &ContinuationMap, hazards: &[Vec<Vec<f64>>]) -> Result<Vec<MoveChannel>> {
        if hazards.len() != map.n_players() {
            return Err(Error::Dimension(format!(
                "hazards cover {} players, map has {}",
                hazards.len(),
                map.n_players()
            )));
        }
        let k = map.n_states();
        let mut channels = Vec::new();
        for (pi, per_choice) in hazards.iter().enumerate() {
            let player = pi + 1;
            if per_choice.len() != map.n_choices() {
                return Err(Error::Dimension(format!(
                    "player {player} hazards cover {} choices, map has {}",
                    per_choice.len(),
                    map.n_choices()
                )));
            }
            for (j, h) in per_choice.iter().enumerate().skip(1) {
                if h.len() != k {
                    return Err(Error::Dimension(format!(
                        "player {player} choice {j} hazards cover {} states, map has {k}",
                        h.len()
                    )));
                }
                let mut dest = Vec::with_capacity(k);
                for s in 1..=k {
                    let t = map.target(player, j, s)?;
                    dest.push(if t == s { None } else { Some(t) });
                }
                channels.push(MoveChannel { player, action: j, rates: h.clone(), dest });
            }
        }
        Ok(channels)
    }
}

/// Attribution source for labeling simulated transitions.
#[derive(Clone, Copy, Debug)]
pub enum Attribution<'a> {
    /// Label all events as nature.
    None,
    /// Split each transition between nature (`q0`) and the labeled move
    /// channels, proportionally to their hazard contributions.
    Channels { nature: &'a IntensityMatrix, channels: &'a [MoveChannel] },
}

/// Stopping rule for a simulated trajectory.
#[derive(Clone, Copy, Debug)]
pub enum SimStop {
    /// Observe the window `[0, T]`; the trailing spell is censored at `T`.
    Time(f64),
    /// Stop after recording this many events.
    Events(usize),
}

/// Samples a trajectory of the jump process `q` started from `k0`, labeling
/// transitions via `attribution`. Holding times are exponential with rate
/// `-q_kk`; reaching an absorbing state ends the trajectory with a censored
/// final spell. Deterministic given `(q, k0, stop, seed)`.
pub fn simulate(
    q: &IntensityMatrix,
    k0: usize,
    stop: SimStop,
    seed: u64,
    attribution: Attribution<'_>,
) -> Result<Vec<EventRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(q, k0, stop, &mut rng, attribution)
}

/// [`simulate`] with a caller-managed generator.
pub fn simulate_with_rng<R: Rng>(
    q: &IntensityMatrix,
    k0: usize,
    stop: SimStop,
    rng: &mut R,
    attribution: Attribution<'_>,
) -> Result<Vec<EventRecord>> {
    let k = q.dim();
    if k0 < 1 || k0 > k {
        return Err(Error::arg(format!("initial state {k0} out of range 1..={k}")));
    }
    if let SimStop::Time(t) = stop {
        if !(t >= 0.0) {
            return Err(Error::arg(format!("horizon must be >= 0, got {t}")));
        }
    }
    let mut events = Vec::new();
    let mut state = k0;
    let mut t = 0.0;
    loop {
        match stop {
            SimStop::Time(horizon) if t >= horizon => break,
            SimStop::Events(n) if events.len() >= n => break,
            _ => {}
        }
        let total = q.total_rate(state);
        if total <= 0.0 {
            break; // absorbing: censored final spell
        }
        let u: f64 = rng.random();
        let tau = -u.max(f64::MIN_POSITIVE).ln() / total;
        if let SimStop::Time(horizon) = stop {
            if t + tau > horizon {
                break;
            }
        }
        t += tau;
        // draw destination proportional to hazards
        let mut draw: f64 = rng.random::<f64>() * total;
        let mut next = state;
        for (c, rate) in q.row(state) {
            draw -= rate;
            if draw <= 0.0 {
                next = c;
                break;
            }
        }
        if next == state {
            // guard against floating roundoff leaving `draw` slightly positive
            next = q.row(state).last().map(|(c, _)| c).unwrap_or(state);
        }
        let (player, action) = label_transition(state, next, &attribution, rng)?;
        events.push(EventRecord { tau, player, action, state, next_state: next });
        state = next;
    }
    Ok(events)
}

fn label_transition<R: Rng>(
    from: usize,
    to: usize,
    attribution: &Attribution<'_>,
    rng: &mut R,
) -> Result<(usize, usize)> {
    match attribution {
        Attribution::None => Ok((0, 0)),
        Attribution::Channels { nature, channels } => {
            let mut contributors: Vec<(usize, usize, f64)> = Vec::new();
            let qn = nature.rate(from, to);
            if qn > 0.0 {
                contributors.push((0, 0, qn));
            }
            for ch in channels.iter() {
                if ch.dest[from - 1] == Some(to) && ch.rates[from - 1] > 0.0 {
                    contributors.push((ch.player, ch.action, ch.rates[from - 1]));
                }
            }
            match contributors.len() {
                0 => Err(Error::Attribution(format!(
                    "transition ({from},{to}) has no contributing mover"
                ))),
                1 => Ok((contributors[0].0, contributors[0].1)),
                _ => {
                    let total: f64 = contributors.iter().map(|c| c.2).sum();
                    let mut draw: f64 = rng.random::<f64>() * total;
                    for &(p, a, r) in &contributors {
                        draw -= r;
                        if draw <= 0.0 {
                            return Ok((p, a));
                        }
                    }
                    let last = contributors.last().unwrap();
                    Ok((last.0, last.1))
                }
            }
        }
    }
}

/// States of the right-continuous trajectory at times `0, delta, 2 delta, ..,
/// floor(T / delta) * delta`.
pub fn sample_discrete(events: &[EventRecord], k0: usize, delta: f64, horizon: f64) -> Result<Vec<usize>> {
    if !(delta > 0.0) {
        return Err(Error::arg(format!("delta must be > 0, got {delta}")));
    }
    if !(horizon >= 0.0) {
        return Err(Error::arg(format!("horizon must be >= 0, got {horizon}")));
    }
    for e in events {
        if !(e.tau > 0.0) {
            return Err(Error::Data(format!(
                "events must carry positive holding times (found tau = {})",
                e.tau
            )));
        }
    }
    let n = (horizon / delta + 1e-12).floor() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut state = k0;
    let mut ev = events.iter().peekable();
    let mut t_event = 0.0;
    for i in 0..=n {
        let t = i as f64 * delta;
        while let Some(e) = ev.peek() {
            if t_event + e.tau <= t {
                t_event += e.tau;
                state = e.next_state;
                ev.next();
            } else {
                break;
            }
        }
        out.push(state);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_yields_empty_event_list() {
        let q = IntensityMatrix::zeros(4);
        let ev = simulate(&q, 2, SimStop::Time(10.0), 1, Attribution::None).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn simulation_is_deterministic_in_seed() {
        let q = IntensityMatrix::from_entries(2, [(1, 2, 0.3), (2, 1, 0.7)]).unwrap();
        let a = simulate(&q, 1, SimStop::Time(50.0), 99, Attribution::None).unwrap();
        let b = simulate(&q, 1, SimStop::Time(50.0), 99, Attribution::None).unwrap();
        let c = simulate(&q, 1, SimStop::Time(50.0), 100, Attribution::None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn holding_times_have_the_right_mean() {
        let (a, b) = (0.3, 0.7);
        let q = IntensityMatrix::from_entries(2, [(1, 2, a), (2, 1, b)]).unwrap();
        let ev = simulate(&q, 1, SimStop::Time(10_000.0), 5, Attribution::None).unwrap();
        let spells1: Vec<f64> = ev.iter().filter(|e| e.state == 1).map(|e| e.tau).collect();
        let n = spells1.len() as f64;
        let mean = spells1.iter().sum::<f64>() / n;
        let se = (1.0 / a) / n.sqrt(); // exponential sd = mean
        assert!(
            (mean - 1.0 / a).abs() < 3.0 * se,
            "mean {mean}, expected {} +- {se}",
            1.0 / a
        );
    }

    #[test]
    fn event_count_stop_rule() {
        let q = IntensityMatrix::from_entries(2, [(1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let ev = simulate(&q, 1, SimStop::Events(250), 3, Attribution::None).unwrap();
        assert_eq!(ev.len(), 250);
    }

    #[test]
    fn attribution_labels_movers_by_hazard_share() {
        // state 1: nature moves to 2 at 0.5; player 1 action 1 also moves to 2 at 1.5
        let nature = IntensityMatrix::from_entries(2, [(1, 2, 0.5), (2, 1, 1.0)]).unwrap();
        let channels = vec![MoveChannel {
            player: 1,
            action: 1,
            rates: vec![1.5, 0.0],
            dest: vec![Some(2), None],
        }];
        let q = IntensityMatrix::from_entries(2, [(1, 2, 2.0), (2, 1, 1.0)]).unwrap();
        let ev = simulate(
            &q,
            1,
            SimStop::Events(4000),
            17,
            Attribution::Channels { nature: &nature, channels: &channels },
        )
        .unwrap();
        let moves: Vec<_> = ev.iter().filter(|e| e.state == 1).collect();
        let frac_player = moves.iter().filter(|e| e.player == 1).count() as f64 / moves.len() as f64;
        assert!((frac_player - 0.75).abs() < 0.05, "player share {frac_player}");
        assert!(ev.iter().filter(|e| e.state == 2).all(|e| e.player == 0));
    }

    #[test]
    fn sample_discrete_interpolates_piecewise_constant() {
        // no events: constant path
        assert_eq!(sample_discrete(&[], 5, 1.0, 3.0).unwrap(), vec![5, 5, 5, 5]);
        // single event at t = 1.5 moving 1 -> 2
        let ev = [EventRecord { tau: 1.5, player: 0, action: 0, state: 1, next_state: 2 }];
        assert_eq!(sample_discrete(&ev, 1, 1.0, 3.0).unwrap(), vec![1, 1, 2, 2]);
    }

    #[test]
    fn sample_discrete_rejects_bad_holding_times() {
        let ev = [EventRecord { tau: 0.0, player: 0, action: 0, state: 1, next_state: 2 }];
        assert!(matches!(sample_discrete(&ev, 1, 1.0, 3.0), Err(Error::Data(_))));
    }
}
