//! Encoded state spaces and continuation-state maps.
//!
//! Every model works on an encoded state space `{1, .., K}`. Product spaces
//! carry a factor structure (one exogenous component plus one component per
//! player); the quality ladder uses an anonymous encoding over own quality
//! and the distribution of rivals across quality levels.
//!
//! Index conventions (stable across runs, used by all file formats):
//! - product spaces: the exogenous factor is outermost (slowest varying) and
//!   player components follow with player 1 innermost (fastest varying);
//! - anonymous ladder spaces: rival configurations are enumerated in
//!   colexicographic order and own quality is innermost.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A factor of a product-form state space.
#[derive(Clone, Debug)]
pub struct Factor {
    pub name: String,
    pub cardinality: usize,
}

/// An encoded finite state space with product-factor structure.
///
/// States are indexed `1..=K`. `decode` maps a state index to the tuple of
/// 1-based factor values `[x0, x1, .., xN]` (exogenous component first).
#[derive(Clone, Debug)]
pub struct StateSpace {
    factors: Vec<Factor>,
    k: usize,
}

impl StateSpace {
    /// Builds a product space with an exogenous component of `k0` values and
    /// `n_players` player components of `k1` values each, so `K = k0 * k1^N`.
    pub fn product(k0: usize, k1: usize, n_players: usize) -> Result<Self> {
        if k0 < 1 || k1 < 1 || n_players < 1 {
            return Err(Error::arg(format!(
                "product space requires k0 >= 1, k1 >= 1, n_players >= 1 (got {k0}, {k1}, {n_players})"
            )));
        }
        let mut k: usize = k0;
        for _ in 0..n_players {
            k = k
                .checked_mul(k1)
                .ok_or_else(|| Error::Sizing(format!("k0={k0}, k1={k1}, n={n_players} overflows the index range")))?;
        }
        let mut factors = vec![Factor { name: "exogenous".into(), cardinality: k0 }];
        for i in 1..=n_players {
            factors.push(Factor { name: format!("player{i}"), cardinality: k1 });
        }
        Ok(StateSpace { factors, k })
    }

    /// Builds a space from explicit factors (exogenous first).
    pub fn from_factors(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.cardinality < 1) {
            return Err(Error::arg("factors must be nonempty with positive cardinalities"));
        }
        let mut k: usize = 1;
        for f in &factors {
            k = k
                .checked_mul(f.cardinality)
                .ok_or_else(|| Error::Sizing("factor product overflows the index range".into()))?;
        }
        Ok(StateSpace { factors, k })
    }

    /// Number of encoded states `K`.
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Number of player components.
    pub fn n_players(&self) -> usize {
        self.factors.len() - 1
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Stride of factor `f` in the linear index (factor 0 is the exogenous
    /// component; factors are listed exogenous-first but player 1 varies
    /// fastest).
    fn stride(&self, f: usize) -> usize {
        let n = self.factors.len();
        // order of increasing stride: factor n-1? No: player 1 (factors[1])
        // is fastest, player N next, exogenous (factors[0]) slowest.
        let mut s = 1;
        if f == 0 {
            for g in 1..n {
                s *= self.factors[g].cardinality;
            }
            return s;
        }
        for g in 1..f {
            s *= self.factors[g].cardinality;
        }
        s
    }

    /// Decodes a 1-based state index into 1-based factor values
    /// `[x0, x1, .., xN]`.
    pub fn decode(&self, state: usize) -> Result<Vec<usize>> {
        if state < 1 || state > self.k {
            return Err(Error::arg(format!("state {state} out of range 1..={}", self.k)));
        }
        let mut rem = state - 1;
        let n = self.factors.len();
        let mut out = vec![0usize; n];
        // exogenous component has the largest stride
        let s0 = self.stride(0);
        out[0] = rem / s0 + 1;
        rem %= s0;
        for f in (1..n).rev() {
            let s = self.stride(f);
            out[f] = rem / s + 1;
            rem %= s;
        }
        Ok(out)
    }

    /// Encodes 1-based factor values into the 1-based state index.
    pub fn encode(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.factors.len() {
            return Err(Error::Dimension(format!(
                "tuple has {} components, space has {}",
                tuple.len(),
                self.factors.len()
            )));
        }
        let mut idx = 0usize;
        for (f, (&x, fac)) in tuple.iter().zip(&self.factors).enumerate() {
            if x < 1 || x > fac.cardinality {
                return Err(Error::arg(format!(
                    "component {f} value {x} out of range 1..={}",
                    fac.cardinality
                )));
            }
            idx += (x - 1) * self.stride(f);
        }
        Ok(idx + 1)
    }
}

/// Deterministic continuation-state map `l(i, j, k)`.
///
/// Players are 1-based (0 is reserved for nature); choices are 0-based with
/// `j = 0` the costless continuation; states are 1-based. Construction
/// validates that `l(i, 0, k) = k` always, and that continuation states are
/// distinct across choices. [`ContinuationMap::with_self_resets`] relaxes
/// distinctness for non-continuation choices whose target coincides with the
/// current state (for example a renewal action taken in the reset state);
/// such actions produce no observable state change.
#[derive(Clone, Debug)]
pub struct ContinuationMap {
    n_players: usize,
    n_choices: usize,
    n_states: usize,
    // target[(i-1) * n_choices * n_states + j * n_states + (k-1)], 1-based targets
    target: Vec<usize>,
}

impl ContinuationMap {
    pub fn new<F>(n_players: usize, n_choices: usize, n_states: usize, l: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> usize,
    {
        Self::build(n_players, n_choices, n_states, l, false)
    }

    /// Like [`ContinuationMap::new`] but permits `l(i, j, k) = k` for `j >= 1`
    /// (an unobservable self-reset).
    pub fn with_self_resets<F>(n_players: usize, n_choices: usize, n_states: usize, l: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> usize,
    {
        Self::build(n_players, n_choices, n_states, l, true)
    }

    fn build<F>(n_players: usize, n_choices: usize, n_states: usize, l: F, allow_self: bool) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> usize,
    {
        if n_players < 1 || n_choices < 1 || n_states < 1 {
            return Err(Error::arg("continuation map requires positive players, choices, states"));
        }
        let mut target = vec![0usize; n_players * n_choices * n_states];
        for i in 1..=n_players {
            for k in 1..=n_states {
                let mut seen: Vec<usize> = Vec::with_capacity(n_choices);
                for j in 0..n_choices {
                    let t = l(i, j, k);
                    if t < 1 || t > n_states {
                        return Err(Error::arg(format!(
                            "l({i},{j},{k}) = {t} out of range 1..={n_states}"
                        )));
                    }
                    if j == 0 && t != k {
                        return Err(Error::arg(format!(
                            "continuation choice must not move the state: l({i},0,{k}) = {t}"
                        )));
                    }
                    if j > 0 {
                        let clash = seen.contains(&t);
                        if clash && !(allow_self && t == k) {
                            return Err(Error::arg(format!(
                                "choices must have distinct continuation states: l({i},{j},{k}) = {t} duplicates another choice"
                            )));
                        }
                    }
                    seen.push(t);
                    target[(i - 1) * n_choices * n_states + j * n_states + (k - 1)] = t;
                }
            }
        }
        Ok(ContinuationMap { n_players, n_choices, n_states, target })
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_choices(&self) -> usize {
        self.n_choices
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Continuation state `l(i, j, k)`; pure and total over valid indices.
    pub fn target(&self, player: usize, choice: usize, state: usize) -> Result<usize> {
        if player < 1 || player > self.n_players {
            return Err(Error::arg(format!("player {player} out of range 1..={}", self.n_players)));
        }
        if choice >= self.n_choices {
            return Err(Error::arg(format!("choice {choice} out of range 0..{}", self.n_choices)));
        }
        if state < 1 || state > self.n_states {
            return Err(Error::arg(format!("state {state} out of range 1..={}", self.n_states)));
        }
        Ok(self.target[(player - 1) * self.n_choices * self.n_states + choice * self.n_states + (state - 1)])
    }
}

/// Convenience wrapper matching the operation name in module docs.
pub fn continuation_state(map: &ContinuationMap, player: usize, choice: usize, state: usize) -> Result<usize> {
    map.target(player, choice, state)
}

/// Enumeration of nonnegative integer tuples with a fixed length and sum, in
/// colexicographic order (later positions most significant). Used for rival
/// configurations (sum `N-1`) and whole-market configurations (sum `N`).
#[derive(Clone, Debug)]
pub struct TupleSpace {
    bins: usize,
    total: usize,
    tuples: Vec<Vec<u8>>,
    rank: HashMap<Vec<u8>, usize>,
}

impl TupleSpace {
    pub fn new(bins: usize, total: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::arg("tuple space requires at least one bin"));
        }
        if total > u8::MAX as usize {
            return Err(Error::Sizing("tuple totals above 255 are not supported".into()));
        }
        let mut tuples = Vec::new();
        let mut cur = vec![0u8; bins];
        gen_colex(bins, total, &mut cur, &mut tuples);
        let rank: HashMap<Vec<u8>, usize> =
            tuples.iter().enumerate().map(|(r, t)| (t.clone(), r)).collect();
        Ok(TupleSpace { bins, total, tuples, rank })
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// 0-based rank of a tuple.
    pub fn rank(&self, tuple: &[u8]) -> Result<usize> {
        self.rank
            .get(tuple)
            .copied()
            .ok_or_else(|| Error::arg(format!("tuple {tuple:?} is not in the space")))
    }

    /// Tuple at 0-based rank `r`.
    pub fn tuple(&self, r: usize) -> &[u8] {
        &self.tuples[r]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.tuples.iter().map(|t| t.as_slice())
    }
}

// Colexicographic: enumerate the last bin slowest by recursing on a suffix
// position; emitted order sorts tuples by reversed-tuple lexicographic order.
fn gen_colex(pos: usize, remaining: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == 1 {
        cur[0] = remaining as u8;
        out.push(cur.clone());
        return;
    }
    for v in 0..=remaining {
        cur[pos - 1] = v as u8;
        gen_colex(pos - 1, remaining - v, cur, out);
    }
    cur[pos - 1] = 0;
}

/// Anonymous encoded state space for the quality ladder: own quality
/// `1..=omega_bar` crossed with the rival configuration (a tuple of counts
/// over `omega_bar + 1` quality bins summing to `N - 1`; the last bin holds
/// inactive slots).
///
/// `K = omega_bar * C(N - 1 + omega_bar, omega_bar)`. Own quality is the
/// innermost (fastest varying) component.
#[derive(Clone, Debug)]
pub struct AnonymousLadderSpace {
    n_firms: usize,
    omega_bar: usize,
    rivals: TupleSpace,
    k: usize,
}

impl AnonymousLadderSpace {
    /// Enumerates the space; errors if the encoded size exceeds `max_states`.
    pub fn new(n_firms: usize, omega_bar: usize, max_states: usize) -> Result<Self> {
        if n_firms < 1 || omega_bar < 1 {
            return Err(Error::arg("ladder space requires n_firms >= 1 and omega_bar >= 1"));
        }
        let configs = binomial(n_firms - 1 + omega_bar, omega_bar)
            .ok_or_else(|| Error::Sizing("rival configuration count overflows".into()))?;
        let k = configs
            .checked_mul(omega_bar as u128)
            .filter(|&k| k <= max_states as u128)
            .ok_or_else(|| {
                Error::Sizing(format!(
                    "ladder space with N={n_firms}, omega_bar={omega_bar} has {} states, budget {max_states}",
                    configs.saturating_mul(omega_bar as u128)
                ))
            })? as usize;
        let rivals = TupleSpace::new(omega_bar + 1, n_firms - 1)?;
        debug_assert_eq!(rivals.len() * omega_bar, k);
        Ok(AnonymousLadderSpace { n_firms, omega_bar, rivals, k })
    }

    /// Number of encoded states `K`.
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn n_firms(&self) -> usize {
        self.n_firms
    }

    pub fn omega_bar(&self) -> usize {
        self.omega_bar
    }

    /// The rival-configuration component space.
    pub fn rivals(&self) -> &TupleSpace {
        &self.rivals
    }

    /// Encodes `(own quality, rival configuration)` into a 1-based state.
    pub fn encode(&self, own_quality: usize, rivals: &[u8]) -> Result<usize> {
        if own_quality < 1 || own_quality > self.omega_bar {
            return Err(Error::arg(format!(
                "own quality {own_quality} out of range 1..={}",
                self.omega_bar
            )));
        }
        let r = self.rivals.rank(rivals)?;
        Ok(r * self.omega_bar + own_quality)
    }

    /// Decodes a 1-based state into `(own quality, rival configuration)`.
    pub fn decode(&self, state: usize) -> Result<(usize, &[u8])> {
        if state < 1 || state > self.k {
            return Err(Error::arg(format!("state {state} out of range 1..={}", self.k)));
        }
        let idx = state - 1;
        let own = idx % self.omega_bar + 1;
        let r = idx / self.omega_bar;
        Ok((own, self.rivals.tuple(r)))
    }
}

/// Closed-form encoded size of the anonymous ladder space.
pub fn ladder_space_size(n_firms: usize, omega_bar: usize) -> Option<u128> {
    binomial(n_firms - 1 + omega_bar, omega_bar).and_then(|c| c.checked_mul(omega_bar as u128))
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_space_matches_listed_order() {
        // (x1, x2, d) with d slowest and x1 fastest:
        // 1:(0,0,L) 2:(1,0,L) 3:(0,1,L) 4:(1,1,L) 5:(0,0,H) ...
        let s = StateSpace::product(2, 2, 2).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.decode(1).unwrap(), vec![1, 1, 1]);
        assert_eq!(s.decode(2).unwrap(), vec![1, 2, 1]); // player 1 active
        assert_eq!(s.decode(3).unwrap(), vec![1, 1, 2]); // player 2 active
        assert_eq!(s.decode(5).unwrap(), vec![2, 1, 1]); // high demand
        for k in 1..=8 {
            assert_eq!(s.encode(&s.decode(k).unwrap()).unwrap(), k);
        }
    }

    #[test]
    fn degenerate_space_is_a_single_state() {
        let s = StateSpace::product(1, 1, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.decode(1).unwrap(), vec![1, 1]);
    }

    #[test]
    fn product_space_roundtrip_exhaustive() {
        let s = StateSpace::product(3, 4, 2).unwrap();
        assert_eq!(s.len(), 48);
        for k in 1..=48 {
            let t = s.decode(k).unwrap();
            assert_eq!(s.encode(&t).unwrap(), k);
        }
        // and the tuple-side identity
        for x0 in 1..=3 {
            for x1 in 1..=4 {
                for x2 in 1..=4 {
                    let k = s.encode(&[x0, x1, x2]).unwrap();
                    assert_eq!(s.decode(k).unwrap(), vec![x0, x1, x2]);
                }
            }
        }
    }

    #[test]
    fn oversized_space_is_rejected() {
        assert!(matches!(StateSpace::product(usize::MAX, 2, 2), Err(Error::Sizing(_))));
    }

    #[test]
    fn continuation_map_validates_costless_continuation() {
        let err = ContinuationMap::new(1, 2, 3, |_i, j, k| if j == 0 { k % 3 + 1 } else { 1 });
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn continuation_map_rejects_duplicate_targets() {
        // both actions map to state 1 from state 2
        let err = ContinuationMap::new(1, 3, 3, |_i, j, k| if j == 0 { k } else { 1 });
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn renewal_style_map_needs_self_reset_constructor() {
        let l = |_i: usize, j: usize, k: usize| if j == 0 { k } else { 1 };
        assert!(ContinuationMap::new(1, 2, 90, l).is_err());
        let m = ContinuationMap::with_self_resets(1, 2, 90, l).unwrap();
        assert_eq!(m.target(1, 1, 37).unwrap(), 1);
        assert_eq!(m.target(1, 0, 37).unwrap(), 37);
        assert_eq!(m.target(1, 1, 1).unwrap(), 1);
    }

    #[test]
    fn ladder_space_sizes_match_reference_table() {
        // (N, K) rows at omega_bar = 7
        let rows = [
            (2usize, 56u128),
            (4, 840),
            (6, 5_544),
            (8, 24_024),
            (10, 80_080),
            (12, 222_768),
            (14, 542_640),
            (16, 1_193_808),
            (18, 2_422_728),
            (20, 4_604_600),
            (22, 8_288_280),
            (24, 14_250_600),
            (26, 23_560_992),
            (28, 37_657_312),
            (30, 58_433_760),
        ];
        for (n, k) in rows {
            assert_eq!(ladder_space_size(n, 7), Some(k), "N={n}");
        }
        // formula holds for all 1..=30
        for n in 1..=30usize {
            let c = binomial(n - 1 + 7, 7).unwrap();
            assert_eq!(ladder_space_size(n, 7), Some(7 * c));
        }
    }

    #[test]
    fn ladder_space_enumeration_matches_formula() {
        let s = AnonymousLadderSpace::new(2, 7, 1_000_000).unwrap();
        assert_eq!(s.len(), 56);
        let s4 = AnonymousLadderSpace::new(4, 7, 1_000_000).unwrap();
        assert_eq!(s4.len(), 840);
        // round-trip
        for k in 1..=s4.len() {
            let (own, r) = s4.decode(k).unwrap();
            let r = r.to_vec();
            assert_eq!(s4.encode(own, &r).unwrap(), k);
        }
    }

    #[test]
    fn ladder_space_respects_budget() {
        assert!(matches!(AnonymousLadderSpace::new(14, 7, 1000), Err(Error::Sizing(_))));
    }

    #[test]
    fn tuple_space_order_is_stable_colex() {
        let t = TupleSpace::new(3, 2).unwrap();
        let listed: Vec<Vec<u8>> = t.iter().map(|x| x.to_vec()).collect();
        assert_eq!(
            listed,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![0, 0, 2],
            ]
        );
        for (r, tup) in t.iter().enumerate() {
            assert_eq!(t.rank(tup).unwrap(), r);
        }
    }
}
