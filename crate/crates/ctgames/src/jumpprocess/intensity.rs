//! Sparse intensity matrices (infinitesimal generators).

use crate::error::{Error, Result};
use crate::statespace::ContinuationMap;

/// A sparse `K x K` intensity matrix.
///
/// Only nonnegative off-diagonal hazards are stored; each diagonal element is
/// defined as the negative sum of its row's off-diagonals and is always
/// recomputed on demand, so row sums are exactly zero by construction.
/// Indices are 1-based in the public API.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMatrix {
    k: usize,
    cols: Vec<Vec<u32>>,  // per row, 0-based column indices, sorted
    rates: Vec<Vec<f64>>, // matching hazards, all > 0
    totals: Vec<f64>,     // cached row totals (= -diagonal)
}

impl IntensityMatrix {
    /// The zero generator (every state absorbing).
    pub fn zeros(k: usize) -> Self {
        IntensityMatrix {
            k,
            cols: vec![Vec::new(); k],
            rates: vec![Vec::new(); k],
            totals: vec![0.0; k],
        }
    }

    /// Builds from `(row, col, rate)` triplets with 1-based indices.
    /// Duplicate cells accumulate. Zero rates are dropped; negative or
    /// non-finite rates are rejected.
    pub fn from_entries<I>(k: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut m = IntensityMatrix::zeros(k);
        for (r, c, rate) in entries {
            m.add(r, c, rate)?;
        }
        Ok(m)
    }

    /// Accumulates a hazard into cell `(row, col)`, 1-based, `row != col`.
    pub fn add(&mut self, row: usize, col: usize, rate: f64) -> Result<()> {
        if row < 1 || row > self.k || col < 1 || col > self.k {
            return Err(Error::arg(format!(
                "cell ({row},{col}) out of range for a {k}x{k} matrix",
                k = self.k
            )));
        }
        if row == col {
            return Err(Error::arg(format!(
                "diagonal cell ({row},{row}) cannot be set; diagonals are derived"
            )));
        }
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::arg(format!("hazard for ({row},{col}) must be finite and >= 0, got {rate}")));
        }
        if rate == 0.0 {
            return Ok(());
        }
        let r = row - 1;
        let c = (col - 1) as u32;
        match self.cols[r].binary_search(&c) {
            Ok(pos) => self.rates[r][pos] += rate,
            Err(pos) => {
                self.cols[r].insert(pos, c);
                self.rates[r].insert(pos, rate);
            }
        }
        self.totals[r] += rate;
        Ok(())
    }

    /// Matrix dimension `K`.
    pub fn dim(&self) -> usize {
        self.k
    }

    /// Off-diagonal hazard `q_{kl}` (1-based); zero when absent.
    pub fn rate(&self, row: usize, col: usize) -> f64 {
        if row == col {
            return 0.0;
        }
        let r = row - 1;
        match self.cols[r].binary_search(&((col - 1) as u32)) {
            Ok(pos) => self.rates[r][pos],
            Err(_) => 0.0,
        }
    }

    /// Diagonal element `q_{kk} = -sum_{l != k} q_{kl}` (recomputed).
    pub fn diagonal(&self, row: usize) -> f64 {
        -self.totals[row - 1]
    }

    /// Total outflow rate of `row` (`= -q_{kk}`).
    pub fn total_rate(&self, row: usize) -> f64 {
        self.totals[row - 1]
    }

    /// Iterates the off-diagonal entries of `row` as 1-based `(col, rate)`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = row - 1;
        self.cols[r]
            .iter()
            .zip(&self.rates[r])
            .map(|(&c, &q)| (c as usize + 1, q))
    }

    /// Iterates all off-diagonal entries as 1-based `(row, col, rate)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..=self.k).flat_map(move |r| self.row(r).map(move |(c, q)| (r, c, q)))
    }

    /// Number of stored (nonzero off-diagonal) entries.
    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// Largest total outflow rate `max_k |q_kk|`.
    pub fn max_total_rate(&self) -> f64 {
        self.totals.iter().cloned().fold(0.0, f64::max)
    }

    /// Dense copy, mainly for diagnostics and small-system linear algebra.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.k, self.k);
        for r in 1..=self.k {
            m[(r - 1, r - 1)] = self.diagonal(r);
            for (c, q) in self.row(r) {
                m[(r - 1, c - 1)] = q;
            }
        }
        m
    }
}

/// Entrywise sum of per-mover intensity matrices.
pub fn aggregate(parts: &[&IntensityMatrix]) -> Result<IntensityMatrix> {
    let Some(first) = parts.first() else {
        return Err(Error::arg("aggregate requires at least one part"));
    };
    let k = first.dim();
    let mut out = IntensityMatrix::zeros(k);
    for p in parts {
        if p.dim() != k {
            return Err(Error::Dimension(format!(
                "aggregate parts must share dimension: {} vs {k}",
                p.dim()
            )));
        }
        for (r, c, q) in p.entries() {
            out.add(r, c, q)?;
        }
    }
    Ok(out)
}

/// Splits an aggregate intensity matrix into per-mover parts
/// `[Q_0, Q_1, .., Q_N]` using the continuation map: an off-diagonal entry
/// `(k, l)` belongs to player `i` if some action `j >= 1` has
/// `l(i, j, k) = l != k`, and to nature otherwise.
///
/// Errors if two distinct players claim the same cell. When `nature_pattern`
/// is supplied, entries claimed by no player must lie inside the pattern's
/// nonzero cells, otherwise the cell is reported as unattributable.
pub fn decompose(
    q: &IntensityMatrix,
    map: &ContinuationMap,
    nature_pattern: Option<&IntensityMatrix>,
) -> Result<Vec<IntensityMatrix>> {
    let k = q.dim();
    if map.n_states() != k {
        return Err(Error::Dimension(format!(
            "continuation map covers {} states, matrix has {k}",
            map.n_states()
        )));
    }
    let n = map.n_players();
    let mut parts: Vec<IntensityMatrix> = (0..=n).map(|_| IntensityMatrix::zeros(k)).collect();
    for (row, col, rate) in q.entries() {
        let mut owner: Option<usize> = None;
        for i in 1..=n {
            for j in 1..map.n_choices() {
                if map.target(i, j, row)? == col {
                    match owner {
                        Some(prev) if prev != i => {
                            return Err(Error::Attribution(format!(
                                "cell ({row},{col}) is reachable by players {prev} and {i}"
                            )));
                        }
                        _ => owner = Some(i),
                    }
                }
            }
        }
        match owner {
            Some(i) => parts[i].add(row, col, rate)?,
            None => {
                if let Some(pat) = nature_pattern {
                    if pat.rate(row, col) == 0.0 {
                        return Err(Error::Attribution(format!(
                            "cell ({row},{col}) is reachable by no player action and no nature jump"
                        )));
                    }
                }
                parts[0].add(row, col, rate)?;
            }
        }
    }
    Ok(parts)
}
