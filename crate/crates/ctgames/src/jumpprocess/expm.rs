//! Matrix exponential of an intensity matrix via uniformization.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::IntensityMatrix;

/// Row-stochastic interval transition matrix `P(delta) = exp(delta * Q)`.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    k: usize,
    delta: f64,
    p: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Transition probability for 1-based `(from, to)`.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.p[(from - 1, to - 1)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Matrix product, preserving the additive interval semantics.
    pub fn compose(&self, other: &TransitionMatrix) -> Result<TransitionMatrix> {
        if self.k != other.k {
            return Err(Error::Dimension("composed transition matrices must share dimension".into()));
        }
        Ok(TransitionMatrix { k: self.k, delta: self.delta + other.delta, p: &self.p * &other.p })
    }

    /// Largest deviation of a row sum from one.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.k)
            .map(|r| (self.p.row(r).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Poisson tail mass to neglect when truncating the uniformization series.
const TAIL_TOL: f64 = 1e-14;

/// Padding applied to the uniformization constant over `max_k |q_kk|`.
const ETA_PAD: f64 = 1.05;

/// Interval splitting threshold: `e^{-eta delta}` underflows near 745, so
/// larger intervals are computed by squaring shorter ones.
const MAX_ETA_DELTA: f64 = 700.0;

/// Computes `P(delta) = exp(delta Q)` by uniformization.
///
/// With `eta >= max_k |q_kk|`, write `A = I + Q / eta` (a stochastic matrix)
/// and sum `e^{-eta delta} (eta delta)^m / m! * A^m` until the neglected
/// Poisson tail mass is below `1e-14`. Powers of `A` are applied through
/// sparse matrix products against the accumulating dense block. Intervals
/// with `eta * delta > 700` are split by the semigroup property.
pub fn expm(q: &IntensityMatrix, delta: f64) -> Result<TransitionMatrix> {
    if !(delta >= 0.0) {
        return Err(Error::arg(format!("delta must be >= 0, got {delta}")));
    }
    let k = q.dim();
    let eta = ETA_PAD * q.max_total_rate();
    if delta == 0.0 || eta == 0.0 {
        return Ok(TransitionMatrix { k, delta, p: DMatrix::identity(k, k) });
    }
    let splits = (eta * delta / MAX_ETA_DELTA).log2().ceil().max(0.0) as u32;
    let base = expm_uniformized(q, delta / f64::powi(2.0, splits as i32), eta)?;
    let mut p = base;
    for _ in 0..splits {
        p = p.compose(&p)?;
    }
    // composition doubles delta exactly in structure, but restate to avoid
    // floating drift in the reported interval
    p.delta = delta;
    Ok(p)
}

fn expm_uniformized(q: &IntensityMatrix, delta: f64, eta: f64) -> Result<TransitionMatrix> {
    let k = q.dim();
    let rho = eta * delta;
    // Poisson(rho) weights by forward recursion; truncate once cumulative
    // mass exceeds 1 - TAIL_TOL.
    let mut weights = Vec::with_capacity(16 + 2 * rho as usize);
    let mut w = (-rho).exp();
    let mut cum = w;
    weights.push(w);
    let mut m = 0usize;
    while cum < 1.0 - TAIL_TOL {
        m += 1;
        w *= rho / m as f64;
        cum += w;
        weights.push(w);
        if m > 100_000 {
            return Err(Error::NoConvergence { iterations: m, residual: 1.0 - cum });
        }
    }
    // B_m = A^m, accumulated as P = sum_m weights[m] B_m with
    // B_0 = I and B_{m+1} = A B_m computed via sparse row products over
    // row-major buffers.
    let mut b = vec![0.0f64; k * k];
    let mut p = vec![0.0f64; k * k];
    for r in 0..k {
        b[r * k + r] = 1.0;
        p[r * k + r] = weights[0];
    }
    let mut next = vec![0.0f64; k * k];
    for &wm in weights.iter().skip(1) {
        // next = A * b where A = I + Q / eta
        for r in 0..k {
            let diag = 1.0 + q.diagonal(r + 1) / eta;
            let (dst, src) = (r * k, r * k);
            for c in 0..k {
                next[dst + c] = diag * b[src + c];
            }
            for (l, rate) in q.row(r + 1) {
                let a = rate / eta;
                let off = (l - 1) * k;
                for c in 0..k {
                    next[dst + c] += a * b[off + c];
                }
            }
        }
        std::mem::swap(&mut b, &mut next);
        for (pv, bv) in p.iter_mut().zip(&b) {
            *pv += wm * bv;
        }
    }
    Ok(TransitionMatrix { k, delta, p: DMatrix::from_row_slice(k, k, &p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: dense truncated Taylor series of exp(delta Q).
    fn taylor_expm(q: &IntensityMatrix, delta: f64, terms: usize) -> DMatrix<f64> {
        let k = q.dim();
        let a = q.to_dense() * delta;
        let mut acc = DMatrix::<f64>::identity(k, k);
        let mut term = DMatrix::<f64>::identity(k, k);
        for m in 1..=terms {
            term = (&term * &a) / m as f64;
            acc += &term;
        }
        acc
    }

    pub(crate) fn random_intensity(rng: &mut ChaCha8Rng, k: usize, max_rate: f64) -> IntensityMatrix {
        let mut m = IntensityMatrix::zeros(k);
        for r in 1..=k {
            let fanout = rng.random_range(1..=3.min(k - 1).max(1));
            for _ in 0..fanout {
                let mut c = rng.random_range(1..=k);
                if c == r {
                    c = c % k + 1;
                }
                if c != r {
                    m.add(r, c, rng.random_range(0.0..max_rate)).unwrap();
                }
            }
        }
        m
    }

    #[test]
    fn expm_at_zero_is_identity() {
        let q = IntensityMatrix::from_entries(3, [(1, 2, 0.4), (2, 3, 0.2), (3, 1, 0.1)]).unwrap();
        let p = expm(&q, 0.0).unwrap();
        assert_eq!(p.as_matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn two_state_closed_form() {
        let (a, b, delta) = (0.3, 0.7, 1.0);
        let q = IntensityMatrix::from_entries(2, [(1, 2, a), (2, 1, b)]).unwrap();
        let p = expm(&q, delta).unwrap();
        let p11 = (b + a * (-(a + b) * delta).exp()) / (a + b);
        assert!((p.prob(1, 1) - p11).abs() < 1e-12, "got {}, want {}", p.prob(1, 1), p11);
        assert!((p.prob(1, 2) - (1.0 - p11)).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_taylor_oracle_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let k = rng.random_range(2..=20);
            let q = random_intensity(&mut rng, k, 0.4);
            for delta in [0.1, 1.0, 8.0] {
                let p = expm(&q, delta).unwrap();
                let oracle = taylor_expm(&q, delta, 200);
                let err = (p.as_matrix() - &oracle).amax();
                assert!(err < 1e-10, "trial {trial}, k={k}, delta={delta}: err {err}");
            }
        }
    }

    #[test]
    fn rows_remain_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_intensity(&mut rng, 20, 1.0);
        for delta in [0.05, 2.0, 50.0] {
            let p = expm(&q, delta).unwrap();
            assert!(p.row_sum_error() < 1e-12, "delta={delta}: {}", p.row_sum_error());
            assert!(p.as_matrix().iter().all(|&x| (-1e-13..=1.0 + 1e-12).contains(&x)));
        }
    }

    #[test]
    fn semigroup_property_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let k = rng.random_range(2..=50);
            let q = random_intensity(&mut rng, k, 0.8);
            let (s, t) = (0.7, 1.9);
            let pst = expm(&q, s + t).unwrap();
            let ps = expm(&q, s).unwrap();
            let pt = expm(&q, t).unwrap();
            let err = (pst.as_matrix() - ps.as_matrix() * pt.as_matrix()).norm();
            assert!(err < 1e-10, "k={k}: Frobenius err {err}");
        }
    }

    #[test]
    fn large_interval_splits_instead_of_underflowing() {
        let q = IntensityMatrix::from_entries(2, [(1, 2, 3.0), (2, 1, 5.0)]).unwrap();
        let p = expm(&q, 400.0).unwrap(); // eta*delta ~ 3360 > 700
        // stationary distribution of this chain is (5/8, 3/8)
        assert!((p.prob(1, 1) - 0.625).abs() < 1e-10);
        assert!((p.prob(2, 2) - 0.375).abs() < 1e-10);
    }

    #[test]
    fn negative_delta_rejected() {
        let q = IntensityMatrix::zeros(2);
        assert!(expm(&q, -1.0).is_err());
    }
}
