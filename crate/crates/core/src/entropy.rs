//! Entropy of the k-ary symmetric channel, Devetak–Winter rate bounds and the
//! dit-error threshold solver.

use serde::Serialize;

use crate::channels::KeptStats;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance on the Q domain check before a value is rejected.
const DOMAIN_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;
const BRACKET_PAD: f64 = 1e-15;

/// Alphabet size `k` embedded in a Hilbert space of dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct KaryParams {
    k: usize,
    d: usize,
}

impl KaryParams {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!("alphabet size k = {k} must be at least 2")));
        }
        if k > d {
            return Err(Error::InvalidParams(format!("alphabet size k = {k} exceeds dimension d = {d}")));
        }
        Ok(Self { k, d })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }
}

fn check_alphabet(k: usize) -> Result<()> {
    if k < 2 {
        Err(Error::InvalidParams(format!("alphabet size k = {k} must be at least 2")))
    } else {
        Ok(())
    }
}

/// Largest meaningful dit error, `(k-1)/k` (uniformly random outcome).
pub fn max_dit_error<T: Real>(k: usize) -> T {
    T::count(k - 1) / T::count(k)
}

/// `x log2 x` with the `0 log 0 = 0` convention.
#[inline]
fn xlog2x<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.log2()
    }
}

/// Binary entropy in bits.
pub fn h2<T: Real>(q: T) -> T {
    -xlog2x(q) - xlog2x(T::one() - q)
}

fn clamp_q<T: Real>(q: T, k: usize) -> Result<T> {
    let max = max_dit_error::<T>(k);
    let tol = T::lit(DOMAIN_TOL);
    if q.is_nan() || q < -tol || q > max + tol {
        return Err(Error::Domain {
            q: q.to_f64().unwrap_or(f64::NAN),
            k,
            max: max.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(q.max(T::zero()).min(max))
}

/// Shannon entropy of the k-ary symmetric channel at dit error `q`:
/// `-(1-q) log2(1-q) - q log2(q/(k-1))`.
pub fn h_k<T: Real>(q: T, k: usize) -> Result<T> {
    check_alphabet(k)?;
    let q = clamp_q(q, k)?;
    if q <= T::zero() {
        return Ok(T::zero());
    }
    let km1 = T::count(k - 1);
    Ok(-xlog2x(T::one() - q) - q * (q / km1).log2())
}

/// Same quantity through the `h2(q) + q log2(k-1)` decomposition.
pub fn h_k_via_binary<T: Real>(q: T, k: usize) -> Result<T> {
    check_alphabet(k)?;
    let q = clamp_q(q, k)?;
    Ok(h2(q) + q * T::count(k - 1).log2())
}

/// Dit-error threshold `Q^th(k)`: the root of `h_k(Q) = log2(k)/2`, independent of `d`.
pub fn solve_q_threshold<T: Real>(k: usize) -> Result<T> {
    check_alphabet(k)?;
    let target = T::count(k).log2() * T::half();
    let pad = T::lit(BRACKET_PAD);
    let mut lo = pad;
    let mut hi = max_dit_error::<T>(k) - pad;
    let tol = T::solver_tol();
    for _ in 0..BISECTION_MAX_ITER {
        let mid = (lo + hi) * T::half();
        if h_k(mid, k)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Ok((lo + hi) * T::half())
}

/// Devetak–Winter bound per sifted symbol, `log2 k - h_k(Q_Z) - h_k(Q_X)`.
/// May be negative; callers that need a key rate clamp it.
pub fn rate_per_sifted_symbol<T: Real>(k: usize, q_z: T, q_x: T) -> Result<T> {
    check_alphabet(k)?;
    Ok(T::count(k).log2() - h_k(q_z, k)? - h_k(q_x, k)?)
}

/// Secret bits per sent signal with uniform basis choice: `max(0, α/2 · (log2 k - 2 h_k(Q)))`.
pub fn rate_per_signal<T: Real>(alpha: T, k: usize, q: T) -> Result<T> {
    rate_per_signal_with_sifting(T::half(), alpha, k, q)
}

/// As [`rate_per_signal`] but with an explicit basis-matched fraction in place of `1/2`.
pub fn rate_per_signal_with_sifting<T: Real>(matched_fraction: T, alpha: T, k: usize, q: T) -> Result<T> {
    if !(alpha >= T::zero() && alpha <= T::one() + T::lit(DOMAIN_TOL)) {
        return Err(Error::InvalidParams(format!("kept probability {alpha} outside [0, 1]")));
    }
    let sifted = rate_per_sifted_symbol(k, q, q)?;
    Ok((matched_fraction * alpha * sifted).max(T::zero()))
}

/// Rates and the dit-error threshold for one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport<T> {
    pub rate_per_sifted_symbol: T,
    pub rate_per_signal: T,
    pub q_threshold: T,
    pub kept_stats: KeptStats<T>,
}

impl<T: Real> RateReport<T> {
    /// Symmetric-design report (`Q_Z = Q_X = stats.q`).
    pub fn from_stats(k: usize, stats: KeptStats<T>) -> Result<Self> {
        let sifted = rate_per_sifted_symbol(k, stats.q, stats.q)?;
        Ok(Self {
            rate_per_sifted_symbol: sifted,
            rate_per_signal: (T::half() * stats.alpha * sifted).max(T::zero()),
            q_threshold: solve_q_threshold(k)?,
            kept_stats: stats,
        })
    }
}
