use serde::Serialize;

use super::KeptStats;
use crate::encoding::{block_overlap_of, IndexEncoding};
use crate::entropy::{solve_q_threshold, KaryParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Outcome probabilities for one sent basis state under the block-bias channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockPopulations<T> {
    /// The sent state itself.
    pub correct: T,
    /// Each of the `s - 1` other states in the same block.
    pub in_block: T,
    /// Each of the `d - s` states in other blocks.
    pub cross_block: T,
}

fn check_block_args<T: Real>(d: usize, s: usize, eps1: T, eps2: T) -> Result<()> {
    if s == 0 || !d.is_multiple_of(s) {
        return Err(Error::InvalidParams(format!("block size s = {s} does not divide d = {d}")));
    }
    for (name, p) in [("eps1", eps1), ("eps2", eps2)] {
        if p.is_nan() || p < T::zero() || p > T::one() {
            return Err(Error::InvalidParams(format!("{name} = {p} outside [0, 1]")));
        }
    }
    Ok(())
}

pub fn block_populations<T: Real>(d: usize, s: usize, eps1: T, eps2: T) -> Result<BlockPopulations<T>> {
    check_block_args(d, s, eps1, eps2)?;
    let (dd, ss) = (T::count(d), T::count(s));
    let global = eps2 / dd;
    let kept = T::one() - eps2;
    Ok(BlockPopulations {
        correct: kept * (T::one() - T::count(s - 1) * eps1 / ss) + global,
        in_block: kept * eps1 / ss + global,
        cross_block: global,
    })
}

/// Kept probability and dit error for a signal set with block overlap `e_b`.
pub fn block_stats<T: Real>(params: KaryParams, s: usize, eps1: T, eps2: T, e_b: T) -> Result<KeptStats<T>> {
    let (d, k) = (params.d(), params.k());
    check_block_args(d, s, eps1, eps2)?;
    let tol = T::lit(1e-12);
    if e_b < T::one() - tol || e_b > T::count(s) + tol {
        return Err(Error::InvalidParams(format!("block overlap {e_b} outside [1, {s}]")));
    }
    let (dd, ss, kk) = (T::count(d), T::count(s), T::count(k));
    let one = T::one();
    let alpha = (one - eps2) * (one - T::count(s - 1) * eps1 / ss + eps1 / ss * (e_b - one)) + eps2 * kk / dd;
    let error_mass = ((one - eps2) * eps1 / ss + eps2 / dd) * (e_b - one) + eps2 / dd * (kk - e_b);
    Ok(KeptStats::from_error_mass(alpha, error_mass))
}

/// [`block_stats`] with the exact overlap of `encoding`.
pub fn block_stats_for<T: Real>(encoding: &IndexEncoding, s: usize, eps1: T, eps2: T) -> Result<KeptStats<T>> {
    let params = KaryParams::new(encoding.k(), encoding.d())?;
    let e_b = T::from_ratio(block_overlap_of(encoding, s)?);
    block_stats(params, s, eps1, eps2, e_b)
}

/// Inter-block noise threshold at fixed in-block noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "eps2", rename_all = "snake_case")]
pub enum Eps2Threshold<T> {
    /// The rate changes sign at this `eps2` in `[0, 1]`.
    Root(T),
    /// The rate is non-positive already at `eps2 = 0`.
    NoPositiveRate,
    /// The rate stays positive up to `eps2 = 1`.
    AlwaysPositive,
}

impl<T: Real> Eps2Threshold<T> {
    /// Threshold clamped to `[0, 1]`.
    pub fn value(&self) -> T {
        match *self {
            Eps2Threshold::Root(x) => x,
            Eps2Threshold::NoPositiveRate => T::zero(),
            Eps2Threshold::AlwaysPositive => T::one(),
        }
    }

    pub fn root(&self) -> Option<T> {
        match *self {
            Eps2Threshold::Root(x) => Some(x),
            _ => None,
        }
    }
}

/// Solves `Q(eps2) = Q^th` for the block-bias channel:
/// `eps2 = (Q^th K0 - C0) / (C1 - Q^th (k/d - K0))` with
/// `K0 = 1 - (s-1) eps1/s + (eps1/s)(E-1)`, `C0 = eps1 (E-1)/s`,
/// `C1 = -C0 + (k-1)/d`.
pub fn block_threshold_eps2<T: Real>(params: KaryParams, s: usize, eps1: T, e_min: T) -> Result<Eps2Threshold<T>> {
    let (d, k) = (params.d(), params.k());
    check_block_args(d, s, eps1, T::zero())?;
    let q = solve_q_threshold::<T>(k)?;
    let (dd, ss, kk) = (T::count(d), T::count(s), T::count(k));
    let one = T::one();
    let k0 = one - T::count(s - 1) * eps1 / ss + eps1 / ss * (e_min - one);
    let c0 = eps1 * (e_min - one) / ss;
    let c1 = -c0 + (kk - one) / dd;
    let denom = c1 - q * (-k0 + kk / dd);
    if denom.abs() < T::lit(1e-15) {
        return Err(Error::Degenerate(format!(
            "denominator {denom} vanishes for d = {d}, s = {s}, k = {k}, eps1 = {eps1}"
        )));
    }
    let root = (q * k0 - c0) / denom;
    if root >= T::zero() && root <= one {
        return Ok(Eps2Threshold::Root(root));
    }
    // Q is a monotone Möbius function of eps2, so the sign at eps2 = 0 decides.
    let q0 = block_stats(params, s, eps1, T::zero(), e_min)?.q;
    Ok(if q0 >= q { Eps2Threshold::NoPositiveRate } else { Eps2Threshold::AlwaysPositive })
}
