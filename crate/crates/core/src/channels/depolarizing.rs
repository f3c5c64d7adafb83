use super::KeptStats;
use crate::entropy::{solve_q_threshold, KaryParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `alpha = (1-eps) + k eps / d`, `Q = (k-1) eps / (d(1-eps) + k eps)`.
pub fn depol_stats<T: Real>(params: KaryParams, eps: T) -> Result<KeptStats<T>> {
    if eps.is_nan() || eps < T::zero() || eps > T::one() {
        return Err(Error::InvalidParams(format!("eps = {eps} outside [0, 1]")));
    }
    let (k, d) = (T::count(params.k()), T::count(params.d()));
    let alpha = (T::one() - eps) + k * eps / d;
    let error_mass = (k - T::one()) * eps / d;
    Ok(KeptStats::from_error_mass(alpha, error_mass))
}

/// Largest depolarizing probability with a non-negative rate:
/// `d Q^th / ((k-1) + Q^th (d-k))`.
pub fn depol_threshold_eps<T: Real>(params: KaryParams) -> Result<T> {
    let q = solve_q_threshold::<T>(params.k())?;
    let (k, d) = (T::count(params.k()), T::count(params.d()));
    Ok(d * q / ((k - T::one()) + q * (d - k)))
}

/// Kept fraction at the depolarizing threshold: `(k-1) / ((k-1) + Q^th (d-k))`.
pub fn depol_alpha_threshold<T: Real>(params: KaryParams) -> Result<T> {
    let q = solve_q_threshold::<T>(params.k())?;
    let (k, d) = (T::count(params.k()), T::count(params.d()));
    Ok((k - T::one()) / ((k - T::one()) + q * (d - k)))
}
