//! Closed-form kept probability and dit error for the depolarizing, modulo and
//! block-bias channels, their physical-noise thresholds, and the symbol-level
//! confusion model the Monte Carlo simulator samples from.

mod block;
mod cross_basis;
mod depolarizing;
mod model;
mod modulo;

use serde::{Deserialize, Serialize};

use crate::encoding::{IndexEncoding, Topology};
use crate::entropy::KaryParams;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use block::{
    block_populations, block_stats, block_stats_for, block_threshold_eps2, BlockPopulations, Eps2Threshold,
};
pub use cross_basis::{cross_basis_overlap, MAX_DENSE_DIMENSION};
pub use depolarizing::{depol_alpha_threshold, depol_stats, depol_threshold_eps};
pub use model::{build_confusion_model, transition_matrix, ConfusionModel};
pub use modulo::{modulo_stats, modulo_threshold_eps};

/// Measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            other => Err(Error::InvalidParams(format!("unknown basis '{other}', expected Z or X"))),
        }
    }
}

/// Noise model acting on the d-dimensional carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec<T> {
    /// Replace the state by the maximally mixed one with probability `eps`.
    Depolarizing { eps: T },
    /// Hop to each nearest neighbour with probability `eps`.
    Modulo { eps: T, topology: Topology },
    /// In-block depolarization `eps1` on blocks of size `s`, then global depolarization `eps2`.
    BlockBias { eps1: T, eps2: T, s: usize },
}

fn check_prob<T: Real>(name: &str, p: T, max: T) -> Result<()> {
    if p.is_nan() || p < T::zero() || p > max {
        return Err(Error::InvalidParams(format!("{name} = {p} outside [0, {max}]")));
    }
    Ok(())
}

impl<T: Real> ChannelSpec<T> {
    /// Checks the noise parameters and, for block bias, that `s` divides `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            ChannelSpec::Depolarizing { eps } => check_prob("eps", eps, T::one()),
            ChannelSpec::Modulo { eps, .. } => check_prob("eps", eps, T::half()),
            ChannelSpec::BlockBias { eps1, eps2, s } => {
                check_prob("eps1", eps1, T::one())?;
                check_prob("eps2", eps2, T::one())?;
                if s < 2 || !d.is_multiple_of(s) {
                    return Err(Error::InvalidParams(format!(
                        "block size s = {s} must be >= 2 and divide d = {d}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Same spec with the scalar converted, e.g. to f64 for sampling.
    pub fn cast<U: Real>(&self) -> ChannelSpec<U> {
        let c = |x: T| U::lit(x.to_f64().expect("finite noise parameter"));
        match *self {
            ChannelSpec::Depolarizing { eps } => ChannelSpec::Depolarizing { eps: c(eps) },
            ChannelSpec::Modulo { eps, topology } => ChannelSpec::Modulo { eps: c(eps), topology },
            ChannelSpec::BlockBias { eps1, eps2, s } => ChannelSpec::BlockBias { eps1: c(eps1), eps2: c(eps2), s },
        }
    }
}

/// Kept-event probability `alpha` and dit error `q` among kept, basis-matched events.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KeptStats<T> {
    pub alpha: T,
    pub q: T,
}

impl<T: Real> KeptStats<T> {
    /// `q = errors / alpha`, with the `alpha = 0` case mapped to `q = 0`
    /// (see [`KeptStats::has_kept_events`]).
    pub(crate) fn from_error_mass(alpha: T, error_mass: T) -> Self {
        if alpha <= T::zero() {
            Self { alpha: T::zero(), q: T::zero() }
        } else {
            Self { alpha, q: error_mass / alpha }
        }
    }

    /// False when no conclusive outcome has positive probability.
    pub fn has_kept_events(&self) -> bool {
        self.alpha > T::zero()
    }
}

/// Closed-form stats of `spec` for signal set `encoding` (same index-level
/// structure in both bases).
pub fn analytic_stats<T: Real>(spec: &ChannelSpec<T>, encoding: &IndexEncoding) -> Result<KeptStats<T>> {
    let d = encoding.d();
    spec.validate(d)?;
    let params = KaryParams::new(encoding.k(), d)?;
    match *spec {
        ChannelSpec::Depolarizing { eps } => depol_stats(params, eps),
        ChannelSpec::Modulo { eps, topology } => modulo_stats(eps, encoding, topology),
        ChannelSpec::BlockBias { eps1, eps2, s } => block_stats_for(encoding, s, eps1, eps2),
    }
}
