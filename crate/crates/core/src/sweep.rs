//! Analytic rate sweeps over the signal-set size, physical-threshold tables
//! and crossover search: the data behind the threshold heatmaps and the
//! rate-versus-k curves.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::channels::{
    analytic_stats, block_threshold_eps2, depol_alpha_threshold, depol_threshold_eps, modulo_threshold_eps,
    ChannelSpec, Eps2Threshold,
};
use crate::encoding::{balanced_block_encoding, e_min, evenly_spaced_encoding, truncation_encoding, IndexEncoding, Topology};
use crate::entropy::{max_dit_error, rate_per_sifted_symbol, KaryParams};
use crate::error::{Error, Result};
use crate::ingest::flag_argmax;
use crate::scalar::Real;

/// Channel family with everything but the swept noise parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum ChannelFamily {
    /// Swept parameter: `eps`.
    Depolarizing,
    /// Swept parameter: `eps`.
    Modulo { topology: Topology },
    /// Swept parameter: `eps2`.
    BlockBias { eps1: f64, s: Option<usize> },
}

impl ChannelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelFamily::Depolarizing => "depol",
            ChannelFamily::Modulo { .. } => "modulo",
            ChannelFamily::BlockBias { .. } => "block",
        }
    }

    /// Block size for dimension `d`: the explicit one, else `√d` for perfect squares.
    pub fn block_size(&self, d: usize) -> Option<usize> {
        match *self {
            ChannelFamily::BlockBias { s: Some(s), .. } => (s >= 2 && d.is_multiple_of(s)).then_some(s),
            ChannelFamily::BlockBias { s: None, .. } => {
                let r = (d as f64).sqrt().round() as usize;
                (r >= 2 && r * r == d).then_some(r)
            }
            _ => None,
        }
    }

    /// Largest value the swept noise parameter may take.
    pub fn noise_max(&self) -> f64 {
        match self {
            ChannelFamily::Modulo { .. } => 0.5,
            _ => 1.0,
        }
    }

    fn require_block_size(&self, d: usize) -> Result<usize> {
        self.block_size(d).ok_or_else(|| {
            Error::InvalidParams(format!("no valid block size for d = {d}; pass s dividing d (d must be a square otherwise)"))
        })
    }

    pub fn spec_at(&self, d: usize, noise: f64) -> Result<ChannelSpec<f64>> {
        let spec = match *self {
            ChannelFamily::Depolarizing => ChannelSpec::Depolarizing { eps: noise },
            ChannelFamily::Modulo { topology } => ChannelSpec::Modulo { eps: noise, topology },
            ChannelFamily::BlockBias { eps1, .. } => {
                ChannelSpec::BlockBias { eps1, eps2: noise, s: self.require_block_size(d)? }
            }
        };
        spec.validate(d)?;
        Ok(spec)
    }

    /// Channel-optimal signal set: truncation (depolarizing), evenly spaced
    /// (modulo), balanced block occupancy (block bias).
    pub fn optimal_encoding(&self, d: usize, k: usize) -> Result<IndexEncoding> {
        match self {
            ChannelFamily::Depolarizing => truncation_encoding(d, k),
            ChannelFamily::Modulo { .. } => evenly_spaced_encoding(d, k),
            ChannelFamily::BlockBias { .. } => balanced_block_encoding(d, self.require_block_size(d)?, k),
        }
    }
}

/// Quantity maximised when picking the best `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateObjective {
    /// `max(0, α/2 · (log2 k - 2 h_k(Q)))`.
    #[default]
    PerSignal,
    /// `log2 k - 2 h_k(Q)` (kept fraction ignored).
    PerSiftedSymbol,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub channel: &'static str,
    pub d: usize,
    pub k: usize,
    /// `eps` for depolarizing/modulo, `eps2` for block bias.
    pub noise: f64,
    pub eps1: Option<f64>,
    pub s: Option<usize>,
    pub alpha: f64,
    pub q: f64,
    pub rate_per_signal: f64,
    pub rate_per_sifted_symbol: f64,
    pub is_argmax: bool,
}

impl SweepRow {
    pub fn objective(&self, objective: RateObjective) -> f64 {
        match objective {
            RateObjective::PerSignal => self.rate_per_signal,
            RateObjective::PerSiftedSymbol => self.rate_per_sifted_symbol,
        }
    }
}

fn sweep_group(
    family: &ChannelFamily,
    d: usize,
    ks: &RangeInclusive<usize>,
    noise: f64,
    objective: RateObjective,
) -> Result<Vec<SweepRow>> {
    let spec = family.spec_at(d, noise)?;
    let mut rows = Vec::new();
    for k in ks.clone().filter(|&k| k <= d) {
        let encoding = family.optimal_encoding(d, k)?;
        let stats = analytic_stats(&spec, &encoding)?;
        // the modulo channel can push Q past (k-1)/k near eps = 1/2; no key there either way
        let q = stats.q.min(max_dit_error::<f64>(k));
        let sifted = rate_per_sifted_symbol(k, q, q)?;
        let (eps1, s) = match spec {
            ChannelSpec::BlockBias { eps1, s, .. } => (Some(eps1), Some(s)),
            _ => (None, None),
        };
        rows.push(SweepRow {
            channel: family.name(),
            d,
            k,
            noise,
            eps1,
            s,
            alpha: stats.alpha,
            q: stats.q,
            rate_per_signal: (0.5 * stats.alpha * sifted).max(0.0),
            rate_per_sifted_symbol: sifted,
            is_argmax: false,
        });
    }
    flag_argmax(&mut rows, |r| r.objective(objective), |r, v| r.is_argmax = v);
    Ok(rows)
}

/// Rates for every `k` in `k_range` (capped at `d`) for every `(d, noise)`
/// pair, with one argmax flagged per group. Groups are ordered by `d`, then
/// by noise in the given order.
pub fn rate_sweep(
    family: &ChannelFamily,
    ds: &[usize],
    k_range: RangeInclusive<usize>,
    noises: &[f64],
    objective: RateObjective,
) -> Result<Vec<SweepRow>> {
    if ds.is_empty() || noises.is_empty() || k_range.is_empty() || *k_range.start() < 2 {
        return Err(Error::InvalidParams("sweep needs at least one d, one noise value and k >= 2".into()));
    }
    let mut out = Vec::new();
    for &d in ds {
        if *k_range.start() > d {
            return Err(Error::InvalidParams(format!("k range starts above d = {d}")));
        }
        for &noise in noises {
            out.extend(sweep_group(family, d, &k_range, noise, objective)?);
        }
    }
    Ok(out)
}

/// `k` with the best objective for one `(d, noise)` point.
pub fn best_k(family: &ChannelFamily, d: usize, k_range: RangeInclusive<usize>, noise: f64, objective: RateObjective) -> Result<usize> {
    let rows = sweep_group(family, d, &k_range, noise, objective)?;
    rows.iter().find(|r| r.is_argmax).map(|r| r.k).ok_or_else(|| Error::InvalidParams("empty k range".into()))
}

const CROSSOVER_TOL: f64 = 1e-10;

/// Noise level above which the full alphabet `k = d` stops being optimal.
/// Bisection on "argmax k == d" between 0 and the family's noise maximum.
pub fn crossover_noise(family: &ChannelFamily, d: usize, objective: RateObjective) -> Result<f64> {
    let full_is_best = |noise: f64| best_k(family, d, 2..=d, noise, objective).map(|k| k == d);
    let mut lo = 0.0;
    let mut hi = family.noise_max();
    if !full_is_best(lo)? {
        return Ok(0.0);
    }
    if full_is_best(hi)? {
        return Err(Error::Degenerate(format!(
            "k = d stays optimal up to noise {hi}; no crossover for d = {d}"
        )));
    }
    while hi - lo > CROSSOVER_TOL {
        let mid = 0.5 * (lo + hi);
        if full_is_best(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Physical-noise threshold of one `(d, k)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CellThreshold {
    /// Threshold on `eps`, with the kept fraction there for the depolarizing channel.
    Eps { eps: f64, alpha: Option<f64> },
    /// Threshold on `eps2` at the family's `eps1`.
    Eps2(Eps2Threshold<f64>),
    /// The threshold equation has a vanishing denominator.
    Degenerate,
    /// `k > d` or no valid block size.
    Empty,
}

impl CellThreshold {
    pub fn value(&self) -> Option<f64> {
        match *self {
            CellThreshold::Eps { eps, .. } => Some(eps),
            CellThreshold::Eps2(t) => Some(t.value()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub d: usize,
    pub k: usize,
    pub threshold: CellThreshold,
}

/// Threshold of the channel-optimal encoding for one cell, generic over the scalar.
pub fn cell_threshold<T: Real>(family: &ChannelFamily, d: usize, k: usize) -> Result<CellThreshold> {
    if k > d {
        return Ok(CellThreshold::Empty);
    }
    let params = KaryParams::new(k, d)?;
    let lift = |x: T| x.to_f64().expect("finite threshold");
    Ok(match *family {
        ChannelFamily::Depolarizing => CellThreshold::Eps {
            eps: lift(depol_threshold_eps::<T>(params)?),
            alpha: Some(lift(depol_alpha_threshold::<T>(params)?)),
        },
        ChannelFamily::Modulo { topology } => CellThreshold::Eps {
            eps: lift(modulo_threshold_eps::<T>(&evenly_spaced_encoding(d, k)?, topology)?),
            alpha: None,
        },
        ChannelFamily::BlockBias { eps1, .. } => {
            let Some(s) = family.block_size(d) else {
                return Ok(CellThreshold::Empty);
            };
            let e = T::from_ratio(e_min(d, s, k)?);
            match block_threshold_eps2::<T>(params, s, T::lit(eps1), e) {
                Ok(t) => CellThreshold::Eps2(match t {
                    Eps2Threshold::Root(x) => Eps2Threshold::Root(lift(x)),
                    Eps2Threshold::NoPositiveRate => Eps2Threshold::NoPositiveRate,
                    Eps2Threshold::AlwaysPositive => Eps2Threshold::AlwaysPositive,
                }),
                Err(Error::Degenerate(_)) => CellThreshold::Degenerate,
                Err(e) => return Err(e),
            }
        }
    })
}

/// One row per `(d, k)` cell, `d` outer, `k` inner; cells with `k > d` are [`CellThreshold::Empty`].
pub fn threshold_table(
    family: &ChannelFamily,
    d_range: RangeInclusive<usize>,
    k_range: RangeInclusive<usize>,
) -> Result<Vec<ThresholdRow>> {
    if d_range.is_empty() || k_range.is_empty() || *k_range.start() < 2 {
        return Err(Error::InvalidParams("threshold table needs non-empty d and k ranges with k >= 2".into()));
    }
    let mut rows = Vec::new();
    for d in d_range {
        for k in k_range.clone() {
            rows.push(ThresholdRow { d, k, threshold: cell_threshold::<f64>(family, d, k)? });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulo_sweep_reaches_half() {
        let fam = ChannelFamily::Modulo { topology: Topology::Cycle };
        let rows = rate_sweep(&fam, &[25], 2..=25, &[0.5], RateObjective::PerSignal).unwrap();
        assert!(rows.iter().all(|r| r.rate_per_signal == 0.0));
        let rows = rate_sweep(&fam, &[25], 2..=25, &[0.45], RateObjective::PerSignal).unwrap();
        assert_eq!(rows.iter().find(|r| r.is_argmax).unwrap().k, 12);
    }

    #[test]
    fn noiseless_sweep_picks_full_alphabet() {
        let rows = rate_sweep(&ChannelFamily::Depolarizing, &[9], 2..=9, &[0.0], RateObjective::PerSignal).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows.iter().filter(|r| r.is_argmax).count(), 1);
        assert!(rows[7].is_argmax);
    }

    #[test]
    fn one_argmax_per_group() {
        let rows = rate_sweep(
            &ChannelFamily::Modulo { topology: Topology::Cycle },
            &[10, 12],
            2..=12,
            &[0.01, 0.1, 0.3],
            RateObjective::PerSignal,
        )
        .unwrap();
        for d in [10, 12] {
            for noise in [0.01, 0.1, 0.3] {
                let n = rows.iter().filter(|r| r.d == d && r.noise == noise && r.is_argmax).count();
                assert_eq!(n, 1);
            }
        }
        assert!(rows.iter().all(|r| r.k <= r.d));
    }

    #[test]
    fn block_size_defaults_to_square_root() {
        let fam = ChannelFamily::BlockBias { eps1: 0.3, s: None };
        assert_eq!(fam.block_size(25), Some(5));
        assert_eq!(fam.block_size(24), None);
        let fam = ChannelFamily::BlockBias { eps1: 0.3, s: Some(4) };
        assert_eq!(fam.block_size(24), Some(4));
        assert_eq!(fam.block_size(25), None);
    }

    #[test]
    fn modulo_plateau() {
        let fam = ChannelFamily::Modulo { topology: Topology::Cycle };
        for k in 2..=12 {
            assert_eq!(cell_threshold::<f64>(&fam, 25, k).unwrap().value(), Some(0.5));
        }
        assert!(cell_threshold::<f64>(&fam, 25, 13).unwrap().value().unwrap() < 0.5);
    }

    #[test]
    fn empty_cells() {
        let rows = threshold_table(&ChannelFamily::Depolarizing, 3..=4, 2..=5).unwrap();
        let empty: Vec<(usize, usize)> =
            rows.iter().filter(|r| r.threshold == CellThreshold::Empty).map(|r| (r.d, r.k)).collect();
        assert_eq!(empty, vec![(3, 4), (3, 5), (4, 5)]);
        let fam = ChannelFamily::BlockBias { eps1: 0.07, s: None };
        assert_eq!(cell_threshold::<f64>(&fam, 10, 3).unwrap(), CellThreshold::Empty);
    }

    #[test]
    fn f32_thresholds_track_f64() {
        let fam = ChannelFamily::Depolarizing;
        let a = cell_threshold::<f32>(&fam, 25, 5).unwrap().value().unwrap();
        let b = cell_threshold::<f64>(&fam, 25, 5).unwrap().value().unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn crossover_bracket_errors() {
        // d = 2 only has k = 2: full alphabet always optimal
        assert!(crossover_noise(&ChannelFamily::Depolarizing, 2, RateObjective::PerSignal).is_err());
    }
}
