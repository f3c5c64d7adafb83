//! Round-level simulation of the reduced-state protocol: independent basis
//! choices for both parties, a uniform symbol, an outcome drawn from the
//! channel's confusion model, and basis sifting.
//!
//! Rounds are cut into fixed-size shards. Shard `i` draws from ChaCha8 seeded
//! with the run seed on stream `i`, so the merged tally does not depend on how
//! shards are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{analytic_stats, build_confusion_model, Basis, ChannelSpec, ConfusionModel, KeptStats};
use crate::encoding::IndexEncoding;
use crate::entropy::{max_dit_error, rate_per_signal_with_sifting};
use crate::error::{Error, Result};

/// Identifier of the generator and stream layout, recorded with every tally.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64+stream=shard/shard=65536";

/// Rounds per RNG stream.
pub const SHARD_ROUNDS: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub spec: ChannelSpec<f64>,
    pub d: usize,
    pub k: usize,
    pub encoding: IndexEncoding,
    pub n_rounds: u64,
    pub seed: u64,
    /// Probability that either party picks Z.
    pub basis_bias: f64,
}

impl SimConfig {
    pub fn new(spec: ChannelSpec<f64>, encoding: IndexEncoding, n_rounds: u64, seed: u64) -> Self {
        Self { spec, d: encoding.d(), k: encoding.k(), encoding, n_rounds, seed, basis_bias: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::InvalidParams("n_rounds must be at least 1".into()));
        }
        if !(self.basis_bias > 0.0 && self.basis_bias < 1.0) {
            return Err(Error::InvalidParams(format!("basis bias {} outside (0, 1)", self.basis_bias)));
        }
        if self.encoding.d() != self.d {
            return Err(Error::DimensionMismatch { what: "encoding", expected: self.d, found: self.encoding.d() });
        }
        if self.encoding.k() != self.k {
            return Err(Error::InvalidParams(format!(
                "encoding has {} symbols, config says k = {}",
                self.encoding.k(),
                self.k
            )));
        }
        self.spec.validate(self.d)
    }

    /// Closed-form `(alpha, Q)` for this configuration.
    pub fn analytic_stats(&self) -> Result<KeptStats<f64>> {
        analytic_stats(&self.spec, &self.encoding)
    }

    /// Expected basis-matched fraction, `bias² + (1-bias)²`.
    pub fn matched_probability(&self) -> f64 {
        self.basis_bias * self.basis_bias + (1.0 - self.basis_bias) * (1.0 - self.basis_bias)
    }
}

/// Integer counts from a run. Merging is plain addition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tally {
    pub n_rounds: u64,
    pub matched: u64,
    pub kept: u64,
    pub correct: u64,
    /// Per basis (Z then X): `k × (k+1)` counts of (sent symbol, outcome) over
    /// basis-matched rounds; the last column is the inconclusive outcome.
    pub per_pair_counts: [Vec<Vec<u64>>; 2],
    pub basis_bias: f64,
    pub rng: String,
}

impl Tally {
    fn empty(k: usize, basis_bias: f64) -> Self {
        Self {
            n_rounds: 0,
            matched: 0,
            kept: 0,
            correct: 0,
            per_pair_counts: [vec![vec![0; k + 1]; k], vec![vec![0; k + 1]; k]],
            basis_bias,
            rng: RNG_ALGORITHM.to_string(),
        }
    }

    pub fn k(&self) -> usize {
        self.per_pair_counts[0].len()
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.n_rounds += other.n_rounds;
        self.matched += other.matched;
        self.kept += other.kept;
        self.correct += other.correct;
        for (mine, theirs) in self.per_pair_counts.iter_mut().zip(other.per_pair_counts) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
        self
    }

    /// Matched, kept and correct counts restricted to one basis.
    pub fn basis_counts(&self, basis: Basis) -> (u64, u64, u64) {
        let k = self.k();
        let m = &self.per_pair_counts[basis.index()];
        let matched = m.iter().flatten().sum();
        let kept = m.iter().map(|row| row[..k].iter().sum::<u64>()).sum();
        let correct = (0..k).map(|x| m[x][x]).sum();
        (matched, kept, correct)
    }
}

/// One basis-matched round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SiftedSymbol {
    pub basis: Basis,
    pub sent: u32,
    /// `None` for the inconclusive outcome.
    pub outcome: Option<u32>,
}

/// Cumulative outcome tables for both bases; the last entry is pinned to 1 so
/// rounding mass lands on the inconclusive outcome.
struct Sampler {
    k: usize,
    cumulative: [Vec<Vec<f64>>; 2],
}

impl Sampler {
    fn new(models: [&ConfusionModel<f64>; 2]) -> Self {
        let build = |m: &ConfusionModel<f64>| {
            m.rows()
                .iter()
                .map(|row| {
                    let mut acc = 0.0;
                    let mut c: Vec<f64> = row
                        .iter()
                        .map(|p| {
                            acc += p;
                            acc
                        })
                        .collect();
                    *c.last_mut().expect("non-empty row") = 1.0;
                    c
                })
                .collect()
        };
        Self { k: models[0].k(), cumulative: [build(models[0]), build(models[1])] }
    }

    #[inline]
    fn outcome(&self, basis: Basis, sent: usize, u: f64) -> usize {
        let c = &self.cumulative[basis.index()][sent];
        c.partition_point(|&x| x <= u).min(self.k)
    }
}

fn models_for(config: &SimConfig) -> Result<(ConfusionModel<f64>, ConfusionModel<f64>)> {
    config.validate()?;
    let z = build_confusion_model(&config.spec, config.d, &config.encoding, Basis::Z)?;
    let x = z.with_basis(Basis::X);
    Ok((z, x))
}

fn shard_count(n_rounds: u64) -> u64 {
    n_rounds.div_ceil(SHARD_ROUNDS)
}

/// Plays the rounds of one shard, reporting basis-matched rounds to `visit`.
fn run_shard(config: &SimConfig, sampler: &Sampler, shard: u64, mut visit: impl FnMut(Basis, usize, usize)) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(shard);
    let start = shard * SHARD_ROUNDS;
    let rounds = SHARD_ROUNDS.min(config.n_rounds - start);
    let pick = |rng: &mut ChaCha8Rng| if rng.random::<f64>() < config.basis_bias { Basis::Z } else { Basis::X };
    for _ in 0..rounds {
        let alice = pick(&mut rng);
        let bob = pick(&mut rng);
        let sent = rng.random_range(0..config.k);
        let u: f64 = rng.random();
        if alice == bob {
            visit(alice, sent, sampler.outcome(alice, sent, u));
        }
    }
    rounds
}

/// Runs the protocol for `config.n_rounds` rounds. Deterministic in the seed,
/// independent of the rayon thread count.
pub fn simulate(config: &SimConfig) -> Result<Tally> {
    let (z, x) = models_for(config)?;
    let sampler = Sampler::new([&z, &x]);
    let k = config.k;
    let tally = (0..shard_count(config.n_rounds))
        .into_par_iter()
        .map(|shard| {
            let mut t = Tally::empty(k, config.basis_bias);
            t.n_rounds = run_shard(config, &sampler, shard, |basis, sent, outcome| {
                t.per_pair_counts[basis.index()][sent][outcome] += 1;
            });
            for m in &t.per_pair_counts {
                for (xs, row) in m.iter().enumerate() {
                    let total: u64 = row.iter().sum();
                    t.matched += total;
                    t.kept += total - row[k];
                    t.correct += row[xs];
                }
            }
            t
        })
        .reduce(|| Tally::empty(k, config.basis_bias), Tally::merge);
    Ok(tally)
}

/// The basis-matched record of every round, in round order. Uses the same
/// streams as [`simulate`], so it is consistent with the tally for the same
/// config. Test/key splitting is left to the caller.
pub fn sifted_symbols(config: &SimConfig) -> Result<Vec<SiftedSymbol>> {
    let (z, x) = models_for(config)?;
    let sampler = Sampler::new([&z, &x]);
    let k = config.k;
    let chunks: Vec<Vec<SiftedSymbol>> = (0..shard_count(config.n_rounds))
        .into_par_iter()
        .map(|shard| {
            let mut out = Vec::new();
            run_shard(config, &sampler, shard, |basis, sent, outcome| {
                out.push(SiftedSymbol {
                    basis,
                    sent: sent as u32,
                    outcome: (outcome < k).then_some(outcome as u32),
                });
            });
            out
        })
        .collect();
    Ok(chunks.concat())
}

/// Empirical `(alpha, Q)` with binomial standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub stats: KeptStats<f64>,
    pub alpha_se: f64,
    pub q_se: f64,
    /// Set when no round was kept; `alpha` and `q` are then 0.
    pub no_kept_events: bool,
}

/// `alpha = kept / matched`, `Q = 1 - correct / kept`.
pub fn estimate_stats(tally: &Tally) -> Result<Estimate> {
    if tally.matched == 0 {
        return Err(Error::InsufficientData("no basis-matched rounds".into()));
    }
    let matched = tally.matched as f64;
    let alpha = tally.kept as f64 / matched;
    let alpha_se = (alpha * (1.0 - alpha) / matched).sqrt();
    if tally.kept == 0 {
        return Ok(Estimate { stats: KeptStats { alpha: 0.0, q: 0.0 }, alpha_se, q_se: 0.0, no_kept_events: true });
    }
    let kept = tally.kept as f64;
    let q = 1.0 - tally.correct as f64 / kept;
    let q_se = (q * (1.0 - q) / kept).sqrt();
    Ok(Estimate { stats: KeptStats { alpha, q }, alpha_se, q_se, no_kept_events: false })
}

/// Secret bits per signal from the empirical stats. Uses the ideal sifting
/// factor `1/2` for uniform basis choice and the observed matched fraction
/// otherwise.
pub fn empirical_rate(tally: &Tally, k: usize) -> Result<f64> {
    let est = estimate_stats(tally)?;
    if est.no_kept_events {
        return Ok(0.0);
    }
    let sifting = if tally.basis_bias == 0.5 { 0.5 } else { tally.matched as f64 / tally.n_rounds as f64 };
    // sampling noise can push Q past (k-1)/k; the rate there is zero anyway
    let q = est.stats.q.min(max_dit_error::<f64>(k));
    rate_per_signal_with_sifting(sifting, est.stats.alpha, k, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{truncation_encoding, Topology};

    fn depol(eps: f64, d: usize, k: usize, n: u64, seed: u64) -> SimConfig {
        SimConfig::new(ChannelSpec::Depolarizing { eps }, truncation_encoding(d, k).unwrap(), n, seed)
    }

    #[test]
    fn noiseless_keeps_everything_correctly() {
        let t = simulate(&depol(0.0, 9, 4, 100_000, 3)).unwrap();
        assert_eq!(t.n_rounds, 100_000);
        assert_eq!(t.kept, t.matched);
        assert_eq!(t.correct, t.kept);
        let e = estimate_stats(&t).unwrap();
        assert_eq!((e.stats.alpha, e.stats.q), (1.0, 0.0));
    }

    #[test]
    fn tally_invariants() {
        let t = simulate(&depol(0.4, 9, 4, 200_003, 11)).unwrap();
        assert!(t.kept <= t.matched && t.matched <= t.n_rounds && t.correct <= t.kept);
        let (mz, kz, cz) = t.basis_counts(Basis::Z);
        let (mx, kx, cx) = t.basis_counts(Basis::X);
        assert_eq!((mz + mx, kz + kx, cz + cx), (t.matched, t.kept, t.correct));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = simulate(&depol(0.2, 9, 4, 150_000, 5)).unwrap();
        let b = simulate(&depol(0.2, 9, 4, 150_000, 5)).unwrap();
        let c = simulate(&depol(0.2, 9, 4, 150_000, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spaced_modulo_has_no_kept_errors() {
        let e = IndexEncoding::new(6, vec![0, 2, 4]).unwrap();
        let cfg = SimConfig::new(ChannelSpec::Modulo { eps: 0.2, topology: Topology::Cycle }, e, 1_000_000, 1);
        let t = simulate(&cfg).unwrap();
        assert_eq!(t.correct, t.kept);
        assert!(t.kept < t.matched);
    }

    #[test]
    fn estimate_degenerate_cases() {
        let mut t = Tally::empty(2, 0.5);
        assert!(estimate_stats(&t).is_err());
        t.matched = 10;
        t.n_rounds = 20;
        let e = estimate_stats(&t).unwrap();
        assert!(e.no_kept_events);
        assert_eq!(e.stats.alpha, 0.0);
        assert_eq!(empirical_rate(&t, 2).unwrap(), 0.0);
    }

    #[test]
    fn sifted_records_agree_with_tally() {
        let cfg = depol(0.3, 8, 3, 140_000, 9);
        let t = simulate(&cfg).unwrap();
        let recs = sifted_symbols(&cfg).unwrap();
        assert_eq!(recs.len() as u64, t.matched);
        let kept = recs.iter().filter(|r| r.outcome.is_some()).count() as u64;
        let correct = recs.iter().filter(|r| r.outcome == Some(r.sent)).count() as u64;
        assert_eq!((kept, correct), (t.kept, t.correct));
    }

    #[test]
    fn config_validation() {
        let mut cfg = depol(0.1, 6, 3, 0, 1);
        assert!(simulate(&cfg).is_err());
        cfg.n_rounds = 10;
        cfg.basis_bias = 1.0;
        assert!(simulate(&cfg).is_err());
        cfg.basis_bias = 0.5;
        cfg.d = 7;
        assert!(matches!(simulate(&cfg), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn biased_bases_use_observed_matching() {
        let mut cfg = depol(0.0, 2, 2, 400_000, 21);
        cfg.basis_bias = 0.8;
        let t = simulate(&cfg).unwrap();
        let frac = t.matched as f64 / t.n_rounds as f64;
        assert!((frac - 0.68).abs() < 4.0 * (0.68 * 0.32 / 400_000f64).sqrt());
        assert!((empirical_rate(&t, 2).unwrap() - frac).abs() < 1e-15);
    }
}
