use rse_qkd::channels::analytic_stats;
use rse_qkd::encoding::{evenly_spaced_encoding, truncation_encoding};
use rse_qkd::entropy::rate_per_signal_with_sifting;
use rse_qkd::montecarlo::{empirical_rate, estimate_stats, sifted_symbols, simulate, SimConfig};
use rse_qkd::{Basis, ChannelSpec, Topology};

fn depol(eps: f64, d: usize, k: usize, n: u64, seed: u64) -> SimConfig {
    SimConfig::new(ChannelSpec::Depolarizing { eps }, truncation_encoding(d, k).unwrap(), n, seed)
}

#[test]
fn depolarizing_estimate_within_four_standard_errors() {
    let cfg = depol(0.1, 25, 5, 10_000_000, 7);
    let want = cfg.analytic_stats().unwrap();
    let est = estimate_stats(&simulate(&cfg).unwrap()).unwrap();
    assert!((est.stats.alpha - want.alpha).abs() <= 4.0 * est.alpha_se);
    assert!((est.stats.q - want.q).abs() <= 4.0 * est.q_se);
}

#[test]
fn standard_error_intervals_cover() {
    let mut covered = 0;
    for seed in 0..100 {
        let cfg = depol(0.2, 9, 3, 100_000, seed);
        let want = cfg.analytic_stats().unwrap();
        let est = estimate_stats(&simulate(&cfg).unwrap()).unwrap();
        if (est.stats.alpha - want.alpha).abs() <= 2.0 * est.alpha_se {
            covered += 1;
        }
    }
    assert!(covered >= 90, "covered {covered}/100");
}

#[test]
fn matched_rounds_are_conserved() {
    let cfg = SimConfig::new(
        ChannelSpec::BlockBias { eps1: 0.3, eps2: 0.1, s: 4 },
        evenly_spaced_encoding(16, 6).unwrap(),
        300_017,
        99,
    );
    let t = simulate(&cfg).unwrap();
    let per_pair: u64 = t.per_pair_counts.iter().flatten().flatten().sum();
    assert_eq!(per_pair, t.matched);
    let (mz, _, _) = t.basis_counts(Basis::Z);
    let (mx, _, _) = t.basis_counts(Basis::X);
    assert_eq!(mz + mx, t.matched);
    let symbols = sifted_symbols(&cfg).unwrap();
    assert_eq!(symbols.len() as u64, t.matched);
    assert_eq!(symbols.iter().filter(|s| s.outcome.is_some()).count() as u64, t.kept);
    assert_eq!(symbols.iter().filter(|s| s.outcome == Some(s.sent)).count() as u64, t.correct);
}

#[test]
fn zero_overlap_modulo_never_errs() {
    let enc = evenly_spaced_encoding(25, 12).unwrap();
    let cfg = SimConfig::new(ChannelSpec::Modulo { eps: 0.49, topology: Topology::Cycle }, enc, 1_000_000, 3);
    let t = simulate(&cfg).unwrap();
    assert_eq!(t.kept, t.correct);
    let est = estimate_stats(&t).unwrap();
    let want = cfg.analytic_stats().unwrap();
    assert!((want.alpha - 0.02).abs() < 1e-12);
    assert!((est.stats.alpha - want.alpha).abs() <= 4.0 * est.alpha_se);
}

#[test]
fn block_bias_rate_within_delta_method_band() {
    let (d, s, k) = (25, 5, 5);
    let enc = rse_qkd::encoding::balanced_block_encoding(d, s, k).unwrap();
    let spec = ChannelSpec::BlockBias { eps1: 0.31, eps2: 0.12, s };
    let cfg = SimConfig::new(spec, enc.clone(), 2_000_000, 41);
    let t = simulate(&cfg).unwrap();
    let est = estimate_stats(&t).unwrap();
    let want = analytic_stats(&spec, &enc).unwrap();
    let r = empirical_rate(&t, k).unwrap();
    let r0 = rate_per_signal_with_sifting(0.5, want.alpha, k, want.q).unwrap();
    // dR/dalpha and dR/dQ at the analytic point, by central differences
    let h = 1e-6;
    let f = |a: f64, q: f64| rate_per_signal_with_sifting(0.5, a, k, q).unwrap();
    let da = (f(want.alpha + h, want.q) - f(want.alpha - h, want.q)) / (2.0 * h);
    let dq = (f(want.alpha, want.q + h) - f(want.alpha, want.q - h)) / (2.0 * h);
    let se = ((da * est.alpha_se).powi(2) + (dq * est.q_se).powi(2)).sqrt();
    assert!(r0 > 0.0);
    assert!((r - r0).abs() <= 4.0 * se, "r={r} r0={r0} se={se}");
}

#[test]
fn biased_basis_choice_keeps_estimates_unbiased() {
    let mut cfg = depol(0.15, 16, 6, 1_000_000, 5);
    cfg.basis_bias = 0.8;
    let t = simulate(&cfg).unwrap();
    let want = cfg.analytic_stats().unwrap();
    let est = estimate_stats(&t).unwrap();
    let expected_matched = cfg.matched_probability() * t.n_rounds as f64;
    let p = cfg.matched_probability();
    assert!((t.matched as f64 - expected_matched).abs() <= 4.0 * (t.n_rounds as f64 * p * (1.0 - p)).sqrt());
    assert!((est.stats.q - want.q).abs() <= 4.0 * est.q_se);
}
