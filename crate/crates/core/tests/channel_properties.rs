use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rse_qkd::channels::{
    analytic_stats, block_stats, block_threshold_eps2, build_confusion_model, depol_stats, depol_threshold_eps,
    modulo_stats, modulo_threshold_eps, transition_matrix,
};
use rse_qkd::encoding::modulo_counts;
use rse_qkd::entropy::rate_per_sifted_symbol;
use rse_qkd::{Basis, ChannelSpec, IndexEncoding, KaryParams, Topology};

fn divisors(d: usize) -> Vec<usize> {
    (2..=d).filter(|&s| d.is_multiple_of(s)).collect()
}

fn random_case(rng: &mut ChaCha8Rng) -> (ChannelSpec<f64>, IndexEncoding) {
    loop {
        let d = rng.random_range(2..=30);
        let k = rng.random_range(2..=d);
        let mut idx = sample(rng, d, k).into_vec();
        idx.sort_unstable();
        let enc = IndexEncoding::new(d, idx).unwrap();
        let spec = match rng.random_range(0..3) {
            0 => ChannelSpec::Depolarizing { eps: rng.random() },
            1 => ChannelSpec::Modulo {
                eps: 0.5 * rng.random::<f64>(),
                topology: if rng.random() { Topology::Cycle } else { Topology::Path },
            },
            _ => {
                let divs = divisors(d);
                let s = divs[rng.random_range(0..divs.len())];
                ChannelSpec::BlockBias { eps1: rng.random(), eps2: rng.random(), s }
            }
        };
        if spec.validate(d).is_ok() {
            return (spec, enc);
        }
    }
}

#[test]
fn models_match_closed_forms_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let (spec, enc) = random_case(&mut rng);
        let model = build_confusion_model(&spec, enc.d(), &enc, Basis::Z).unwrap();
        for row in model.rows() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
        let got = model.implied_stats();
        let want = analytic_stats(&spec, &enc).unwrap();
        assert!((got.alpha - want.alpha).abs() < 1e-12, "{spec:?} {enc}");
        assert!((got.q - want.q).abs() < 1e-12, "{spec:?} {enc}");
    }
}

#[test]
fn transition_rows_are_stochastic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let (spec, enc) = random_case(&mut rng);
        for row in transition_matrix(&spec, enc.d()).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn full_alphabet_depolarizing_keeps_all() {
    for d in 2..20 {
        for i in 0..=10 {
            let s = depol_stats(KaryParams::new(d, d).unwrap(), i as f64 / 10.0).unwrap();
            assert!((s.alpha - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn thresholds_zero_the_rate() {
    for d in 2..=30 {
        for k in 2..=d {
            let p = KaryParams::new(k, d).unwrap();
            let eps: f64 = depol_threshold_eps(p).unwrap();
            let s = depol_stats(p, eps).unwrap();
            assert!(rate_per_sifted_symbol(k, s.q, s.q).unwrap().abs() < 1e-9);
        }
    }
    for d in 2..=20 {
        for k in 2..=d {
            let enc = rse_qkd::encoding::evenly_spaced_encoding(d, k).unwrap();
            for topo in [Topology::Cycle, Topology::Path] {
                if modulo_counts(&enc, topo).w == 0 {
                    continue;
                }
                let eps: f64 = modulo_threshold_eps(&enc, topo).unwrap();
                let s = modulo_stats(eps, &enc, topo).unwrap();
                assert!(rate_per_sifted_symbol(k, s.q, s.q).unwrap().abs() < 1e-9, "d={d} k={k} {topo:?}");
            }
        }
    }
}

#[test]
fn block_threshold_consistency_grid() {
    let q_th = |k| rse_qkd::entropy::solve_q_threshold::<f64>(k).unwrap();
    let mut roots = 0;
    for &(d, s) in &[(4usize, 2usize), (9, 3), (16, 4), (25, 5), (12, 3), (12, 4)] {
        for k in 2..=d {
            let e = rse_qkd::Real::from_ratio(rse_qkd::encoding::e_min(d, s, k).unwrap());
            for &eps1 in &[0.0, 0.07, 0.2, 0.5] {
                let p = KaryParams::new(k, d).unwrap();
                if let Some(eps2) = block_threshold_eps2(p, s, eps1, e).unwrap().root() {
                    let st = block_stats(p, s, eps1, eps2, e).unwrap();
                    assert!((st.q - q_th(k)).abs() < 1e-9);
                    roots += 1;
                }
            }
        }
    }
    assert!(roots > 100);
}

proptest! {
    #[test]
    fn modulo_alpha_forms_agree(d in 3usize..40, seed in any::<u64>(), eps in 0.0f64..=0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(2..=d);
        let mut idx = sample(&mut rng, d, k).into_vec();
        idx.sort_unstable();
        let enc = IndexEncoding::new(d, idx).unwrap();
        let c = modulo_counts(&enc, Topology::Cycle);
        prop_assert_eq!(c.w + c.b, 2 * k as u64);
        let via_b = 1.0 - eps / k as f64 * c.b as f64;
        let via_w = 1.0 - 2.0 * eps + eps / k as f64 * c.w as f64;
        prop_assert!((via_b - via_w).abs() < 1e-15);
        let s = modulo_stats(eps, &enc, Topology::Cycle).unwrap();
        prop_assert!((s.alpha - via_b).abs() < 1e-15);
    }

    #[test]
    fn block_q_monotone_in_overlap(e1 in 0.0f64..=1.0, e2 in 0.0f64..1.0) {
        let p = KaryParams::new(12, 36).unwrap();
        let mut prev = -1.0;
        for i in 0..=20 {
            let e = 1.0 + 5.0 * i as f64 / 20.0;
            let q = block_stats(p, 6, e1, e2, e).unwrap().q;
            prop_assert!(q >= prev - 1e-15);
            prev = q;
        }
    }
}
