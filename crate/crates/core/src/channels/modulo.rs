use super::KeptStats;
use crate::encoding::{modulo_counts, IndexEncoding, Topology};
use crate::entropy::solve_q_threshold;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `alpha = 1 - (eps/k) B`, `Q = (eps/k) W / alpha`, with `(W, B)` the directed
/// adjacency counts of `encoding` on `topology`.
///
/// At `eps = 1/2` with `W = 0` nothing is kept; the result is `alpha = q = 0`.
pub fn modulo_stats<T: Real>(eps: T, encoding: &IndexEncoding, topology: Topology) -> Result<KeptStats<T>> {
    if eps.is_nan() || eps < T::zero() || eps > T::half() {
        return Err(Error::InvalidParams(format!("eps = {eps} outside [0, 1/2]")));
    }
    let counts = modulo_counts(encoding, topology);
    let per_symbol = eps / T::count(encoding.k());
    let alpha = T::one() - per_symbol * T::lit(counts.b as f64);
    let error_mass = per_symbol * T::lit(counts.w as f64);
    Ok(KeptStats::from_error_mass(alpha, error_mass))
}

/// Symmetric-design physical threshold `Q^th / (2 Q^th + (W/k)(1 - Q^th))`;
/// `1/2` for sets without internal adjacencies.
///
/// On the path graph the denominator uses the directed boundary count instead
/// of the cycle identity `B = 2k - W`.
pub fn modulo_threshold_eps<T: Real>(encoding: &IndexEncoding, topology: Topology) -> Result<T> {
    let k = encoding.k();
    let q = solve_q_threshold::<T>(k)?;
    let counts = modulo_counts(encoding, topology);
    if counts.w == 0 {
        return Ok(T::half());
    }
    let kk = T::count(k);
    let w = T::lit(counts.w as f64) / kk;
    let b = T::lit(counts.b as f64) / kk;
    // Q alpha = eps W/k with alpha = 1 - eps B/k  =>  eps = Q / (W/k + Q B/k)
    let eps = q / (w + q * b);
    Ok(eps.min(T::half()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::truncation_encoding;
    use approx::assert_abs_diff_eq;

    fn enc(d: usize, idx: &[usize]) -> IndexEncoding {
        IndexEncoding::new(d, idx.to_vec()).unwrap()
    }

    #[test]
    fn spaced_set_filters_every_flip() {
        let s = modulo_stats(0.2, &enc(6, &[0, 2, 4]), Topology::Cycle).unwrap();
        assert_abs_diff_eq!(s.alpha, 0.6, epsilon = 1e-15);
        assert_eq!(s.q, 0.0);
    }

    #[test]
    fn noiseless() {
        let s = modulo_stats(0.0, &enc(6, &[0, 1, 3]), Topology::Cycle).unwrap();
        assert_eq!((s.alpha, s.q), (1.0, 0.0));
    }

    #[test]
    fn full_set_keeps_all_flips() {
        let s = modulo_stats(0.1, &truncation_encoding(6, 6).unwrap(), Topology::Cycle).unwrap();
        assert_abs_diff_eq!(s.alpha, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.q, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn half_noise_without_adjacency_keeps_nothing() {
        let s = modulo_stats(0.5, &enc(6, &[0, 2, 4]), Topology::Cycle).unwrap();
        assert!(!s.has_kept_events());
        assert_eq!((s.alpha, s.q), (0.0, 0.0));
    }

    #[test]
    fn eps_out_of_range() {
        assert!(modulo_stats(0.6, &enc(6, &[0, 2]), Topology::Cycle).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(modulo_threshold_eps::<f64>(&enc(6, &[0, 2, 4]), Topology::Cycle).unwrap(), 0.5);
        let q6: f64 = solve_q_threshold(6).unwrap();
        let t: f64 = modulo_threshold_eps(&truncation_encoding(6, 6).unwrap(), Topology::Cycle).unwrap();
        assert_abs_diff_eq!(t, q6 / (2.0 * q6 + 2.0 * (1.0 - q6)), epsilon = 1e-15);
        assert_abs_diff_eq!(t, 0.1126, epsilon = 1e-4);
        let t: f64 = modulo_threshold_eps(&enc(4, &[0, 1]), Topology::Cycle).unwrap();
        assert_abs_diff_eq!(t, 0.1100 / (0.2200 + 0.8900), epsilon = 1e-4);
    }

    #[test]
    fn cycle_threshold_equals_closed_form() {
        for (d, idx) in [(8usize, vec![0usize, 1, 2, 5]), (5, vec![0, 1, 2, 3]), (9, vec![0, 1, 4, 5, 7])] {
            let e = enc(d, &idx);
            let k = e.k() as f64;
            let w = modulo_counts(&e, Topology::Cycle).w as f64;
            let q: f64 = solve_q_threshold(e.k()).unwrap();
            let closed = q / (2.0 * q + (w / k) * (1.0 - q));
            assert_abs_diff_eq!(modulo_threshold_eps::<f64>(&e, Topology::Cycle).unwrap(), closed, epsilon = 1e-14);
        }
    }
}
