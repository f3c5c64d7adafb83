use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::encoding::IndexEncoding;
use crate::error::{Error, Result};

/// Largest dimension the dense evaluation accepts.
pub const MAX_DENSE_DIMENSION: usize = 64;

/// Fourier state `|mu_t> = d^{-1/2} Σ_j e^{2πi jt/d} |j>` as a column vector.
fn fourier_state(d: usize, t: usize) -> DMatrix<Complex64> {
    let norm = 1.0 / (d as f64).sqrt();
    DMatrix::from_fn(d, 1, |j, _| {
        Complex64::from_polar(norm, 2.0 * std::f64::consts::PI * ((j * t) % d) as f64 / d as f64)
    })
}

/// Z-anchored block map: `Φ(ρ) = Σ_m Π_m/s · Tr(Π_m ρ)`.
fn block_map(rho: &DMatrix<Complex64>, projectors: &[DMatrix<Complex64>], s: usize) -> DMatrix<Complex64> {
    let d = rho.nrows();
    let mut out = DMatrix::zeros(d, d);
    for p in projectors {
        let weight = (p * rho).trace() / s as f64;
        out += p * weight;
    }
    out
}

/// Block overlap seen by X-basis Fourier signals when the block structure is
/// fixed in Z:
/// `E = (s/k) Σ_t Tr(Φ_Z(|mu_t><mu_t|) P_X)`, with `P_X` the projector onto
/// the encoded Fourier states.
///
/// Evaluated with dense `d × d` complex matrices, so only for `d <= 64`.
pub fn cross_basis_overlap(d: usize, s: usize, encoding_x: &IndexEncoding) -> Result<f64> {
    if d > MAX_DENSE_DIMENSION {
        return Err(Error::InvalidParams(format!(
            "dense cross-basis evaluation limited to d <= {MAX_DENSE_DIMENSION}, got {d}"
        )));
    }
    if encoding_x.d() != d {
        return Err(Error::DimensionMismatch { what: "X encoding", expected: d, found: encoding_x.d() });
    }
    if s == 0 || !d.is_multiple_of(s) {
        return Err(Error::InvalidParams(format!("block size s = {s} does not divide d = {d}")));
    }
    let projectors: Vec<DMatrix<Complex64>> = (0..d / s)
        .map(|m| {
            DMatrix::from_fn(d, d, |i, j| {
                if i == j && i / s == m {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    let states: Vec<DMatrix<Complex64>> = encoding_x.indices().iter().map(|&t| fourier_state(d, t)).collect();
    let mut p_x = DMatrix::<Complex64>::zeros(d, d);
    for v in &states {
        p_x += v * v.adjoint();
    }
    let total: Complex64 = states
        .iter()
        .map(|v| {
            let rho = v * v.adjoint();
            (block_map(&rho, &projectors, s) * &p_x).trace()
        })
        .sum();
    Ok(s as f64 / encoding_x.k() as f64 * total.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{evenly_spaced_encoding, truncation_encoding};
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_block_keeps_everything() {
        for d in [2, 3, 5] {
            let e = truncation_encoding(d, d).unwrap();
            assert_abs_diff_eq!(cross_basis_overlap(d, d, &e).unwrap(), d as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn fourier_states_spread_uniformly() {
        for e in [truncation_encoding(25, 5).unwrap(), evenly_spaced_encoding(25, 5).unwrap()] {
            assert_abs_diff_eq!(cross_basis_overlap(25, 5, &e).unwrap(), 1.0, epsilon = 1e-12);
        }
        let all = truncation_encoding(25, 25).unwrap();
        assert_abs_diff_eq!(cross_basis_overlap(25, 5, &all).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_large_dimension() {
        let e = truncation_encoding(65, 2).unwrap();
        assert!(cross_basis_overlap(65, 5, &e).is_err());
    }
}
