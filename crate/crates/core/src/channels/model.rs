use serde::Serialize;

use super::{block_populations, Basis, ChannelSpec, KeptStats};
use crate::encoding::IndexEncoding;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Full `d × d` detection matrix: row `i` is `P[detect j | sent i]`.
pub fn transition_matrix<T: Real>(spec: &ChannelSpec<T>, d: usize) -> Result<Vec<Vec<T>>> {
    if d < 2 {
        return Err(Error::InvalidParams(format!("dimension d = {d} must be at least 2")));
    }
    spec.validate(d)?;
    let mut m = vec![vec![T::zero(); d]; d];
    match *spec {
        ChannelSpec::Depolarizing { eps } => {
            let off = eps / T::count(d);
            for (i, row) in m.iter_mut().enumerate() {
                row.fill(off);
                row[i] = T::one() - eps + off;
            }
        }
        ChannelSpec::Modulo { eps, topology } => {
            for (i, row) in m.iter_mut().enumerate() {
                let mut stay = T::one();
                for j in topology.neighbours(i, d) {
                    row[j] = row[j] + eps;
                    stay = stay - eps;
                }
                row[i] = row[i] + stay;
            }
        }
        ChannelSpec::BlockBias { eps1, eps2, s } => {
            let pop = block_populations(d, s, eps1, eps2)?;
            for (i, row) in m.iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = if i == j {
                        pop.correct
                    } else if i / s == j / s {
                        pop.in_block
                    } else {
                        pop.cross_block
                    };
                }
            }
        }
    }
    Ok(m)
}

/// Per-symbol outcome distribution over the `k` conclusive results plus the
/// inconclusive one (last column).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionModel<T> {
    rows: Vec<Vec<T>>,
    basis: Basis,
}

impl<T: Real> ConfusionModel<T> {
    /// Validates shape, non-negativity and row sums (1e-12, or a few ulps for f32).
    pub fn from_rows(rows: Vec<Vec<T>>, basis: Basis) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::InvalidParams(format!("confusion model needs k >= 2 rows, got {k}")));
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::count(4 * (k + 1)));
        for (x, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::InvalidParams(format!(
                    "row {x} has {} entries, expected {}",
                    row.len(),
                    k + 1
                )));
            }
            if row.iter().any(|p| p.is_nan() || *p < T::zero()) {
                return Err(Error::InvalidParams(format!("row {x} has a negative or NaN entry")));
            }
            let sum = row.iter().fold(T::zero(), |a, &b| a + b);
            if (sum - T::one()).abs() > tol {
                return Err(Error::InvalidParams(format!("row {x} sums to {sum}")));
            }
        }
        Ok(Self { rows, basis })
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    /// `P[outcome | sent symbol]`; `outcome == k` is the inconclusive result.
    pub fn prob(&self, sent: usize, outcome: usize) -> T {
        self.rows[sent][outcome]
    }

    pub fn inconclusive(&self, sent: usize) -> T {
        self.rows[sent][self.k()]
    }

    /// Same model relabelled to another basis (symmetric design).
    pub fn with_basis(&self, basis: Basis) -> Self {
        Self { rows: self.rows.clone(), basis }
    }

    /// `(alpha, Q)` implied by uniform symbol choice.
    pub fn implied_stats(&self) -> KeptStats<T> {
        let k = self.k();
        let kk = T::count(k);
        let mut kept = T::zero();
        let mut errors = T::zero();
        for (x, row) in self.rows.iter().enumerate() {
            for (y, &p) in row[..k].iter().enumerate() {
                kept = kept + p;
                if y != x {
                    errors = errors + p;
                }
            }
        }
        KeptStats::from_error_mass(kept / kk, errors / kk)
    }
}

/// Restricts the channel's detection matrix to the signal set: conclusive
/// outcome `y` collects the probability of detecting `encoding[y]`; all other
/// detections are inconclusive.
pub fn build_confusion_model<T: Real>(
    spec: &ChannelSpec<T>,
    d: usize,
    encoding: &IndexEncoding,
    basis: Basis,
) -> Result<ConfusionModel<T>> {
    if encoding.d() != d {
        return Err(Error::DimensionMismatch { what: "encoding", expected: d, found: encoding.d() });
    }
    let full = transition_matrix(spec, d)?;
    let mask = encoding.mask();
    let rows = encoding
        .indices()
        .iter()
        .map(|&i| {
            let src = &full[i];
            let mut row: Vec<T> = encoding.indices().iter().map(|&j| src[j]).collect();
            let lost = src
                .iter()
                .zip(&mask)
                .filter(|(_, &inside)| !inside)
                .fold(T::zero(), |a, (&p, _)| a + p);
            row.push(lost);
            row
        })
        .collect();
    ConfusionModel::from_rows(rows, basis)
}
