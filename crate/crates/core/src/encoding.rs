//! Signal sets: k-element index subsets of `{0, …, d-1}`, their adjacency and
//! block-occupancy geometry, constructive optima and an exhaustive oracle.

use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of subsets [`brute_force_optimal`] will enumerate.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// Sorted set of `k >= 2` distinct basis indices in `[0, d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexEncoding {
    d: usize,
    indices: Vec<usize>,
}

impl IndexEncoding {
    /// Builds an encoding from indices in any order; duplicates are rejected.
    pub fn new(d: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "encoding needs at least 2 indices, got {}",
                indices.len()
            )));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams(format!("duplicate index {} in encoding", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= d {
                return Err(Error::InvalidParams(format!("index {last} out of range for d = {d}")));
            }
        }
        Ok(Self { d, indices })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Position of `index` within the signal set, i.e. the symbol it carries.
    pub fn symbol_of(&self, index: usize) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    /// Membership mask over `[0, d)`.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.d];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }
}

impl fmt::Display for IndexEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.indices.iter().enumerate() {
            if n > 0 {
                write!(f, " ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Nearest-neighbour graph the modulo channel hops on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// `x ± 1 mod d`.
    #[default]
    Cycle,
    /// Open chain: no edge between `0` and `d-1`.
    Path,
}

impl Topology {
    /// Neighbours of `x`, with multiplicity (on `C_2` both directions reach the same vertex).
    pub fn neighbours(self, x: usize, d: usize) -> impl Iterator<Item = usize> {
        let (up, down) = match self {
            Topology::Cycle => (Some((x + 1) % d), Some((x + d - 1) % d)),
            Topology::Path => ((x + 1 < d).then_some(x + 1), x.checked_sub(1)),
        };
        up.into_iter().chain(down)
    }

    pub fn degree(self, x: usize, d: usize) -> usize {
        self.neighbours(x, d).count()
    }
}

/// Directed internal (`w`) and boundary (`b`) adjacency counts of a signal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AdjacencyCounts {
    pub w: u64,
    pub b: u64,
}

/// Counts directed neighbour pairs `(x ∈ S, y)` with `y` inside (`w`) or outside (`b`) the set.
pub fn modulo_counts(encoding: &IndexEncoding, topology: Topology) -> AdjacencyCounts {
    let d = encoding.d();
    let mask = encoding.mask();
    let (mut w, mut b) = (0, 0);
    for &x in encoding.indices() {
        for y in topology.neighbours(x, d) {
            if mask[y] {
                w += 1;
            } else {
                b += 1;
            }
        }
    }
    AdjacencyCounts { w, b }
}

fn check_kd(d: usize, k: usize) -> Result<()> {
    if k < 2 || k > d {
        return Err(Error::InvalidParams(format!("need 2 <= k <= d, got k = {k}, d = {d}")));
    }
    Ok(())
}

fn check_block(d: usize, s: usize) -> Result<()> {
    if s == 0 || !d.is_multiple_of(s) {
        return Err(Error::InvalidParams(format!("block size s = {s} does not divide d = {d}")));
    }
    Ok(())
}

/// First `k` basis states, `{0, …, k-1}`.
pub fn truncation_encoding(d: usize, k: usize) -> Result<IndexEncoding> {
    check_kd(d, k)?;
    IndexEncoding::new(d, (0..k).collect())
}

/// Indices `⌊j d / k⌋`, `j = 0..k`. No internal adjacencies on the cycle when `k <= ⌊d/2⌋`.
pub fn evenly_spaced_encoding(d: usize, k: usize) -> Result<IndexEncoding> {
    check_kd(d, k)?;
    IndexEncoding::new(d, (0..k).map(|j| j * d / k).collect())
}

/// Smallest achievable `w` on the cycle `C_d`: `max(0, 2(2k - d))`.
pub fn min_w_on_cycle(d: usize, k: usize) -> Result<u64> {
    check_kd(d, k)?;
    Ok((2 * (2 * k as i64 - d as i64)).max(0) as u64)
}

/// Occupancy `ℓ_m = |S ∩ block m|` of each contiguous block `[m s, (m+1) s)`.
pub fn block_occupancy(encoding: &IndexEncoding, s: usize) -> Result<Vec<usize>> {
    check_block(encoding.d(), s)?;
    let mut occ = vec![0; encoding.d() / s];
    for &i in encoding.indices() {
        occ[i / s] += 1;
    }
    Ok(occ)
}

/// Block overlap `E_b = (1/k) Σ_m ℓ_m²`, exact.
pub fn block_overlap_of(encoding: &IndexEncoding, s: usize) -> Result<Ratio<u64>> {
    let sum_sq: usize = block_occupancy(encoding, s)?.iter().map(|l| l * l).sum();
    Ok(Ratio::new(sum_sq as u64, encoding.k() as u64))
}

/// Minimum block overlap over all k-subsets: occupancies as equal as possible
/// across the `d/s` blocks.
pub fn e_min(d: usize, s: usize, k: usize) -> Result<Ratio<u64>> {
    check_block(d, s)?;
    if k == 0 || k > d {
        return Err(Error::InvalidParams(format!("need 1 <= k <= d, got k = {k}, d = {d}")));
    }
    let blocks = d / s;
    let (q, t) = (k / blocks, k % blocks);
    Ok(Ratio::new((blocks * q * q + 2 * q * t + t) as u64, k as u64))
}

/// Balanced-occupancy signal set: the first `k mod (d/s)` blocks hold one extra
/// index; each block contributes its lowest indices.
pub fn balanced_block_encoding(d: usize, s: usize, k: usize) -> Result<IndexEncoding> {
    check_kd(d, k)?;
    check_block(d, s)?;
    let blocks = d / s;
    let (q, t) = (k / blocks, k % blocks);
    let mut indices = Vec::with_capacity(k);
    for m in 0..blocks {
        let take = if m < t { q + 1 } else { q };
        indices.extend((0..take).map(|r| m * s + r));
    }
    IndexEncoding::new(d, indices)
}

/// Objective minimised by [`brute_force_optimal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Internal adjacency count `w`.
    MinW,
    /// Block overlap `E_b` for block size `s`.
    MinEb { s: usize },
}

fn objective_value(obj: Objective, topology: Topology, d: usize, subset: &[usize]) -> Ratio<u64> {
    match obj {
        Objective::MinW => {
            let mut mask = vec![false; d];
            subset.iter().for_each(|&i| mask[i] = true);
            let w: u64 = subset
                .iter()
                .map(|&x| topology.neighbours(x, d).filter(|&y| mask[y]).count() as u64)
                .sum();
            Ratio::from_integer(w)
        }
        Objective::MinEb { s } => {
            let mut occ = vec![0u64; d / s];
            subset.iter().for_each(|&i| occ[i / s] += 1);
            Ratio::new(occ.iter().map(|l| l * l).sum(), subset.len() as u64)
        }
    }
}

/// `C(n, r)` without overflow for the sizes the enumeration cap allows through.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All k-subsets of `[0, d)` in lexicographic order.
pub fn combinations(d: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = (k <= d).then(|| (0..k).collect());
    std::iter::from_fn(move || {
        let out = current.take()?;
        let mut next = out.clone();
        if next_combination(&mut next, d) {
            current = Some(next);
        }
        Some(out)
    })
}

/// Advances `c` (strictly increasing, values `< n`) to the next combination in
/// lexicographic order. Returns false after the last one.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if c[i] < n - r + i {
            c[i] += 1;
            for j in i + 1..r {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exhaustive search over all k-subsets of `[0, d)`.
///
/// Returns the lexicographically smallest minimiser and the minimum. The work
/// is split by leading index across threads; the reduction is order-independent.
pub fn brute_force_optimal(
    d: usize,
    k: usize,
    objective: Objective,
    topology: Topology,
) -> Result<(IndexEncoding, Ratio<u64>)> {
    check_kd(d, k)?;
    if let Objective::MinEb { s } = objective {
        check_block(d, s)?;
    }
    let count = binomial(d, k);
    if count > ENUMERATION_CAP {
        return Err(Error::InstanceTooLarge { d, k, count, cap: ENUMERATION_CAP });
    }
    let best = (0..=d - k)
        .into_par_iter()
        .filter_map(|first| {
            // combinations whose smallest element is `first`
            let span = d - first - 1;
            let mut rest: Vec<usize> = (0..k - 1).collect();
            let mut subset = vec![first; k];
            let mut best: Option<(Ratio<u64>, Vec<usize>)> = None;
            loop {
                for (slot, &r) in subset[1..].iter_mut().zip(&rest) {
                    *slot = first + 1 + r;
                }
                let v = objective_value(objective, topology, d, &subset);
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, subset.clone()));
                }
                if !next_combination(&mut rest, span) {
                    break;
                }
            }
            best
        })
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .expect("at least one subset");
    Ok((IndexEncoding::new(d, best.1)?, best.0))
}
