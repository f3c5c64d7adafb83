//! Measured confusion counts: parsing, per-subset `(alpha, Q)` estimates,
//! block-bias parameter fitting and the signal-set size sweep.
//!
//! Text format, one block per basis:
//!
//! ```text
//! d=3,basis=Z
//! 90,5,5
//! 4,92,4
//! 5,5,90
//! ```
//!
//! Blocks may be concatenated in one stream or split across files.

use std::io::{BufRead, Write};
use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::channels::{block_populations, transition_matrix, Basis, ChannelSpec, KeptStats};
use crate::encoding::{balanced_block_encoding, binomial, combinations, IndexEncoding, ENUMERATION_CAP};
use crate::entropy::{max_dit_error, rate_per_sifted_symbol};
use crate::error::{Error, Result};

/// `counts[i][j]`: coincidences with sent index `i` and detected index `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountMatrix {
    d: usize,
    basis: Basis,
    counts: Vec<Vec<u64>>,
}

impl CountMatrix {
    pub fn new(basis: Basis, counts: Vec<Vec<u64>>) -> Result<Self> {
        let d = counts.len();
        if d < 2 {
            return Err(Error::InvalidParams(format!("count matrix needs d >= 2, got {d}")));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Ragged { line: i + 2, expected: d, found: row.len() });
            }
        }
        Ok(Self { d, basis, counts })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn scaled(&self, factor: u64) -> Self {
        let counts = self.counts.iter().map(|r| r.iter().map(|c| c * factor).collect()).collect();
        Self { d: self.d, basis: self.basis, counts }
    }

    /// Multiplies each row by its own factor (different per-symbol exposure).
    pub fn row_scaled(&self, factors: &[u64]) -> Self {
        let counts = self
            .counts
            .iter()
            .zip(factors.iter().cycle())
            .map(|(r, f)| r.iter().map(|c| c * f).collect())
            .collect();
        Self { d: self.d, basis: self.basis, counts }
    }
}

/// Counts for both bases of one experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountPair {
    pub z: CountMatrix,
    pub x: CountMatrix,
}

impl CountPair {
    /// Pairs the parsed blocks. A single block stands in for both bases.
    pub fn from_matrices(matrices: Vec<CountMatrix>) -> Result<Self> {
        let mut z = None;
        let mut x = None;
        for m in matrices {
            let slot = match m.basis {
                Basis::Z => &mut z,
                Basis::X => &mut x,
            };
            if slot.is_some() {
                return Err(Error::InvalidParams(format!("basis {} given more than once", m.basis)));
            }
            *slot = Some(m);
        }
        let (z, x) = match (z, x) {
            (Some(z), Some(x)) => (z, x),
            (Some(z), None) => {
                let x = CountMatrix { basis: Basis::X, ..z.clone() };
                (z, x)
            }
            (None, Some(x)) => {
                let z = CountMatrix { basis: Basis::Z, ..x.clone() };
                (z, x)
            }
            (None, None) => return Err(Error::InsufficientData("no count matrix in input".into())),
        };
        if z.d != x.d {
            return Err(Error::DimensionMismatch { what: "X counts", expected: z.d, found: x.d });
        }
        Ok(Self { z, x })
    }

    pub fn d(&self) -> usize {
        self.z.d
    }

    pub fn get(&self, basis: Basis) -> &CountMatrix {
        match basis {
            Basis::Z => &self.z,
            Basis::X => &self.x,
        }
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, Basis)> {
    let err = |column: usize, message: String| Error::Parse { line: line_no, column, message };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 2 {
        return Err(err(1, format!("expected header 'd=<int>,basis=<Z|X>', found '{line}'")));
    }
    let d = fields[0]
        .trim()
        .strip_prefix("d=")
        .ok_or_else(|| err(1, format!("expected 'd=<int>', found '{}'", fields[0])))?
        .parse::<usize>()
        .map_err(|e| err(1, format!("bad dimension: {e}")))?;
    if d < 2 {
        return Err(err(1, format!("dimension d = {d} must be at least 2")));
    }
    let basis = fields[1]
        .trim()
        .strip_prefix("basis=")
        .ok_or_else(|| err(2, format!("expected 'basis=<Z|X>', found '{}'", fields[1])))?;
    let basis = match basis {
        "Z" => Basis::Z,
        "X" => Basis::X,
        other => return Err(err(2, format!("unknown basis '{other}'"))),
    };
    Ok((d, basis))
}

/// Parses every count block in `reader`.
pub fn parse_counts(reader: impl BufRead) -> Result<Vec<CountMatrix>> {
    let mut out = Vec::new();
    let mut current: Option<(usize, Basis, Vec<Vec<u64>>, usize)> = None;
    let mut last_line = 0;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        last_line = line_no;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match current.as_mut() {
            None => {
                let (d, basis) = parse_header(line, line_no)?;
                current = Some((d, basis, Vec::with_capacity(d), line_no));
            }
            Some((d, _, rows, _)) => {
                let d = *d;
                let row_index = rows.len();
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != d {
                    return Err(Error::Ragged { line: line_no, expected: d, found: fields.len() });
                }
                let mut row = Vec::with_capacity(d);
                for (c, f) in fields.iter().enumerate() {
                    let v: i64 = f.trim().parse().map_err(|e| Error::Parse {
                        line: line_no,
                        column: c + 1,
                        message: format!("'{f}' is not an integer count: {e}"),
                    })?;
                    if v < 0 {
                        return Err(Error::NegativeEntry { row: row_index, column: c, value: v });
                    }
                    row.push(v as u64);
                }
                rows.push(row);
                if rows.len() == d {
                    let (_, basis, rows, _) = current.take().expect("block in progress");
                    out.push(CountMatrix { d, basis, counts: rows });
                }
            }
        }
    }
    if let Some((d, _, rows, header_line)) = current {
        return Err(Error::Parse {
            line: last_line.max(header_line),
            column: 1,
            message: format!("block starting at line {header_line} has {} of {d} rows", rows.len()),
        });
    }
    Ok(out)
}

/// Reads a stream holding the Z and X blocks (or one block used for both).
pub fn load_counts(reader: impl BufRead) -> Result<CountPair> {
    CountPair::from_matrices(parse_counts(reader)?)
}

pub fn write_counts(matrix: &CountMatrix, mut w: impl Write) -> Result<()> {
    writeln!(w, "d={},basis={}", matrix.d, matrix.basis)?;
    for row in &matrix.counts {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Expected counts `round(N · P[j | i])` with `per_row` trials per sent index.
pub fn synthesize_counts(spec: &ChannelSpec<f64>, d: usize, basis: Basis, per_row: u64) -> Result<CountMatrix> {
    let t = transition_matrix(spec, d)?;
    let n = per_row as f64;
    let counts = t.iter().map(|row| row.iter().map(|p| (p * n).round() as u64).collect()).collect();
    CountMatrix::new(basis, counts)
}

/// Multinomially sampled counts with `per_row` trials per sent index.
pub fn sample_counts(spec: &ChannelSpec<f64>, d: usize, basis: Basis, per_row: u64, seed: u64) -> Result<CountMatrix> {
    let t = transition_matrix(spec, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(basis.index() as u64);
    let counts = t
        .iter()
        .map(|row| {
            // sequential conditional binomials
            let mut left = per_row;
            let mut mass = 1.0;
            row.iter()
                .map(|&p| {
                    if left == 0 || mass <= 0.0 {
                        return 0;
                    }
                    let c = if p >= mass {
                        left
                    } else {
                        Binomial::new(left, (p / mass).clamp(0.0, 1.0)).expect("valid binomial").sample(&mut rng)
                    };
                    left -= c;
                    mass -= p;
                    c
                })
                .collect()
        })
        .collect();
    CountMatrix::new(basis, counts)
}

/// `(alpha, Q)` for the signal set `encoding`, each sent row normalised by its
/// own total before averaging.
pub fn subset_stats(counts: &CountMatrix, encoding: &IndexEncoding) -> Result<KeptStats<f64>> {
    if encoding.d() != counts.d {
        return Err(Error::DimensionMismatch { what: "encoding", expected: counts.d, found: encoding.d() });
    }
    let mut kept = 0.0;
    let mut correct = 0.0;
    for &i in encoding.indices() {
        let row = &counts.counts[i];
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::InsufficientData(format!("no counts for sent index {i} in basis {}", counts.basis)));
        }
        let inside: u64 = encoding.indices().iter().map(|&j| row[j]).sum();
        kept += inside as f64 / total as f64;
        correct += row[i] as f64 / total as f64;
    }
    let k = encoding.k() as f64;
    let alpha = kept / k;
    Ok(KeptStats::from_error_mass(alpha, (kept - correct) / k))
}

/// Fitted block-bias parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub eps1: f64,
    pub eps2: f64,
    /// Sum of squared deviations between row-normalised counts and the model.
    pub residual: f64,
    /// Residual above ten times its shot-noise expectation.
    pub poor_fit: bool,
}

/// Per-class sums of the row-normalised data: diagonal, same block, other block.
#[derive(Default)]
struct ClassSums {
    n: [f64; 3],
    s1: [f64; 3],
    s2: [f64; 3],
    /// Σ over cells of 1/N_row, per class, for the shot-noise expectation.
    inv_n: [f64; 3],
}

impl ClassSums {
    fn residual(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|c| self.s2[c] - 2.0 * p[c] * self.s1[c] + self.n[c] * p[c] * p[c]).sum::<f64>().max(0.0)
    }

    fn shot_noise(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|c| p[c] * (1.0 - p[c]) * self.inv_n[c]).sum()
    }
}

const GRID_STEP: f64 = 0.01;
const REFINE_STEP: f64 = 1e-4;
const POOR_FIT_FACTOR: f64 = 10.0;

fn model_populations(d: usize, s: usize, eps1: f64, eps2: f64) -> [f64; 3] {
    let p = block_populations(d, s, eps1, eps2).expect("validated block arguments");
    [p.correct, p.in_block, p.cross_block]
}

/// Least-squares fit of the three-level block-bias populations to both bases'
/// row-normalised counts: a 0.01 grid over `[0, 1]²`, then a 1e-4 grid around
/// the best cell.
pub fn fit_block_params(pair: &CountPair, s: usize) -> Result<FitResult> {
    let d = pair.d();
    if s < 2 || !d.is_multiple_of(s) {
        return Err(Error::InvalidParams(format!("block size s = {s} must be >= 2 and divide d = {d}")));
    }
    let mut sums = ClassSums::default();
    for basis in Basis::BOTH {
        let m = pair.get(basis);
        for (i, row) in m.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                continue;
            }
            let n = total as f64;
            for (j, &c) in row.iter().enumerate() {
                let class = if i == j {
                    0
                } else if i / s == j / s {
                    1
                } else {
                    2
                };
                let v = c as f64 / n;
                sums.n[class] += 1.0;
                sums.s1[class] += v;
                sums.s2[class] += v * v;
                sums.inv_n[class] += 1.0 / n;
            }
        }
    }
    if sums.n[0] == 0.0 {
        return Err(Error::InsufficientData("every row of both count matrices is empty".into()));
    }

    let eval = |e1: f64, e2: f64| sums.residual(model_populations(d, s, e1, e2));
    let search = |lo1: f64, lo2: f64, steps1: usize, steps2: usize, step: f64| {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=steps1 {
            let e1 = (lo1 + i as f64 * step).min(1.0);
            for j in 0..=steps2 {
                let e2 = (lo2 + j as f64 * step).min(1.0);
                let r = eval(e1, e2);
                if r < best.0 {
                    best = (r, e1, e2);
                }
            }
        }
        best
    };

    let coarse_steps = (1.0 / GRID_STEP).round() as usize;
    let (_, c1, c2) = search(0.0, 0.0, coarse_steps, coarse_steps, GRID_STEP);
    let window = |c: f64| {
        let lo = (c - GRID_STEP).max(0.0);
        let hi = (c + GRID_STEP).min(1.0);
        (lo, ((hi - lo) / REFINE_STEP).round() as usize)
    };
    let (lo1, n1) = window(c1);
    let (lo2, n2) = window(c2);
    let (residual, eps1, eps2) = search(lo1, lo2, n1, n2, REFINE_STEP);

    let expected = sums.shot_noise(model_populations(d, s, eps1, eps2));
    Ok(FitResult { eps1, eps2, residual, poor_fit: residual > POOR_FIT_FACTOR * expected })
}

/// How the signal set is chosen for each `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetRule {
    /// Balanced block occupancy (minimum block overlap).
    Balanced,
    /// Every k-subset, keeping the one with the highest rate on this data.
    /// Falls back to `Balanced` above the enumeration cap.
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestRow {
    pub k: usize,
    /// Mean of the two bases' kept probabilities.
    pub alpha: f64,
    /// Mean of the two bases' dit errors.
    pub q: f64,
    pub alpha_z: f64,
    pub q_z: f64,
    pub alpha_x: f64,
    pub q_x: f64,
    pub rate_per_signal: f64,
    pub is_argmax: bool,
    pub encoding: IndexEncoding,
    /// True when `BruteForce` was requested but the balanced set was used.
    pub fell_back: bool,
}

fn row_for(pair: &CountPair, encoding: IndexEncoding) -> Result<IngestRow> {
    let k = encoding.k();
    let z = subset_stats(&pair.z, &encoding)?;
    let x = subset_stats(&pair.x, &encoding)?;
    // empirical Q may exceed (k-1)/k; the rate there is zero anyway
    let cap = max_dit_error::<f64>(k);
    let sifted = rate_per_sifted_symbol(k, z.q.min(cap), x.q.min(cap))?;
    let alpha = 0.5 * (z.alpha + x.alpha);
    Ok(IngestRow {
        k,
        alpha,
        q: 0.5 * (z.q + x.q),
        alpha_z: z.alpha,
        q_z: z.q,
        alpha_x: x.alpha,
        q_x: x.q,
        rate_per_signal: (0.5 * alpha * sifted).max(0.0),
        is_argmax: false,
        encoding,
        fell_back: false,
    })
}

/// Rate-optimal signal set for each `k` in `k_range`, in ascending `k`, with
/// the first maximiser flagged.
pub fn sweep_k(pair: &CountPair, s: usize, k_range: RangeInclusive<usize>, rule: SubsetRule) -> Result<Vec<IngestRow>> {
    let d = pair.d();
    if k_range.is_empty() || *k_range.start() < 2 || *k_range.end() > d {
        return Err(Error::InvalidParams(format!(
            "k range {}..={} must be non-empty within [2, {d}]",
            k_range.start(),
            k_range.end()
        )));
    }
    let mut rows = Vec::new();
    for k in k_range {
        let row = match rule {
            SubsetRule::Balanced => row_for(pair, balanced_block_encoding(d, s, k)?)?,
            SubsetRule::BruteForce if binomial(d, k) <= ENUMERATION_CAP => {
                let mut best: Option<IngestRow> = None;
                for subset in combinations(d, k) {
                    let row = row_for(pair, IndexEncoding::new(d, subset)?)?;
                    if best.as_ref().is_none_or(|b| row.rate_per_signal > b.rate_per_signal) {
                        best = Some(row);
                    }
                }
                best.expect("at least one subset")
            }
            SubsetRule::BruteForce => {
                log::warn!(
                    "C({d}, {k}) = {} subsets exceeds the enumeration cap; using the balanced set",
                    binomial(d, k)
                );
                let mut row = row_for(pair, balanced_block_encoding(d, s, k)?)?;
                row.fell_back = true;
                row
            }
        };
        rows.push(row);
    }
    flag_argmax(&mut rows, |r| r.rate_per_signal, |r, v| r.is_argmax = v);
    Ok(rows)
}

/// Flags the first row with the largest value.
pub(crate) fn flag_argmax<R>(rows: &mut [R], value: impl Fn(&R) -> f64, mut set: impl FnMut(&mut R, bool)) {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        let v = value(r);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    for (i, r) in rows.iter_mut().enumerate() {
        set(r, best.is_some_and(|(b, _)| b == i));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::block_stats_for;
    use approx::assert_abs_diff_eq;

    fn identity(d: usize, basis: Basis) -> CountMatrix {
        CountMatrix::new(basis, (0..d).map(|i| (0..d).map(|j| if i == j { 100 } else { 0 }).collect()).collect())
            .unwrap()
    }

    #[test]
    fn parses_identity_block() {
        let text = "d=2,basis=Z\n100,0\n0,100\n";
        let pair = load_counts(text.as_bytes()).unwrap();
        assert_eq!(pair.d(), 2);
        assert_eq!(pair.x.basis(), Basis::X);
        let e = IndexEncoding::new(2, vec![0, 1]).unwrap();
        let s = subset_stats(&pair.z, &e).unwrap();
        assert_eq!((s.alpha, s.q), (1.0, 0.0));
    }

    #[test]
    fn ragged_row_names_line() {
        let text = "d=3,basis=Z\n1,2,3\n4,5\n7,8,9\n";
        assert_eq!(parse_counts(text.as_bytes()), Err(Error::Ragged { line: 3, expected: 3, found: 2 }));
    }

    #[test]
    fn negative_entry_location() {
        let text = "d=2,basis=X\n1,2\n3,-4\n";
        assert_eq!(parse_counts(text.as_bytes()), Err(Error::NegativeEntry { row: 1, column: 1, value: -4 }));
    }

    #[test]
    fn parse_errors_carry_location() {
        match parse_counts("d=2,basis=Z\n1,x\n".as_bytes()) {
            Err(Error::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_counts("dim=2,basis=Z\n".as_bytes()), Err(Error::Parse { line: 1, column: 1, .. })));
        assert!(matches!(parse_counts("d=2,basis=Y\n".as_bytes()), Err(Error::Parse { line: 1, column: 2, .. })));
        assert!(matches!(parse_counts("d=3,basis=Z\n1,2,3\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn mismatched_bases() {
        let text = "d=2,basis=Z\n1,0\n0,1\nd=3,basis=X\n1,0,0\n0,1,0\n0,0,1\n";
        assert!(matches!(load_counts(text.as_bytes()), Err(Error::DimensionMismatch { .. })));
        let text = "d=2,basis=Z\n1,0\n0,1\nd=2,basis=Z\n1,0\n0,1\n";
        assert!(load_counts(text.as_bytes()).is_err());
    }

    #[test]
    fn synthetic_export_round_trips() {
        let spec = ChannelSpec::BlockBias { eps1: 0.31, eps2: 0.12, s: 3 };
        let m = synthesize_counts(&spec, 9, Basis::X, 1_000_000).unwrap();
        let mut buf = Vec::new();
        write_counts(&m, &mut buf).unwrap();
        let back = parse_counts(buf.as_slice()).unwrap();
        assert_eq!(back, vec![m]);
    }

    #[test]
    fn diagonal_and_uniform_counts() {
        let e = IndexEncoding::new(4, vec![1, 3]).unwrap();
        let s = subset_stats(&identity(4, Basis::Z), &e).unwrap();
        assert_eq!((s.alpha, s.q), (1.0, 0.0));
        let uniform = CountMatrix::new(Basis::Z, vec![vec![7; 5]; 5]).unwrap();
        let all = IndexEncoding::new(5, (0..5).collect()).unwrap();
        let s = subset_stats(&uniform, &all).unwrap();
        assert_abs_diff_eq!(s.alpha, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.q, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn empty_row_is_insufficient() {
        let m = CountMatrix::new(Basis::Z, vec![vec![1, 0, 0], vec![0, 0, 0], vec![0, 0, 1]]).unwrap();
        let e = IndexEncoding::new(3, vec![0, 1]).unwrap();
        assert!(matches!(subset_stats(&m, &e), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn equal_exposure_matches_pooled_formula() {
        let m = sample_counts(&ChannelSpec::Depolarizing { eps: 0.3 }, 6, Basis::Z, 10_000, 4).unwrap();
        let e = IndexEncoding::new(6, vec![0, 2, 3]).unwrap();
        let idx = e.indices();
        let c = m.counts();
        let inside: u64 = idx.iter().flat_map(|&i| idx.iter().map(move |&j| c[i][j])).sum();
        let total: u64 = idx.iter().map(|&i| m.row_total(i)).sum();
        let diag: u64 = idx.iter().map(|&i| c[i][i]).sum();
        let s = subset_stats(&m, &e).unwrap();
        assert_abs_diff_eq!(s.alpha, inside as f64 / total as f64, epsilon = 1e-14);
        assert_abs_diff_eq!(s.q, 1.0 - diag as f64 / inside as f64, epsilon = 1e-14);
    }

    #[test]
    fn sampled_rows_have_requested_totals() {
        let m = sample_counts(&ChannelSpec::BlockBias { eps1: 0.3, eps2: 0.1, s: 2 }, 4, Basis::X, 5000, 1).unwrap();
        for i in 0..4 {
            assert_eq!(m.row_total(i), 5000);
        }
    }

    #[test]
    fn fit_noiseless() {
        let pair = CountPair::from_matrices(vec![identity(9, Basis::Z), identity(9, Basis::X)]).unwrap();
        let fit = fit_block_params(&pair, 3).unwrap();
        assert_eq!((fit.eps1, fit.eps2), (0.0, 0.0));
        assert_eq!(fit.residual, 0.0);
    }

    #[test]
    fn fit_cross_block_only() {
        let spec = ChannelSpec::BlockBias { eps1: 0.0, eps2: 0.2, s: 3 };
        let pair = CountPair::from_matrices(vec![
            synthesize_counts(&spec, 9, Basis::Z, 1 << 40).unwrap(),
            synthesize_counts(&spec, 9, Basis::X, 1 << 40).unwrap(),
        ])
        .unwrap();
        let fit = fit_block_params(&pair, 3).unwrap();
        assert!(fit.eps1 < 1e-3);
        assert_abs_diff_eq!(fit.eps2, 0.2, epsilon = 1e-3);
        assert!(!fit.poor_fit);
    }

    #[test]
    fn fit_flags_wrong_model() {
        // modulo noise has no block structure to speak of
        let spec = ChannelSpec::Modulo { eps: 0.2, topology: crate::encoding::Topology::Cycle };
        let m = synthesize_counts(&spec, 9, Basis::Z, 100_000).unwrap();
        let pair = CountPair::from_matrices(vec![m]).unwrap();
        assert!(fit_block_params(&pair, 3).unwrap().poor_fit);
    }

    #[test]
    fn exact_counts_reproduce_closed_form() {
        let spec = ChannelSpec::BlockBias { eps1: 0.31, eps2: 0.12, s: 5 };
        let m = synthesize_counts(&spec, 25, Basis::Z, 1 << 50).unwrap();
        for k in [2, 5, 7, 13, 25] {
            let e = balanced_block_encoding(25, 5, k).unwrap();
            let got = subset_stats(&m, &e).unwrap();
            let want = block_stats_for(&e, 5, 0.31, 0.12).unwrap();
            assert_abs_diff_eq!(got.alpha, want.alpha, epsilon = 1e-12);
            assert_abs_diff_eq!(got.q, want.q, epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_sweep_prefers_full_alphabet() {
        let pair = CountPair::from_matrices(vec![identity(9, Basis::Z)]).unwrap();
        let rows = sweep_k(&pair, 3, 2..=9, SubsetRule::Balanced).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].rate_per_signal > w[0].rate_per_signal);
        }
        assert!(rows.last().unwrap().is_argmax);
        assert_eq!(rows.iter().filter(|r| r.is_argmax).count(), 1);
    }

    #[test]
    fn brute_force_rule_and_fallback() {
        let spec = ChannelSpec::BlockBias { eps1: 0.3, eps2: 0.07, s: 3 };
        let pair = CountPair::from_matrices(vec![synthesize_counts(&spec, 9, Basis::Z, 1 << 30).unwrap()]).unwrap();
        let brute = sweep_k(&pair, 3, 2..=9, SubsetRule::BruteForce).unwrap();
        let balanced = sweep_k(&pair, 3, 2..=9, SubsetRule::Balanced).unwrap();
        for (b, g) in brute.iter().zip(&balanced) {
            assert!(b.rate_per_signal >= g.rate_per_signal - 1e-12);
            assert!(!b.fell_back);
        }
        let id = CountPair::from_matrices(vec![identity(25, Basis::Z)]).unwrap();
        let rows = sweep_k(&id, 5, 12..=12, SubsetRule::BruteForce).unwrap();
        assert!(rows[0].fell_back);
    }

    #[test]
    fn sweep_range_checks() {
        let pair = CountPair::from_matrices(vec![identity(4, Basis::Z)]).unwrap();
        assert!(sweep_k(&pair, 2, 1..=3, SubsetRule::Balanced).is_err());
        assert!(sweep_k(&pair, 2, 2..=5, SubsetRule::Balanced).is_err());
    }
}
