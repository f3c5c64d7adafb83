use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use rse_qkd::entropy::rate_per_signal;
use rse_qkd::ingest::{fit_block_params, parse_counts, sweep_k, CountMatrix, CountPair, SubsetRule};
use rse_qkd::montecarlo::{empirical_rate, estimate_stats, simulate, SimConfig, RNG_ALGORITHM};
use rse_qkd::sweep::{cell_threshold, crossover_noise, rate_sweep, CellThreshold, ChannelFamily, RateObjective};
use rse_qkd::{Basis, ChannelSpec, Error};

use crate::args::{
    ChannelKind, Format, IngestArgs, ObjectiveArg, RuleArg, SimulateArgs, SweepArgs, ThresholdArgs, TopologyArg,
};
use crate::format::{fixed, opt_fixed, Csv, Fixed, PROB_PLACES, SCORE_PLACES, THRESHOLD_PLACES};
use crate::{Failure, Outcome, EXIT_DATA, EXIT_DEGENERATE, EXIT_OK};

pub const THRESHOLD_HEADER: &[&str] = &["channel", "d", "k", "eps1", "s", "threshold", "alpha_threshold", "status"];
pub const SWEEP_HEADER: &[&str] = &[
    "channel",
    "d",
    "k",
    "noise",
    "eps1",
    "s",
    "alpha",
    "q",
    "rate_per_signal",
    "rate_per_sifted_symbol",
    "is_argmax",
];
pub const SIMULATE_HEADER: &[&str] = &[
    "channel",
    "d",
    "k",
    "n_rounds",
    "seed",
    "matched",
    "kept",
    "correct",
    "alpha_hat",
    "alpha_se",
    "q_hat",
    "q_se",
    "alpha",
    "q",
    "z_alpha",
    "z_q",
    "rate_empirical",
    "rate_analytic",
];
pub const INGEST_HEADER: &[&str] =
    &["k", "alpha", "q", "alpha_z", "q_z", "alpha_x", "q_x", "rate_per_signal", "is_argmax", "encoding", "fell_back"];

fn family(kind: ChannelKind, eps1: Option<f64>, s: Option<usize>, topology: TopologyArg) -> Result<ChannelFamily, Failure> {
    match kind {
        ChannelKind::Depol => Ok(ChannelFamily::Depolarizing),
        ChannelKind::Modulo => Ok(ChannelFamily::Modulo { topology: topology.into() }),
        ChannelKind::Block => {
            let eps1 = eps1.ok_or_else(|| Failure::usage("--channel block requires --eps1"))?;
            if !(0.0..=1.0).contains(&eps1) {
                return Err(Failure::usage(format!("--eps1 {eps1} outside [0, 1]")));
            }
            Ok(ChannelFamily::BlockBias { eps1, s })
        }
    }
}

fn reject_flag(present: bool, flag: &str, kind: ChannelKind) -> Result<(), Failure> {
    if present {
        Err(Failure::usage(format!("{flag} does not apply to --channel {}", kind_name(kind))))
    } else {
        Ok(())
    }
}

fn kind_name(kind: ChannelKind) -> &'static str {
    match kind {
        ChannelKind::Depol => "depol",
        ChannelKind::Modulo => "modulo",
        ChannelKind::Block => "block",
    }
}

// ----- threshold -----

#[derive(Serialize)]
struct ThresholdJsonRow {
    d: usize,
    k: usize,
    eps1: Option<Fixed>,
    s: Option<usize>,
    threshold: Option<Fixed>,
    alpha_threshold: Option<Fixed>,
    status: &'static str,
}

#[derive(Serialize)]
struct ThresholdReport {
    channel: &'static str,
    rows: Vec<ThresholdJsonRow>,
}

fn cell_status(cell: &CellThreshold) -> &'static str {
    use rse_qkd::channels::Eps2Threshold;
    match cell {
        CellThreshold::Eps { .. } | CellThreshold::Eps2(Eps2Threshold::Root(_)) => "ok",
        CellThreshold::Eps2(Eps2Threshold::NoPositiveRate) => "no_positive_rate",
        CellThreshold::Eps2(Eps2Threshold::AlwaysPositive) => "always_positive",
        CellThreshold::Degenerate => "degenerate",
        CellThreshold::Empty => "empty",
    }
}

pub fn threshold(args: &ThresholdArgs) -> Result<Outcome, Failure> {
    let fam = family(args.channel, args.eps1, args.s, args.topology)?;
    if args.channel != ChannelKind::Block {
        reject_flag(args.eps1.is_some(), "--eps1", args.channel)?;
        reject_flag(args.s.is_some(), "--s", args.channel)?;
    }
    let d_range = match (args.d, &args.d_range) {
        (Some(d), None) => d..=d,
        (None, Some(r)) => r.clone(),
        _ => return Err(Failure::usage("threshold needs --d or --d-range")),
    };
    if *d_range.start() < 2 {
        return Err(Failure::usage("dimensions start at 2"));
    }
    let k_range = args.k_range.clone().unwrap_or(2..=*d_range.end());
    if *k_range.start() < 2 {
        return Err(Failure::usage("--k-range must start at 2 or above"));
    }
    let eps1 = match fam {
        ChannelFamily::BlockBias { eps1, .. } => Some(eps1),
        _ => None,
    };

    let mut rows = Vec::new();
    let mut degenerate = 0;
    for d in d_range {
        for k in k_range.clone() {
            let cell = cell_threshold::<f64>(&fam, d, k)?;
            if cell == CellThreshold::Degenerate {
                degenerate += 1;
            }
            let s = fam.block_size(d);
            let alpha = match cell {
                CellThreshold::Eps { alpha, .. } => alpha,
                _ => None,
            };
            rows.push((d, k, s.filter(|_| cell != CellThreshold::Empty), cell.value(), alpha, cell_status(&cell)));
        }
    }

    let body = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut t = Csv::new(THRESHOLD_HEADER);
            for &(d, k, s, value, alpha, status) in &rows {
                t.row(vec![
                    fam.name().into(),
                    d.to_string(),
                    k.to_string(),
                    opt_fixed(eps1, PROB_PLACES),
                    s.map(|s| s.to_string()).unwrap_or_default(),
                    opt_fixed(value, THRESHOLD_PLACES),
                    opt_fixed(alpha, THRESHOLD_PLACES),
                    status.into(),
                ]);
            }
            t.finish()
        }
        Format::Json => crate::format::to_json(&ThresholdReport {
            channel: fam.name(),
            rows: rows
                .iter()
                .map(|&(d, k, s, value, alpha, status)| ThresholdJsonRow {
                    d,
                    k,
                    eps1: eps1.map(Fixed::prob),
                    s,
                    threshold: value.map(Fixed::threshold),
                    alpha_threshold: alpha.map(Fixed::threshold),
                    status,
                })
                .collect(),
        }),
    };
    let mut out = Outcome::new(body);
    if degenerate > 0 {
        out.notes.push(format!("{degenerate} cell(s) have a degenerate threshold equation"));
        out.code = EXIT_DEGENERATE;
    }
    Ok(out)
}

// ----- sweep -----

#[derive(Serialize)]
struct SweepJsonRow {
    channel: &'static str,
    d: usize,
    k: usize,
    noise: Fixed,
    eps1: Option<Fixed>,
    s: Option<usize>,
    alpha: Fixed,
    q: Fixed,
    rate_per_signal: Fixed,
    rate_per_sifted_symbol: Fixed,
    is_argmax: bool,
}

#[derive(Serialize)]
struct CrossoverJson {
    d: usize,
    noise: Option<Fixed>,
}

#[derive(Serialize)]
struct SweepReport {
    objective: &'static str,
    rows: Vec<SweepJsonRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossover: Option<Vec<CrossoverJson>>,
}

pub fn sweep(args: &SweepArgs) -> Result<Outcome, Failure> {
    let fam = family(args.channel, args.eps1, args.s, args.topology)?;
    let noises = match args.channel {
        ChannelKind::Block => {
            reject_flag(!args.eps.is_empty(), "--eps", args.channel)?;
            &args.eps2
        }
        _ => {
            reject_flag(!args.eps2.is_empty(), "--eps2", args.channel)?;
            reject_flag(args.eps1.is_some(), "--eps1", args.channel)?;
            reject_flag(args.s.is_some(), "--s", args.channel)?;
            &args.eps
        }
    };
    if noises.is_empty() && !args.crossover {
        let flag = if args.channel == ChannelKind::Block { "--eps2" } else { "--eps" };
        return Err(Failure::usage(format!("sweep needs {flag} values or --crossover")));
    }
    let objective = match args.objective {
        ObjectiveArg::PerSignal => RateObjective::PerSignal,
        ObjectiveArg::PerSifted => RateObjective::PerSiftedSymbol,
    };
    let d_max = args.d.iter().copied().max().unwrap_or(0);
    let k_range = args.k_range.clone().unwrap_or(2..=d_max.max(2));

    let rows = if noises.is_empty() { Vec::new() } else { rate_sweep(&fam, &args.d, k_range, noises, objective)? };

    let mut code = EXIT_OK;
    let mut notes = Vec::new();
    let crossover = if args.crossover {
        let mut found = Vec::new();
        for &d in &args.d {
            match crossover_noise(&fam, d, objective) {
                Ok(x) => {
                    notes.push(format!("crossover d={d} noise={}", fixed(x, THRESHOLD_PLACES)));
                    found.push((d, Some(x)));
                }
                Err(Error::Degenerate(msg)) => {
                    notes.push(format!("crossover d={d}: {msg}"));
                    code = EXIT_DEGENERATE;
                    found.push((d, None));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Some(found)
    } else {
        None
    };

    let objective_name = match objective {
        RateObjective::PerSignal => "per_signal",
        RateObjective::PerSiftedSymbol => "per_sifted_symbol",
    };
    let body = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut t = Csv::new(SWEEP_HEADER);
            for r in &rows {
                t.row(vec![
                    r.channel.into(),
                    r.d.to_string(),
                    r.k.to_string(),
                    fixed(r.noise, PROB_PLACES),
                    opt_fixed(r.eps1, PROB_PLACES),
                    r.s.map(|s| s.to_string()).unwrap_or_default(),
                    fixed(r.alpha, PROB_PLACES),
                    fixed(r.q, PROB_PLACES),
                    fixed(r.rate_per_signal, PROB_PLACES),
                    fixed(r.rate_per_sifted_symbol, PROB_PLACES),
                    r.is_argmax.to_string(),
                ]);
            }
            t.finish()
        }
        Format::Json => {
            crate::format::to_json(&SweepReport {
                objective: objective_name,
                rows: rows
                    .iter()
                    .map(|r| SweepJsonRow {
                        channel: r.channel,
                        d: r.d,
                        k: r.k,
                        noise: Fixed::prob(r.noise),
                        eps1: r.eps1.map(Fixed::prob),
                        s: r.s,
                        alpha: Fixed::prob(r.alpha),
                        q: Fixed::prob(r.q),
                        rate_per_signal: Fixed::prob(r.rate_per_signal),
                        rate_per_sifted_symbol: Fixed::prob(r.rate_per_sifted_symbol),
                        is_argmax: r.is_argmax,
                    })
                    .collect(),
                crossover: crossover.map(|c| {
                    c.into_iter().map(|(d, x)| CrossoverJson { d, noise: x.map(Fixed::threshold) }).collect()
                }),
            })
        }
    };
    Ok(Outcome { body, notes, code })
}

// ----- simulate -----

fn simulation_spec(args: &SimulateArgs) -> Result<(ChannelSpec<f64>, ChannelFamily), Failure> {
    let topology = args.topology.into();
    match args.channel {
        ChannelKind::Depol | ChannelKind::Modulo => {
            reject_flag(args.eps1.is_some(), "--eps1", args.channel)?;
            reject_flag(args.eps2.is_some(), "--eps2", args.channel)?;
            reject_flag(args.s.is_some(), "--s", args.channel)?;
            let eps = args.eps.ok_or_else(|| Failure::usage("--eps is required"))?;
            if args.channel == ChannelKind::Depol {
                Ok((ChannelSpec::Depolarizing { eps }, ChannelFamily::Depolarizing))
            } else {
                Ok((ChannelSpec::Modulo { eps, topology }, ChannelFamily::Modulo { topology }))
            }
        }
        ChannelKind::Block => {
            reject_flag(args.eps.is_some(), "--eps", args.channel)?;
            let eps2 = args.eps2.ok_or_else(|| Failure::usage("--channel block requires --eps2"))?;
            let fam = family(args.channel, args.eps1, args.s, args.topology)?;
            let s = fam
                .block_size(args.d)
                .ok_or_else(|| Failure::usage(format!("no block size for d = {}; pass --s dividing d", args.d)))?;
            let ChannelFamily::BlockBias { eps1, .. } = fam else { unreachable!() };
            Ok((ChannelSpec::BlockBias { eps1, eps2, s }, fam))
        }
    }
}

#[derive(Serialize)]
struct SimConfigJson {
    channel: &'static str,
    d: usize,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<Fixed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    topology: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps1: Option<Fixed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps2: Option<Fixed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<usize>,
    encoding: Vec<usize>,
    n_rounds: u64,
    seed: u64,
    rng: &'static str,
}

#[derive(Serialize)]
struct PerBasisCounts<'a> {
    #[serde(rename = "Z")]
    z: &'a [Vec<u64>],
    #[serde(rename = "X")]
    x: &'a [Vec<u64>],
}

#[derive(Serialize)]
struct TallyJson<'a> {
    n_rounds: u64,
    matched: u64,
    kept: u64,
    correct: u64,
    /// rows: sent symbol; columns: outcome, last column inconclusive
    per_pair_counts: PerBasisCounts<'a>,
}

#[derive(Serialize)]
struct EstimateJson {
    alpha: Fixed,
    alpha_se: Fixed,
    q: Fixed,
    q_se: Fixed,
    no_kept_events: bool,
}

#[derive(Serialize)]
struct AnalyticJson {
    alpha: Fixed,
    q: Fixed,
    rate_per_signal: Fixed,
}

#[derive(Serialize)]
struct ScoresJson {
    alpha: Fixed,
    q: Fixed,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: SimConfigJson,
    tally: TallyJson<'a>,
    estimate: EstimateJson,
    empirical_rate_per_signal: Fixed,
    analytic: AnalyticJson,
    z_scores: ScoresJson,
}

fn z_score(hat: f64, want: f64, se: f64) -> f64 {
    let diff = hat - want;
    if se > 0.0 {
        diff / se
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::NAN
    }
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<Outcome, Failure> {
    if args.n == 0 {
        return Err(Failure::usage("--n must be positive"));
    }
    let (spec, fam) = simulation_spec(args)?;
    spec.validate(args.d)?;
    let encoding = fam.optimal_encoding(args.d, args.k)?;
    let cfg = SimConfig::new(spec, encoding, args.n, args.seed);
    let tally = simulate(&cfg)?;
    let est = estimate_stats(&tally)?;
    let want = cfg.analytic_stats()?;
    let rate_hat = empirical_rate(&tally, args.k)?;
    let rate_want = rate_per_signal(want.alpha, args.k, want.q)?;
    let z_alpha = z_score(est.stats.alpha, want.alpha, est.alpha_se);
    let z_q = if est.no_kept_events { f64::NAN } else { z_score(est.stats.q, want.q, est.q_se) };

    let body = match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut t = Csv::new(SIMULATE_HEADER);
            t.row(vec![
                kind_name(args.channel).into(),
                args.d.to_string(),
                args.k.to_string(),
                tally.n_rounds.to_string(),
                args.seed.to_string(),
                tally.matched.to_string(),
                tally.kept.to_string(),
                tally.correct.to_string(),
                fixed(est.stats.alpha, PROB_PLACES),
                fixed(est.alpha_se, PROB_PLACES),
                fixed(est.stats.q, PROB_PLACES),
                fixed(est.q_se, PROB_PLACES),
                fixed(want.alpha, PROB_PLACES),
                fixed(want.q, PROB_PLACES),
                fixed(z_alpha, SCORE_PLACES),
                fixed(z_q, SCORE_PLACES),
                fixed(rate_hat, PROB_PLACES),
                fixed(rate_want, PROB_PLACES),
            ]);
            t.finish()
        }
        Format::Json => {
            let (eps, topology, eps1, eps2, s) = match spec {
                ChannelSpec::Depolarizing { eps } => (Some(eps), None, None, None, None),
                ChannelSpec::Modulo { eps, topology } => (
                    Some(eps),
                    Some(match topology {
                        rse_qkd::Topology::Cycle => "cycle",
                        rse_qkd::Topology::Path => "path",
                    }),
                    None,
                    None,
                    None,
                ),
                ChannelSpec::BlockBias { eps1, eps2, s } => (None, None, Some(eps1), Some(eps2), Some(s)),
            };
            crate::format::to_json(&SimulateReport {
                config: SimConfigJson {
                    channel: kind_name(args.channel),
                    d: args.d,
                    k: args.k,
                    eps: eps.map(Fixed::prob),
                    topology,
                    eps1: eps1.map(Fixed::prob),
                    eps2: eps2.map(Fixed::prob),
                    s,
                    encoding: cfg.encoding.indices().to_vec(),
                    n_rounds: args.n,
                    seed: args.seed,
                    rng: RNG_ALGORITHM,
                },
                tally: TallyJson {
                    n_rounds: tally.n_rounds,
                    matched: tally.matched,
                    kept: tally.kept,
                    correct: tally.correct,
                    per_pair_counts: PerBasisCounts {
                        z: &tally.per_pair_counts[Basis::Z.index()],
                        x: &tally.per_pair_counts[Basis::X.index()],
                    },
                },
                estimate: EstimateJson {
                    alpha: Fixed::prob(est.stats.alpha),
                    alpha_se: Fixed::prob(est.alpha_se),
                    q: Fixed::prob(est.stats.q),
                    q_se: Fixed::prob(est.q_se),
                    no_kept_events: est.no_kept_events,
                },
                empirical_rate_per_signal: Fixed::prob(rate_hat),
                analytic: AnalyticJson {
                    alpha: Fixed::prob(want.alpha),
                    q: Fixed::prob(want.q),
                    rate_per_signal: Fixed::prob(rate_want),
                },
                z_scores: ScoresJson { alpha: Fixed::score(z_alpha), q: Fixed::score(z_q) },
            })
        }
    };
    Ok(Outcome::new(body))
}

// ----- ingest -----

#[derive(Serialize)]
struct FitJson {
    eps1: Fixed,
    eps2: Fixed,
    residual: Fixed,
    poor_fit: bool,
}

#[derive(Serialize)]
struct IngestJsonRow {
    k: usize,
    alpha: Fixed,
    q: Fixed,
    alpha_z: Fixed,
    q_z: Fixed,
    alpha_x: Fixed,
    q_x: Fixed,
    rate_per_signal: Fixed,
    is_argmax: bool,
    encoding: Vec<usize>,
    fell_back: bool,
}

#[derive(Serialize)]
struct IngestReport {
    d: usize,
    s: usize,
    fit: FitJson,
    rows: Vec<IngestJsonRow>,
}

fn read_matrices(path: &Path) -> Result<Vec<CountMatrix>, Failure> {
    let file = File::open(path).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))?;
    parse_counts(BufReader::new(file)).map_err(|e| Failure::from(e).context(&path.display().to_string()))
}

fn residual_json(x: f64) -> Fixed {
    if x.is_finite() {
        Fixed::raw(format!("{x:.6e}"))
    } else {
        Fixed::prob(x)
    }
}

pub fn ingest(args: &IngestArgs) -> Result<Outcome, Failure> {
    let mut matrices = Vec::new();
    for path in &args.paths {
        for m in read_matrices(path)? {
            if let Some(d) = args.d {
                if m.d() != d {
                    return Err(Failure::new(
                        EXIT_DATA,
                        format!("--d {d} does not match d = {} in {}", m.d(), path.display()),
                    ));
                }
            }
            matrices.push(m);
        }
    }
    let pair = CountPair::from_matrices(matrices)?;
    let d = pair.d();
    let s = match args.s {
        Some(s) => s,
        None => ChannelFamily::BlockBias { eps1: 0.0, s: None }
            .block_size(d)
            .ok_or_else(|| Failure::usage(format!("d = {d} is not a square; pass --s")))?,
    };
    if s < 2 || !d.is_multiple_of(s) {
        return Err(Failure::usage(format!("--s {s} must divide d = {d} and be at least 2")));
    }
    let k_range = args.k_range.clone().unwrap_or(2..=d);
    let rule = match args.rule {
        RuleArg::Balanced => SubsetRule::Balanced,
        RuleArg::Brute => SubsetRule::BruteForce,
    };
    let fit = fit_block_params(&pair, s)?;
    let rows = sweep_k(&pair, s, k_range, rule)?;

    let mut notes = Vec::new();
    if fit.poor_fit {
        notes.push("warning: block-bias model fits the counts poorly".to_string());
    }
    let fallbacks: Vec<String> = rows.iter().filter(|r| r.fell_back).map(|r| r.k.to_string()).collect();
    if !fallbacks.is_empty() {
        notes.push(format!("brute-force subset search too large, used balanced sets for k = {}", fallbacks.join(" ")));
    }

    let body = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            notes.insert(
                0,
                format!(
                    "fit eps1={} eps2={} residual={:.6e} poor_fit={}",
                    fixed(fit.eps1, PROB_PLACES),
                    fixed(fit.eps2, PROB_PLACES),
                    fit.residual,
                    fit.poor_fit
                ),
            );
            let mut t = Csv::new(INGEST_HEADER);
            for r in &rows {
                t.row(vec![
                    r.k.to_string(),
                    fixed(r.alpha, PROB_PLACES),
                    fixed(r.q, PROB_PLACES),
                    fixed(r.alpha_z, PROB_PLACES),
                    fixed(r.q_z, PROB_PLACES),
                    fixed(r.alpha_x, PROB_PLACES),
                    fixed(r.q_x, PROB_PLACES),
                    fixed(r.rate_per_signal, PROB_PLACES),
                    r.is_argmax.to_string(),
                    r.encoding.to_string(),
                    r.fell_back.to_string(),
                ]);
            }
            t.finish()
        }
        Format::Json => crate::format::to_json(&IngestReport {
            d,
            s,
            fit: FitJson {
                eps1: Fixed::prob(fit.eps1),
                eps2: Fixed::prob(fit.eps2),
                residual: residual_json(fit.residual),
                poor_fit: fit.poor_fit,
            },
            rows: rows
                .iter()
                .map(|r| IngestJsonRow {
                    k: r.k,
                    alpha: Fixed::prob(r.alpha),
                    q: Fixed::prob(r.q),
                    alpha_z: Fixed::prob(r.alpha_z),
                    q_z: Fixed::prob(r.q_z),
                    alpha_x: Fixed::prob(r.alpha_x),
                    q_x: Fixed::prob(r.q_x),
                    rate_per_signal: Fixed::prob(r.rate_per_signal),
                    is_argmax: r.is_argmax,
                    encoding: r.encoding.indices().to_vec(),
                    fell_back: r.fell_back,
                })
                .collect(),
        }),
    };
    Ok(Outcome { body, notes, code: EXIT_OK })
}
