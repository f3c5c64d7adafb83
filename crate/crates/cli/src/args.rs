use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rse_qkd::Topology;

#[derive(Debug, Parser)]
#[command(name = "rse-qkd", version, about = "Key rates and noise thresholds for reduced-state embeddings in qudit QKD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Physical-noise threshold for every (d, k) cell.
    Threshold(ThresholdArgs),
    /// Per-signal key rate versus k, one group per (d, noise).
    Sweep(SweepArgs),
    /// Monte Carlo run of the sifted protocol with analytic comparison.
    Simulate(SimulateArgs),
    /// Fit and rate sweep from measured confusion counts.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelKind {
    Depol,
    Modulo,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopologyArg {
    Cycle,
    Path,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Cycle => Topology::Cycle,
            TopologyArg::Path => Topology::Path,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum RuleArg {
    #[default]
    Balanced,
    Brute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ObjectiveArg {
    #[default]
    PerSignal,
    PerSifted,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, value_enum)]
    pub channel: ChannelKind,
    /// Single dimension.
    #[arg(long, conflicts_with = "d_range")]
    pub d: Option<usize>,
    /// Dimension range `a..b` (inclusive).
    #[arg(long, value_parser = parse_range)]
    pub d_range: Option<RangeInclusive<usize>>,
    /// Signal-set sizes `a..b` (inclusive); defaults to 2..max d.
    #[arg(long, value_parser = parse_range)]
    pub k_range: Option<RangeInclusive<usize>>,
    /// In-block noise of the block-bias channel.
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Block size; defaults to √d for square d.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_enum, default_value = "cycle")]
    pub topology: TopologyArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub channel: ChannelKind,
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[arg(long, value_parser = parse_range)]
    pub k_range: Option<RangeInclusive<usize>>,
    /// Noise values for depolarizing/modulo, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Inter-block noise values for the block-bias channel, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps2: Vec<f64>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_enum, default_value = "cycle")]
    pub topology: TopologyArg,
    /// Quantity maximised when flagging the best k.
    #[arg(long, value_enum, default_value = "per-signal")]
    pub objective: ObjectiveArg,
    /// Also locate the noise above which k = d stops being optimal.
    #[arg(long)]
    pub crossover: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub channel: ChannelKind,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_enum, default_value = "cycle")]
    pub topology: TopologyArg,
    /// Number of protocol rounds.
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Count files; one block per basis, a single block serves both bases.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Expected dimension; checked against the files.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_parser = parse_range)]
    pub k_range: Option<RangeInclusive<usize>>,
    #[arg(long, value_enum, default_value = "balanced")]
    pub rule: RuleArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses `a..b` or `a..=b`, both inclusive.
pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got '{s}'"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in '{s}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end in '{s}'"))?;
    if a > b {
        return Err(format!("empty range '{s}'"));
    }
    Ok(a..=b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..6"), Ok(2..=6));
        assert_eq!(parse_range("2..=6"), Ok(2..=6));
        assert!(parse_range("6..2").is_err());
        assert!(parse_range("x..2").is_err());
        assert!(parse_range("4").is_err());
    }
}
