//! Command-line front end for `rse-qkd`: threshold tables, rate sweeps,
//! Monte Carlo runs and count ingestion.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod commands;
pub mod format;

use args::{Cli, Command, OutputArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RSE_QKD_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(EXIT_USAGE, message)
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl From<rse_qkd::Error> for Failure {
    fn from(e: rse_qkd::Error) -> Self {
        use rse_qkd::Error::*;
        let code = match e {
            Domain { .. } | InvalidParams(_) | InstanceTooLarge { .. } => EXIT_USAGE,
            Degenerate(_) => EXIT_DEGENERATE,
            DimensionMismatch { .. }
            | InsufficientData(_)
            | Parse { .. }
            | Ragged { .. }
            | NegativeEntry { .. }
            | Io(_) => EXIT_DATA,
        };
        Failure::new(code, e.to_string())
    }
}

/// Result of a subcommand: the report body, diagnostics for stderr and the
/// exit code (non-zero when the report is complete but flags a problem).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub body: String,
    pub notes: Vec<String>,
    pub code: i32,
}

impl Outcome {
    pub fn new(body: String) -> Self {
        Outcome { body, notes: Vec::new(), code: EXIT_OK }
    }
}

pub fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        _ => Ok(None),
    }
}

fn output_args(cmd: &Command) -> &OutputArgs {
    match cmd {
        Command::Threshold(a) => &a.output,
        Command::Sweep(a) => &a.output,
        Command::Simulate(a) => &a.output,
        Command::Ingest(a) => &a.output,
    }
}

pub fn execute(cmd: &Command) -> Result<Outcome, Failure> {
    match cmd {
        Command::Threshold(a) => commands::threshold(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Ingest(a) => commands::ingest(a),
    }
}

/// Parses `argv`, runs the subcommand on a pool of at most `threads`
/// workers and writes the report. Returns the process exit code.
pub fn run<I, T>(argv: I, threads: Option<usize>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };

    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(Failure::new(EXIT_USAGE, format!("cannot start {n} worker threads: {e}"))),
        },
        None => execute(&cli.command),
    };

    match result {
        Ok(outcome) => {
            let written = match &output_args(&cli.command).out {
                Some(path) => std::fs::write(path, outcome.body.as_bytes())
                    .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display()))),
                None => stdout.write_all(outcome.body.as_bytes()).map_err(|e| Failure::new(EXIT_DATA, e.to_string())),
            };
            for note in &outcome.notes {
                let _ = writeln!(stderr, "{note}");
            }
            match written {
                Ok(()) => outcome.code,
                Err(f) => {
                    let _ = writeln!(stderr, "error: {}", f.message);
                    f.code
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
