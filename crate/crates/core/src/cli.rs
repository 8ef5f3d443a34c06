//! Command-line front end. The binary is a thin wrapper around [`main_with`].
//!
//! Exit codes: 0 success, 1 usage error, 2 dataset or spec validation
//! failure, 3 runtime error. Results go to stdout or `--out`; diagnostics go
//! to stderr as a single `peerbargain: <kind>: <reason>` line.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset::resolve_dataset;
use crate::error::Error;
use crate::report::{execute, to_json, Experiment, Format};
use crate::scenario::{DatasetRef, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "peerbargain", version, about = "Premium-peering negotiation simulator")]
pub struct Cli {
    /// Log verbosity on stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Settle the focal pair once.
    Run(ExperimentArgs),
    /// Settle the focal pair over the spec's loyalty grid.
    Sweep(ExperimentArgs),
    /// Per-service bandwidth prices over the loyalty grid.
    PriceTable(ExperimentArgs),
    /// Compare peering orderings for the focal pair.
    Timing(ExperimentArgs),
    /// Compare payments of several ISPs with the focal CSP.
    Compare(ExperimentArgs),
    /// Check a dataset file or built-in id against the schema rules.
    ValidateDataset(ValidateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Scenario spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Dataset id or path, replacing the one named in the spec.
    #[arg(long)]
    pub dataset: Option<String>,
    /// json, csv or markdown.
    #[arg(long, default_value = "json")]
    pub format: Format,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Dataset id or path.
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub bind: IpAddr,
}

#[derive(Serialize)]
struct ValidationSummary<'a> {
    id: &'a str,
    valid: bool,
    isps: usize,
    csps: usize,
    services: usize,
}

/// A failure with its exit code and the one-line diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub reason: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let (code, kind) = if err.is_validation() {
            (EXIT_VALIDATION, "validation")
        } else if matches!(err, Error::UnknownFormat(_)) {
            (EXIT_USAGE, "usage")
        } else {
            (EXIT_RUNTIME, "runtime")
        };
        Failure {
            code,
            kind,
            reason: one_line(&err.to_string()),
        }
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn runtime(reason: String) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        kind: "runtime",
        reason,
    }
}

fn load_spec(path: &Path, dataset: Option<&str>) -> Result<ScenarioSpec, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_VALIDATION,
        kind: "validation",
        reason: format!("cannot read spec {}: {e}", path.display()),
    })?;
    let mut spec = ScenarioSpec::from_json(&text)?;
    if let Some(d) = dataset {
        spec.dataset = DatasetRef::Named(d.to_string());
    }
    Ok(spec)
}

fn deliver(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| runtime(format!("cannot write stdout: {e}"))),
    }
}

fn experiment_of(command: &Command) -> Option<(Experiment, &ExperimentArgs)> {
    Some(match command {
        Command::Run(a) => (Experiment::Run, a),
        Command::Sweep(a) => (Experiment::Sweep, a),
        Command::PriceTable(a) => (Experiment::PriceTable, a),
        Command::Timing(a) => (Experiment::Timing, a),
        Command::Compare(a) => (Experiment::Compare, a),
        _ => return None,
    })
}

/// Executes a parsed command, writing results to `stdout` or `--out`.
pub fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    if let Some((experiment, args)) = experiment_of(&cli.command) {
        let spec = load_spec(&args.spec, args.dataset.as_deref())?;
        let text = execute(experiment, &spec, args.format)?;
        return deliver(&text, args.out.as_deref(), stdout);
    }
    match &cli.command {
        Command::ValidateDataset(args) => {
            let ds = resolve_dataset(&args.dataset)?;
            let violations = ds.validate();
            if !violations.is_empty() {
                return Err(Error::InvalidDataset(violations).into());
            }
            let summary = ValidationSummary {
                id: &ds.id,
                valid: true,
                isps: ds.isps.len(),
                csps: ds.csps.len(),
                services: ds.services.len(),
            };
            deliver(&to_json(&summary)?, args.out.as_deref(), stdout)
        }
        Command::Serve(args) => {
            let addr = SocketAddr::new(args.bind, args.port);
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| runtime(format!("cannot start runtime: {e}")))?;
            rt.block_on(crate::api::serve(addr))
                .map_err(|e| runtime(format!("cannot serve on {addr}: {e}")))
        }
        _ => unreachable!("experiment commands handled above"),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            let _ = writeln!(
                stderr,
                "peerbargain: usage: {}",
                first.trim_start_matches("error: ")
            );
            return EXIT_USAGE;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .target(env_logger::Target::Stderr)
        .try_init();
    match dispatch(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "peerbargain: {}: {}", f.kind, f.reason);
            f.code
        }
    }
}
