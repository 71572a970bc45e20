//! The `dyadic-spectra` command line: one subcommand per operation, JSON
//! measure specs, experiment manifests and deterministic reports.

mod commands;
mod manifest;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;
use crate::measure::spec::MeasureSpec;
use crate::measure::DyadicMeasure;
use crate::rational::{self, Rational};

pub use commands::*;
pub use manifest::{run_manifest, Manifest, ManifestRun, RunSummary};
pub use report::{render, version, write_atomic, Format, Outcome, Report, Table};

#[derive(Debug, Parser)]
#[command(name = "dyadic-spectra", version = report::VERSION, about = "Singular measures on the circle at finite dyadic resolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Seed for random measure specs and random probes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a measure and export its weights.
    Measure(MeasureArgs),
    /// Per-level martingale masses and vertex classification.
    Tree(TreeArgs),
    /// Find a level with small turbulent mass.
    MountainRiver(RiverArgs),
    /// Select a covering family of cells.
    Cover(CoverArgs),
    /// Estimate c_β from the heaviest cells.
    Cbeta(CbetaArgs),
    /// Run the h_n witness pipeline.
    #[command(name = "prop2")]
    Witness(WitnessArgs),
    /// Band energies of ĥ_n and the band polynomial.
    Band(BandArgs),
    /// Exact Riesz product spectrum.
    Riesz(RieszArgs),
    /// Fourier–Stieltjes coefficients on [−N, N].
    Spectrum(SpectrumArgs),
    /// Decay of convolution powers against the witness bound.
    Decay(DecayArgs),
    /// Walsh, Haar and Lorentz statistics.
    Walsh(WalshArgs),
    /// Run every entry of an experiment manifest.
    Manifest(ManifestArgs),
}

pub(crate) fn parse_rat(s: &str) -> std::result::Result<Rational, String> {
    rational::parse_rational(s).map_err(|e| e.to_string())
}

/// `--measure` accepts a path or inline JSON.
pub fn load_measure(arg: &str, seed: Option<u64>) -> crate::Result<DyadicMeasure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| Error::invalid(format!("cannot read measure spec `{arg}`: {e}")))?
    };
    MeasureSpec::from_json(&text)?.build(seed)
}

/// Exit code for an error: 1 when a search came up empty, 2 for bad input.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::River(_) | Error::Cover(_) | Error::NoAdmissibleScale { .. } => 1,
        Error::Stage { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn error_object(e: &Error) -> serde_json::Value {
    serde_json::json!({"error": {"kind": e.kind(), "message": e.to_string()}})
}

/// Parses `argv` (without the program name), runs it and writes the report.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let echo: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(std::iter::once(OsString::from("dyadic-spectra")).chain(args)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else {
                let obj = serde_json::json!({"error": {"kind": "usage", "message": e.to_string()}});
                let _ = writeln!(stderr, "{obj}");
            }
            return code;
        }
    };
    let global = cli.global.clone();
    match execute(&cli.command, &global, echo) {
        Ok((report, table)) => {
            let bytes = match render(&report, table.as_ref(), global.format) {
                Ok(b) => b,
                Err(e) => {
                    let _ = writeln!(stderr, "{}", error_object(&e));
                    return 2;
                }
            };
            let written = match &global.out {
                Some(path) => write_atomic(path, &bytes),
                None => stdout.write_all(&bytes).map_err(Error::from),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "{}", error_object(&e));
                return 2;
            }
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_object(&e));
            exit_code(&e)
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
