//! The `fea` command line: accuracy sweeps, microbenchmarks, property probes
//! and feature-selection experiments.
//!
//! Every subcommand prints its summary table to stdout. With `--out PATH`
//! the full table is also written to `PATH`, next to a `PATH.manifest.json`
//! sidecar holding the [`RunManifest`] and the summary. Nothing is read from
//! the environment, so a run is fully determined by its flags and seed.
//!
//! Exit status: 0 success, 1 usage error, 2 property failure, 3 numeric or
//! runtime failure.

mod commands;
mod manifest;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::FeaError;

use commands::{cmd_accuracy, cmd_bench, cmd_featsel, cmd_props};
pub use commands::{property_verdicts, FeatselSpec, PropertyVerdict, Verdict, PUBLISHED_LIPSCHITZ};
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PROPERTY: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("property check failed: {0}")]
    Property(String),
    #[error(transparent)]
    Runtime(#[from] FeaError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Property(_) => EXIT_PROPERTY,
            CliError::Runtime(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

pub(crate) fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the full table here (plus a `.manifest.json` sidecar).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Log verbosity on stderr (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Parser)]
#[command(name = "fea", version, about = "Fast entropy approximations: accuracy, speed and feature selection")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pointwise error of approximate kernels against the exact ones.
    Accuracy(commands::AccuracyArgs),
    /// Single-threaded per-element timings and speedups.
    Bench(commands::BenchArgs),
    /// Shape-property probes with one verdict per property.
    Props(commands::PropsArgs),
    /// Paired multi-seed comparison of feature-selection methods.
    Featsel(commands::FeatselArgs),
}

/// Output of one subcommand.
pub(crate) struct Outcome {
    /// Printed to stdout.
    pub summary: Table,
    /// Written to `--out`.
    pub full: Table,
    /// Embedded in the manifest sidecar.
    pub summary_json: serde_json::Value,
    pub config_json: serde_json::Value,
    /// Set when a hard property failed; the output is still written.
    pub failure: Option<CliError>,
}

/// A table rendered either as CSV (header always present) or as JSON rows.
pub(crate) struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // `{}` on f64 is the shortest string that round-trips
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or_else(|| serde_json::Value::String(v.to_string())),
            Cell::Int(v) => (*v).into(),
            Cell::Text(s) => s.clone().into(),
            Cell::Bool(b) => (*b).into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn json_rows(&self) -> serde_json::Value {
        self.rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(h, c)| (h.to_string(), c.json()))
                    .collect::<serde_json::Map<_, _>>()
                    .into()
            })
            .collect::<Vec<serde_json::Value>>()
            .into()
    }

    fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.header)?;
        for r in &self.rows {
            wr.write_record(r.iter().map(Cell::csv))?;
        }
        wr.flush()?;
        Ok(())
    }

    fn write<W: Write>(&self, mut w: W, format: Format, manifest: Option<&RunManifest>) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Json => {
                let mut doc = serde_json::Map::new();
                if let Some(m) = manifest {
                    doc.insert("manifest".into(), serde_json::to_value(m)?);
                }
                doc.insert("rows".into(), self.json_rows());
                serde_json::to_writer_pretty(&mut w, &doc)?;
                writeln!(w)?;
                Ok(())
            }
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    // a second in-process run keeps the first logger
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn execute(cli: &Cli, argv: &[String], stdout: &mut dyn Write) -> Result<(), CliError> {
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Accuracy(a) => cmd_accuracy(a, g)?,
        Command::Bench(a) => cmd_bench(a, g)?,
        Command::Props(a) => cmd_props(a, g)?,
        Command::Featsel(a) => cmd_featsel(a, g)?,
    };
    let manifest = RunManifest::new(argv, &outcome.config_json, g.seed);

    outcome.summary.write(&mut *stdout, g.format, None)?;
    stdout.flush()?;
    if let Some(path) = &g.out {
        let file = BufWriter::new(File::create(path)?);
        outcome.full.write(file, g.format, Some(&manifest))?;
        let side = serde_json::json!({
            "manifest": manifest,
            "config": outcome.config_json,
            "summary": outcome.summary_json,
        });
        let mut f = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer_pretty(&mut f, &side)?;
        writeln!(f)?;
        f.flush()?;
    }
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing the summary to `stdout`. Returns the process exit status.
pub fn run<I, S>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    eprintln!("{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    init_logging(cli.global.verbose);
    match execute(&cli, &argv, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fea: {e}");
            e.exit_code()
        }
    }
}
