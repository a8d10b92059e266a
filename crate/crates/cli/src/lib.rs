//! `dcfwb` command-line front end: scenario loading, command dispatch, CSV,
//! SVG and run manifests.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

pub mod args;
pub mod commands;
pub mod grid;
pub mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use dcfwb_core::scenario::LoadError;
use dcfwb_core::solver::SolverError;
use dcfwb_core::Scenario;
use thiserror::Error;

use args::{Cli, Command};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Input(_) | CliError::Output { .. } => EXIT_INPUT,
        }
    }
}

/// Solver failures caused by the numbers rather than by the input.
pub fn is_numerical(e: &SolverError) -> bool {
    matches!(
        e,
        SolverError::NoConvergence { .. }
            | SolverError::DegenerateScenario { .. }
            | SolverError::NotConverged
            | SolverError::Slot(_)
            | SolverError::Markov { .. }
    )
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        if is_numerical(&e) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path).map_err(|e| match e {
        LoadError::Io { .. } => CliError::Input(e.to_string()),
        _ => CliError::Input(format!("{}: {e}", path.display())),
    })
}

/// What a command produced, before anything touches the filesystem.
#[derive(Debug, Default)]
pub struct Output {
    pub csv: Vec<u8>,
    pub svg: Option<String>,
    pub seeds: Vec<u64>,
    /// Some points failed but the command as a whole succeeded.
    pub warnings: Vec<String>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.to_owned(),
        source,
    })
}

/// Runs the command without touching the filesystem beyond reading the
/// scenario.
pub fn execute(command: &Command) -> Result<Output, CliError> {
    match command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::BerCurve(a) => commands::ber_curve(a),
    }
}

/// Runs a parsed command line and writes its outputs.
pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let output = match cli.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build()
            .map_err(|e| CliError::Input(format!("cannot start {jobs} workers: {e}")))?
            .install(|| execute(&cli.command)),
        None => execute(&cli.command),
    }?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }

    let (out, svg_path) = match &cli.command {
        Command::Analyze(a) => (&a.io.out, None),
        Command::Simulate(a) => (&a.io.out, None),
        Command::Sweep(a) => (&a.io.out, a.svg.as_ref()),
        Command::BerCurve(a) => (&a.out, a.svg.as_ref()),
    };
    match out {
        Some(path) => write_file(path, &output.csv)?,
        None => std::io::stdout()
            .write_all(&output.csv)
            .map_err(|source| CliError::Output {
                path: "<stdout>".into(),
                source,
            })?,
    }
    if let (Some(path), Some(svg)) = (svg_path, &output.svg) {
        write_file(path, svg.as_bytes())?;
    }
    if let Some(path) = out {
        let m = manifest::RunManifest::new(cli, argv, &output.seeds, path, svg_path);
        let json = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        write_file(&manifest::manifest_path(path), &json)?;
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match run(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
