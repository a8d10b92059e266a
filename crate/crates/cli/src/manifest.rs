use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::args::{Cli, Command};

/// Written as `<out>.manifest.json` next to every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'static str,
    pub argv: &'a [String],
    pub scenario: Option<&'a Path>,
    pub options: &'a Command,
    pub jobs: Option<u32>,
    pub version: &'static str,
    pub seeds: &'a [u64],
    pub timestamp_unix: u64,
    pub outputs: Vec<&'a Path>,
}

impl<'a> RunManifest<'a> {
    pub fn new(
        cli: &'a Cli,
        argv: &'a [String],
        seeds: &'a [u64],
        out: &'a Path,
        svg: Option<&'a PathBuf>,
    ) -> Self {
        let scenario = match &cli.command {
            Command::Analyze(a) => Some(a.io.scenario.as_path()),
            Command::Simulate(a) => Some(a.io.scenario.as_path()),
            Command::Sweep(a) => Some(a.io.scenario.as_path()),
            Command::BerCurve(_) => None,
        };
        let mut outputs = vec![out];
        outputs.extend(svg.map(PathBuf::as_path));
        RunManifest {
            command: cli.command.name(),
            argv,
            scenario,
            options: &cli.command,
            jobs: cli.jobs,
            version: env!("CARGO_PKG_VERSION"),
            seeds,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs,
        }
    }
}

/// `run.csv` -> `run.csv.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
