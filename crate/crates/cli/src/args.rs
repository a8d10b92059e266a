use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use dcfwb_core::solver::{SweepAxis, SweepParam};
use dcfwb_core::{Modulation, SolverOptions};
use serde::Serialize;

use crate::grid::Grid;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "dcfwb",
    version,
    about = "802.11 DCF throughput model and simulator"
)]
pub struct Cli {
    /// Worker threads for sweep points and simulation seeds.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve the analytical model for one scenario.
    #[command(after_long_help = ANALYZE_COLUMNS)]
    Analyze(AnalyzeArgs),
    /// Run the discrete-event simulator.
    #[command(after_long_help = SIMULATE_COLUMNS)]
    Simulate(SimulateArgs),
    /// Vary one station parameter over a grid.
    #[command(after_long_help = SWEEP_COLUMNS)]
    Sweep(SweepArgs),
    /// Tabulate bit error rate against SNR per symbol.
    #[command(after_long_help = BER_COLUMNS)]
    BerCurve(BerArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::BerCurve(_) => "ber-curve",
        }
    }
}

const ANALYZE_COLUMNS: &str = "\
CSV columns:
  kind            station | aggregate
  station_id, rate_class
  tau, p_col, p_e, p_eq, q              (station rows)
  throughput_bps                         (per station, or aggregate S)
  t_av_s, t_idle_s, t_success_s, t_collision_s, t_error_s, residual, iterations
                                         (aggregate row)";

const SIMULATE_COLUMNS: &str = "\
CSV columns, one block of rows per seed:
  seed, kind (station | aggregate), station_id
  tx_attempts, successes, collisions, channel_errors, delivered_payload_bits
  throughput_bps, tau_estimate, mean_queue_occupancy     (station rows)
  measured_s, idle_slots, success_slots, collision_slots, error_slots
                                                          (aggregate row)
The aggregate row sums the counters of its station rows.";

const SWEEP_COLUMNS: &str = "\
CSV columns (long format, one row per grid point per source):
  rate_class, point, param, value, source (analytic | simulated),
  throughput_bps, stderr_bps, seeds, status (ok | error: ...)
Default grids: lambda_pps log:0.1:1000:41, distance_m lin:1:100:100,
fixed_per lin:0:0.5:51.";

const BER_COLUMNS: &str = "\
CSV columns: gamma_db, then ber_<MODULATION> for each selected modulation.";

#[derive(Debug, Args, Serialize)]
pub struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output CSV path. A `<out>.manifest.json` is written next to it.
    /// Without it the CSV goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverOptions::default().tolerance)]
    pub tolerance: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iterations)]
    pub max_iterations: u32,
    #[arg(long, default_value_t = SolverOptions::default().damping)]
    pub damping: f64,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            damping: self.damping,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub io: ScenarioArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub io: ScenarioArgs,
    /// Single seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seed range, `N..M` (exclusive) or `N..=M`.
    #[arg(long)]
    pub seeds: Option<SeedRange>,
    /// Simulated seconds, warmup included.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Leading seconds left out of the statistics.
    #[arg(long, default_value_t = 1.0)]
    pub warmup: f64,
}

impl SimulateArgs {
    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.seed) {
            (Some(r), _) => r.seeds(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![0],
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: ScenarioArgs,
    /// `station=ID,param=lambda_pps|distance_m|fixed_per[,grid=SPEC]`.
    #[arg(long)]
    pub axis: AxisSpec,
    /// Rate class ids for the swept station, one curve each. Defaults to
    /// the class in the scenario.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<u32>,
    /// Also simulate every point.
    #[arg(long)]
    pub simulate: bool,
    /// Seeds for `--simulate`, `N..M` or `N..=M`.
    #[arg(long, default_value = "0..5")]
    pub seeds: SeedRange,
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1.0)]
    pub warmup: f64,
    /// Write a line chart of the sweep.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BerArgs {
    /// Lowest SNR per symbol, dB.
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub from_db: f64,
    /// Highest SNR per symbol, dB.
    #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
    pub to_db: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step_db: f64,
    /// Modulations to tabulate (DBPSK, DQPSK, CCK55, CCK11). Defaults to all.
    #[arg(long, value_delimiter = ',', value_parser = parse_modulation)]
    pub modulations: Vec<Modulation>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

fn parse_modulation(s: &str) -> Result<Modulation, String> {
    Modulation::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| format!("unknown modulation {s:?}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SeedRange {
    pub start: u64,
    /// Exclusive.
    pub end: u64,
}

impl SeedRange {
    pub fn seeds(&self) -> Vec<u64> {
        (self.start..self.end).collect()
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("seed range {s:?} must look like N..M or N..=M");
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let start: u64 = a.trim().parse().map_err(|_| bad())?;
        let end = match b.strip_prefix('=') {
            Some(b) => b
                .trim()
                .parse::<u64>()
                .map_err(|_| bad())?
                .checked_add(1)
                .ok_or_else(bad)?,
            None => b.trim().parse().map_err(|_| bad())?,
        };
        if end <= start {
            return Err(format!("seed range {s:?} is empty"));
        }
        Ok(SeedRange { start, end })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisSpec {
    pub station: u32,
    pub param: SweepParam,
    pub grid: Grid,
}

impl AxisSpec {
    pub fn axis(&self) -> SweepAxis {
        SweepAxis {
            station: self.station,
            param: self.param,
        }
    }
}

pub fn default_grid(param: SweepParam) -> Grid {
    match param {
        SweepParam::LambdaPps => Grid::Log {
            from: 0.1,
            to: 1000.0,
            points: 41,
        },
        SweepParam::DistanceM => Grid::Lin {
            from: 1.0,
            to: 100.0,
            points: 100,
        },
        SweepParam::FixedPer => Grid::Lin {
            from: 0.0,
            to: 0.5,
            points: 51,
        },
    }
}

impl FromStr for AxisSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut station, mut param, mut grid) = (None, None, None);
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("axis entry {part:?} is not key=value"))?;
            match key.trim() {
                "station" => {
                    station = Some(
                        value
                            .trim()
                            .parse::<u32>()
                            .map_err(|_| format!("bad station id {value:?}"))?,
                    )
                }
                "param" => {
                    param = Some(SweepParam::parse(value.trim()).ok_or_else(|| {
                        format!("unknown param {value:?}; use lambda_pps, distance_m or fixed_per")
                    })?)
                }
                "grid" => grid = Some(value.parse::<Grid>().map_err(|e| e.to_string())?),
                other => return Err(format!("unknown axis key {other:?}")),
            }
        }
        let station = station.ok_or("axis needs station=ID")?;
        let param = param.ok_or("axis needs param=NAME")?;
        Ok(AxisSpec {
            station,
            param,
            grid: grid.unwrap_or_else(|| default_grid(param)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(
            "0..5".parse::<SeedRange>().unwrap().seeds(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!("3..=4".parse::<SeedRange>().unwrap().seeds(), vec![3, 4]);
        assert!("5..5".parse::<SeedRange>().is_err());
        assert!("5".parse::<SeedRange>().is_err());
    }

    #[test]
    fn axis_specs() {
        let a: AxisSpec = "station=10,param=lambda_pps,grid=1;10".parse().unwrap();
        assert_eq!(a.station, 10);
        assert_eq!(a.param, SweepParam::LambdaPps);
        assert_eq!(a.grid.values(), vec![1.0, 10.0]);
        let d: AxisSpec = "param=fixed_per,station=2".parse().unwrap();
        assert_eq!(d.grid, default_grid(SweepParam::FixedPer));
        assert!("station=1".parse::<AxisSpec>().is_err());
        assert!("station=1,param=speed".parse::<AxisSpec>().is_err());
        assert!("station=1,param=lambda_pps,grid="
            .parse::<AxisSpec>()
            .is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
