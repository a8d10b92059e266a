use dcfwb_core::phy;
use dcfwb_core::sim::{self, SimConfig, SimError, SimStats};
use dcfwb_core::solver::{self, SweepParam};
use dcfwb_core::{Modulation, Scenario};
use rayon::prelude::*;

use crate::args::{AnalyzeArgs, BerArgs, SimulateArgs, SweepArgs};
use crate::svg::{Chart, Series, Style};
use crate::{is_numerical, load_scenario, CliError, Output};

fn num(x: f64) -> String {
    x.to_string()
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

const ANALYZE_HEADER: [&str; 16] = [
    "kind",
    "station_id",
    "rate_class",
    "tau",
    "p_col",
    "p_e",
    "p_eq",
    "q",
    "throughput_bps",
    "t_av_s",
    "t_idle_s",
    "t_success_s",
    "t_collision_s",
    "t_error_s",
    "residual",
    "iterations",
];

pub fn analyze(args: &AnalyzeArgs) -> Result<Output, CliError> {
    let sc = load_scenario(&args.io.scenario)?;
    let op = solver::solve_operating_point(&sc, &args.solver.options())?;
    let report = solver::aggregate_throughput(&op, &sc)?;

    let mut t = Table::new(&ANALYZE_HEADER);
    let blank = String::new;
    for ((cfg, st), bps) in sc
        .stations
        .iter()
        .zip(&op.stations)
        .zip(&report.per_station_bps)
    {
        let mut row = vec![
            "station".to_owned(),
            cfg.id.to_string(),
            cfg.rate_class.to_string(),
            num(st.tau),
            num(st.p_col),
            num(st.p_e),
            num(st.p_eq),
            num(st.q),
            num(*bps),
        ];
        row.resize_with(ANALYZE_HEADER.len(), blank);
        t.row(&row);
    }
    let s = &op.slots;
    t.row(&[
        "aggregate".to_owned(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        num(report.aggregate_bps),
        num(s.t_av),
        num(s.t_i),
        num(s.t_s),
        num(s.t_c),
        num(s.t_e),
        num(op.residual),
        op.iterations.to_string(),
    ]);
    Ok(Output {
        csv: t.finish(),
        ..Output::default()
    })
}

const SIMULATE_HEADER: [&str; 16] = [
    "seed",
    "kind",
    "station_id",
    "tx_attempts",
    "successes",
    "collisions",
    "channel_errors",
    "delivered_payload_bits",
    "throughput_bps",
    "tau_estimate",
    "mean_queue_occupancy",
    "measured_s",
    "idle_slots",
    "success_slots",
    "collision_slots",
    "error_slots",
];

fn sim_error(e: SimError) -> CliError {
    CliError::Input(e.to_string())
}

fn check_window(duration: f64, warmup: f64) -> Result<(), CliError> {
    if warmup >= 0.0 && duration > warmup && duration.is_finite() {
        Ok(())
    } else {
        Err(sim_error(SimError::EmptyWindow { duration, warmup }))
    }
}

fn run_seeds(
    scenario: &Scenario,
    seeds: &[u64],
    duration: f64,
    warmup: f64,
) -> Vec<Result<SimStats, SimError>> {
    seeds
        .par_iter()
        .map(|&seed| {
            sim::run(&SimConfig {
                scenario: scenario.clone(),
                seed,
                duration,
                warmup,
            })
        })
        .collect()
}

pub fn simulate(args: &SimulateArgs) -> Result<Output, CliError> {
    let sc = load_scenario(&args.io.scenario)?;
    check_window(args.duration, args.warmup)?;
    let seeds = args.seed_list();
    let runs = run_seeds(&sc, &seeds, args.duration, args.warmup);

    let mut t = Table::new(&SIMULATE_HEADER);
    for (seed, stats) in seeds.iter().zip(runs) {
        let stats = stats.map_err(sim_error)?;
        let taus = sim::estimate_tau(&stats);
        let secs = stats.measured_seconds;
        let mut totals = [0u64; 5];
        for (st, tau) in stats.per_station.iter().zip(&taus) {
            let counters = [
                st.tx_attempts,
                st.successes,
                st.collisions,
                st.channel_errors,
                st.delivered_payload_bits,
            ];
            for (acc, c) in totals.iter_mut().zip(counters) {
                *acc += c;
            }
            let mut row = vec![seed.to_string(), "station".to_owned(), st.id.to_string()];
            row.extend(counters.iter().map(u64::to_string));
            row.extend([
                num(st.delivered_payload_bits as f64 / secs),
                num(*tau),
                num(st.mean_queue_occupancy),
            ]);
            row.resize_with(SIMULATE_HEADER.len(), String::new);
            t.row(&row);
        }
        let slots = &stats.sim_slots;
        let mut row = vec![seed.to_string(), "aggregate".to_owned(), String::new()];
        row.extend(totals.iter().map(u64::to_string));
        row.extend([
            num(stats.aggregate_bps),
            String::new(),
            String::new(),
            num(secs),
            slots.idle.to_string(),
            slots.success.to_string(),
            slots.collision.to_string(),
            slots.error.to_string(),
        ]);
        t.row(&row);
    }
    Ok(Output {
        csv: t.finish(),
        seeds,
        ..Output::default()
    })
}

const SWEEP_HEADER: [&str; 9] = [
    "rate_class",
    "point",
    "param",
    "value",
    "source",
    "throughput_bps",
    "stderr_bps",
    "seeds",
    "status",
];

fn axis_label(param: SweepParam) -> &'static str {
    match param {
        SweepParam::LambdaPps => "packet arrival rate (packets/s)",
        SweepParam::DistanceM => "distance to access point (m)",
        SweepParam::FixedPer => "packet error rate",
    }
}

/// Mean and standard error of the mean; the error is `None` for one sample.
fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn status(result: Result<(), String>) -> String {
    match result {
        Ok(()) => "ok".to_owned(),
        Err(e) => format!("error: {e}"),
    }
}

pub fn sweep(args: &SweepArgs) -> Result<Output, CliError> {
    let sc = load_scenario(&args.io.scenario)?;
    let axis = args.axis.axis();
    let idx = sc
        .station_index(axis.station)
        .ok_or_else(|| CliError::Input(format!("sweep station {} does not exist", axis.station)))?;
    let grid = args.axis.grid.values();
    let classes = if args.classes.is_empty() {
        vec![sc.stations[idx].rate_class]
    } else {
        args.classes.clone()
    };
    if args.simulate {
        check_window(args.duration, args.warmup)?;
    }
    let seeds = if args.simulate {
        args.seeds.seeds()
    } else {
        Vec::new()
    };
    let opts = args.solver.options();

    let mut series_scenarios = Vec::with_capacity(classes.len());
    for &class in &classes {
        if sc.class(class).is_none() {
            return Err(CliError::Input(format!("unknown rate class {class}")));
        }
        let mut s = sc.clone();
        s.stations[idx].rate_class = class;
        s.check().map_err(|e| CliError::Input(e.to_string()))?;
        series_scenarios.push(s);
    }

    let analytic: Vec<Vec<solver::SweepPoint>> = series_scenarios
        .iter()
        .map(|s| solver::sweep(s, &axis, &grid, &opts))
        .collect::<Result<_, _>>()?;

    // every (series, point, seed) run is independent
    let simulated: Vec<Result<f64, String>> = if args.simulate {
        let mut tasks: Vec<(usize, f64, u64)> = Vec::new();
        for c in 0..classes.len() {
            for &v in &grid {
                tasks.extend(seeds.iter().map(|&s| (c, v, s)));
            }
        }
        tasks
            .par_iter()
            .map(|&(c, value, seed)| {
                let scenario = axis
                    .apply(&series_scenarios[c], value)
                    .map_err(|e| e.to_string())?;
                sim::run(&SimConfig {
                    scenario,
                    seed,
                    duration: args.duration,
                    warmup: args.warmup,
                })
                .map(|s| s.aggregate_bps)
                .map_err(|e| e.to_string())
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut t = Table::new(&SWEEP_HEADER);
    let mut chart = Chart {
        title: format!(
            "Aggregate throughput vs {} of station {}",
            axis.param.name(),
            axis.station
        ),
        x_label: axis_label(axis.param).to_owned(),
        y_label: "aggregate throughput (Mbps)".to_owned(),
        x_log: args.axis.grid.is_log(),
        ..Chart::default()
    };
    let mut any_ok = false;
    let mut failures = Vec::new();
    for (c, points) in analytic.iter().enumerate() {
        let class = classes[c];
        let rate = sc
            .class(class)
            .map(|r| r.data_rate / 1e6)
            .unwrap_or(f64::NAN);
        let mut line = Vec::new();
        let mut marks = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let head = vec![
                class.to_string(),
                i.to_string(),
                axis.param.name().to_owned(),
                num(p.value),
            ];
            let mut row = head.clone();
            row.push("analytic".to_owned());
            match &p.outcome {
                Ok(r) => {
                    any_ok = true;
                    line.push((p.value, r.aggregate_bps / 1e6));
                    row.extend([
                        num(r.aggregate_bps),
                        String::new(),
                        String::new(),
                        status(Ok(())),
                    ]);
                }
                Err(e) => {
                    failures.push((
                        is_numerical(e),
                        format!("class {class}, {} = {}: {e}", axis.param.name(), p.value),
                    ));
                    row.extend([
                        String::new(),
                        String::new(),
                        String::new(),
                        status(Err(e.to_string())),
                    ]);
                }
            }
            t.row(&row);

            if args.simulate {
                let base = (c * grid.len() + i) * seeds.len();
                let runs = &simulated[base..base + seeds.len()];
                let mut row = head;
                row.push("simulated".to_owned());
                match runs.iter().cloned().collect::<Result<Vec<f64>, String>>() {
                    Ok(vals) => {
                        let (mean, se) = mean_stderr(&vals);
                        marks.push((p.value, mean / 1e6));
                        row.extend([
                            num(mean),
                            se.map(num).unwrap_or_default(),
                            vals.len().to_string(),
                            status(Ok(())),
                        ]);
                    }
                    Err(e) => row.extend([
                        String::new(),
                        String::new(),
                        seeds.len().to_string(),
                        status(Err(e)),
                    ]),
                }
                t.row(&row);
            }
        }
        let label = format!("class {class} ({rate} Mbps)");
        chart.series.push(Series {
            label: label.clone(),
            points: line,
            style: Style::Line,
            color: c,
        });
        if args.simulate {
            chart.series.push(Series {
                label: format!("{label}, sim"),
                points: marks,
                style: Style::Markers,
                color: c,
            });
        }
    }

    if !any_ok {
        let numerical = failures.iter().any(|f| f.0);
        let msg = failures
            .first()
            .map(|f| f.1.clone())
            .unwrap_or_else(|| "no grid point succeeded".to_owned());
        return Err(if numerical {
            CliError::Numerical(msg)
        } else {
            CliError::Input(msg)
        });
    }
    Ok(Output {
        csv: t.finish(),
        svg: args.svg.as_ref().map(|_| chart.render()),
        seeds,
        warnings: failures.into_iter().map(|f| f.1).collect(),
    })
}

pub fn ber_curve(args: &BerArgs) -> Result<Output, CliError> {
    let (from, to, step) = (args.from_db, args.to_db, args.step_db);
    if !(from.is_finite() && to.is_finite()) {
        return Err(CliError::Input("SNR bounds must be finite".to_owned()));
    }
    if from > to {
        return Err(CliError::Input(format!(
            "inverted range: --from-db {from} > --to-db {to}"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Input(format!(
            "--step-db must be positive, got {step}"
        )));
    }
    let modulations: Vec<Modulation> = if args.modulations.is_empty() {
        Modulation::ALL.to_vec()
    } else {
        args.modulations.clone()
    };
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;

    let mut header = vec!["gamma_db".to_owned()];
    header.extend(
        modulations
            .iter()
            .map(|m| format!("ber_{}", m.name().to_lowercase())),
    );
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header);
    let mut curves = vec![Vec::with_capacity(count); modulations.len()];
    for i in 0..count {
        let gamma_db = from + step * i as f64;
        let gamma = phy::db_to_linear(gamma_db);
        let mut row = vec![num(gamma_db)];
        for (curve, &m) in curves.iter_mut().zip(&modulations) {
            let b = phy::ber(gamma, m).map_err(|e| CliError::Input(e.to_string()))?;
            curve.push((gamma_db, b));
            row.push(num(b));
        }
        t.row(&row);
    }

    let chart = Chart {
        title: "Bit error rate, Rayleigh fading".to_owned(),
        x_label: "SNR per symbol (dB)".to_owned(),
        y_label: "bit error rate".to_owned(),
        y_log: true,
        series: modulations
            .iter()
            .zip(curves)
            .enumerate()
            .map(|(i, (m, points))| Series {
                label: m.name().to_owned(),
                points,
                style: Style::Line,
                color: i,
            })
            .collect(),
        ..Chart::default()
    };
    Ok(Output {
        csv: t.finish(),
        svg: args.svg.as_ref().map(|_| chart.render()),
        ..Output::default()
    })
}
