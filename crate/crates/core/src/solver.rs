//! Network operating point and aggregate throughput.
//!
//! The unknowns are every station's attempt probability `tau`, collision
//! probability `p_col` and queue probability `q`, plus the mean slot
//! duration `T_av` that couples `q` to the rest. The solver runs damped
//! successive substitution: an inner loop settles `(tau, p_col)` at fixed
//! `q`, an outer loop recomputes `T_av` and then `q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{self, MarkovError, StationState};
use crate::phy::{self, PhyError};
use crate::scenario::{Channel, ClassMap, RateClass, Scenario, ValidationErrors};
use crate::slots::{SlotDurations, SlotError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Max-norm bound on the fixed-point residual.
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Initial relaxation factor on `tau` updates, in `(0, 1]`.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            damping: 0.5,
        }
    }
}

// consecutive residual increases that count as oscillation
const RISING_LIMIT: u32 = 8;
const MAX_HALVINGS: u32 = 3;
// how far below the tolerance to keep refining while progress continues
const POLISH: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(#[from] ValidationErrors),
    #[error("station {station}: {source}")]
    Phy { station: u32, source: PhyError },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { residual: f64, iterations: u32 },
    #[error("station {station}: failure probability P_eq reached 1 (packet error rate {per})")]
    DegenerateScenario { station: u32, per: f64 },
    #[error("operating point has not converged")]
    NotConverged,
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
    #[error("sweep station {0} does not exist")]
    UnknownStation(u32),
    #[error(transparent)]
    Slot(#[from] SlotError),
    #[error("station {station}: {source}")]
    Markov { station: u32, source: MarkovError },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatingPoint {
    pub stations: Vec<StationState>,
    pub slots: SlotDurations,
    pub residual: f64,
    /// Outer iterations used.
    pub iterations: u32,
    pub converged: bool,
}

impl OperatingPoint {
    pub fn taus(&self) -> Vec<f64> {
        self.stations.iter().map(|s| s.tau).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputReport {
    pub aggregate_bps: f64,
    pub per_station_bps: Vec<f64>,
    pub t_av: f64,
    pub operating_point: OperatingPoint,
}

/// Packet error rate of every station, in station order.
pub fn station_pers(scenario: &Scenario) -> Result<Vec<f64>, SolverError> {
    scenario
        .stations
        .iter()
        .zip(scenario.station_classes())
        .map(|(st, class)| {
            phy::station_per(st, class, &scenario.radio, scenario.mac.payload_bits).map_err(
                |source| SolverError::Phy {
                    station: st.id,
                    source,
                },
            )
        })
        .collect()
}

struct Network<'a> {
    scenario: &'a Scenario,
    classes: Vec<&'a RateClass>,
    map: ClassMap,
    pers: Vec<f64>,
}

impl Network<'_> {
    fn station_id(&self, s: usize) -> u32 {
        self.scenario.stations[s].id
    }

    fn q_target(&self, s: usize, t_av: f64) -> f64 {
        let st = &self.scenario.stations[s];
        if st.saturated {
            1.0
        } else {
            markov::q_prob(st.lambda_pps, t_av)
        }
    }

    fn markov_err(&self, s: usize, e: MarkovError) -> SolverError {
        match e {
            MarkovError::PeqOutOfRange(_) => SolverError::DegenerateScenario {
                station: self.station_id(s),
                per: self.pers[s],
            },
            source => SolverError::Markov {
                station: self.station_id(s),
                source,
            },
        }
    }

    /// Attempt probability each station would choose given the others'.
    fn tau_targets(&self, taus: &[f64], qs: &[f64], out: &mut [f64]) -> Result<(), SolverError> {
        let mac = &self.scenario.mac;
        for s in 0..taus.len() {
            let p_eq = markov::p_eq(markov::p_col(s, taus), self.pers[s]);
            out[s] = if self.scenario.stations[s].saturated {
                markov::tau_saturated(p_eq, mac.w0, mac.m)
            } else {
                markov::alpha(p_eq, mac.w0, mac.m)
                    .and_then(|a| markov::tau_unsaturated(qs[s], p_eq, a))
            }
            .map_err(|e| self.markov_err(s, e))?;
        }
        Ok(())
    }

    fn slots(&self, taus: &[f64]) -> Result<SlotDurations, SolverError> {
        Ok(SlotDurations::compute(
            taus,
            &self.pers,
            &self.classes,
            &self.map,
            &self.scenario.mac,
        )?)
    }

    fn station_state(&self, s: usize, taus: &[f64], q: f64) -> Result<StationState, SolverError> {
        let mac = &self.scenario.mac;
        let p_col = markov::p_col(s, taus);
        let p_e = self.pers[s];
        let p_eq = markov::p_eq(p_col, p_e);
        let alpha = markov::alpha(p_eq, mac.w0, mac.m).map_err(|e| self.markov_err(s, e))?;
        let (b_00, b_i) = markov::stationary_split_small_buffer(q, alpha);
        Ok(StationState {
            tau: taus[s],
            p_col,
            p_e,
            p_eq,
            q,
            p_i0: q,
            b_i,
            b_00,
            alpha,
        })
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Tracks residual growth and halves the relaxation factor when it keeps
/// rising.
struct Relaxation {
    factor: f64,
    halvings: u32,
    rising: u32,
    last: f64,
}

impl Relaxation {
    fn new(factor: f64) -> Self {
        Relaxation {
            factor,
            halvings: 0,
            rising: 0,
            last: f64::INFINITY,
        }
    }

    fn restart(&mut self) {
        self.rising = 0;
        self.last = f64::INFINITY;
    }

    fn observe(&mut self, residual: f64) {
        if residual > self.last {
            self.rising += 1;
            if self.rising >= RISING_LIMIT && self.halvings < MAX_HALVINGS {
                self.factor *= 0.5;
                self.halvings += 1;
                self.rising = 0;
            }
        } else {
            self.rising = 0;
        }
        self.last = residual;
    }
}

/// Solves the coupled per-station equations for the network operating point.
///
/// Deterministic for fixed inputs: every run starts from
/// `tau = 2 / (W_0 + 1)` and `T_av = sigma`. The returned point has a
/// residual within `options.tolerance`, refined further while that remains
/// cheap.
pub fn solve_operating_point(
    scenario: &Scenario,
    options: &SolverOptions,
) -> Result<OperatingPoint, SolverError> {
    scenario.check()?;
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(SolverError::InvalidOptions("damping must lie in (0, 1]"));
    }
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(SolverError::InvalidOptions("tolerance must be positive"));
    }
    if options.max_iterations == 0 {
        return Err(SolverError::InvalidOptions(
            "max_iterations must be positive",
        ));
    }

    let net = Network {
        scenario,
        classes: scenario.station_classes(),
        map: scenario.class_map(),
        pers: station_pers(scenario)?,
    };
    let n = scenario.stations.len();
    let mac = &scenario.mac;

    let mut taus = vec![2.0 / (f64::from(mac.w0) + 1.0); n];
    let mut qs: Vec<f64> = (0..n).map(|s| net.q_target(s, mac.slot_sigma)).collect();
    let mut targets = vec![0.0; n];
    let mut inner = Relaxation::new(options.damping);
    let mut outer = Relaxation::new(1.0);
    let mut residual = f64::INFINITY;
    // Past the tolerance, keep iterating while the residual still shrinks.
    let polish_to = options.tolerance * POLISH;
    let done = |r: f64, previous: f64| r <= polish_to || (r <= options.tolerance && r >= previous);

    for iteration in 1..=options.max_iterations {
        // (tau, p_col) at fixed q
        inner.restart();
        let mut tau_residual = f64::INFINITY;
        let mut previous = f64::INFINITY;
        for _ in 0..options.max_iterations {
            net.tau_targets(&taus, &qs, &mut targets)?;
            tau_residual = max_abs_diff(&targets, &taus);
            if done(tau_residual, previous) {
                break;
            }
            previous = tau_residual;
            inner.observe(tau_residual);
            for (t, &target) in taus.iter_mut().zip(&targets) {
                // q = 0: the station never transmits, no need to creep up on it
                if target == 0.0 {
                    *t = 0.0;
                } else {
                    *t += inner.factor * (target - *t);
                }
            }
        }

        // T_av, then q
        let slots = net.slots(&taus)?;
        let q_targets: Vec<f64> = (0..n).map(|s| net.q_target(s, slots.t_av)).collect();
        let q_residual = max_abs_diff(&q_targets, &qs);
        let previous = residual;
        residual = tau_residual.max(q_residual);

        if done(residual, previous)
            || (residual <= options.tolerance && iteration == options.max_iterations)
        {
            let stations = (0..n)
                .map(|s| net.station_state(s, &taus, qs[s]))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(OperatingPoint {
                stations,
                slots,
                residual,
                iterations: iteration,
                converged: true,
            });
        }
        if tau_residual > options.tolerance {
            break;
        }
        outer.observe(q_residual);
        for (q, target) in qs.iter_mut().zip(&q_targets) {
            *q += outer.factor * (target - *q);
        }
    }

    Err(SolverError::NoConvergence {
        residual,
        iterations: options.max_iterations,
    })
}

/// Aggregate payload throughput at an operating point, bits per second.
pub fn aggregate_throughput(
    op: &OperatingPoint,
    scenario: &Scenario,
) -> Result<ThroughputReport, SolverError> {
    if !op.converged {
        return Err(SolverError::NotConverged);
    }
    let payload = f64::from(scenario.mac.payload_bits);
    let t_av = op.slots.t_av;
    let per_station_bps: Vec<f64> = op
        .slots
        .per_station_success
        .iter()
        .zip(&op.stations)
        .map(|(succ, st)| succ.p_s * (1.0 - st.p_e) * payload / t_av)
        .collect();
    Ok(ThroughputReport {
        aggregate_bps: per_station_bps.iter().sum(),
        per_station_bps,
        t_av,
        operating_point: op.clone(),
    })
}

/// Solve and compute throughput in one step.
pub fn analyze(
    scenario: &Scenario,
    options: &SolverOptions,
) -> Result<ThroughputReport, SolverError> {
    let op = solve_operating_point(scenario, options)?;
    aggregate_throughput(&op, scenario)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    LambdaPps,
    DistanceM,
    FixedPer,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::LambdaPps => "lambda_pps",
            SweepParam::DistanceM => "distance_m",
            SweepParam::FixedPer => "fixed_per",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Self::LambdaPps, Self::DistanceM, Self::FixedPer]
            .into_iter()
            .find(|p| p.name() == name)
    }
}

/// One station parameter to vary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub station: u32,
    pub param: SweepParam,
}

impl SweepAxis {
    /// Copy of `scenario` with the axis parameter set to `value`.
    pub fn apply(&self, scenario: &Scenario, value: f64) -> Result<Scenario, SolverError> {
        let mut out = scenario.clone();
        let idx = out
            .station_index(self.station)
            .ok_or(SolverError::UnknownStation(self.station))?;
        let st = &mut out.stations[idx];
        match self.param {
            SweepParam::LambdaPps => st.lambda_pps = value,
            SweepParam::DistanceM => st.channel = Channel::Distance(value),
            SweepParam::FixedPer => st.channel = Channel::FixedPer(value),
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: Result<ThroughputReport, SolverError>,
}

/// Solves every grid point from a cold start. Points run on the current
/// rayon pool; results keep grid order. A failing point is recorded and the
/// sweep continues.
pub fn sweep(
    scenario: &Scenario,
    axis: &SweepAxis,
    grid: &[f64],
    options: &SolverOptions,
) -> Result<Vec<SweepPoint>, SolverError> {
    if scenario.station_index(axis.station).is_none() {
        return Err(SolverError::UnknownStation(axis.station));
    }
    Ok(grid
        .par_iter()
        .map(|&value| SweepPoint {
            value,
            outcome: axis
                .apply(scenario, value)
                .and_then(|sc| analyze(&sc, options)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::StationConfig;

    fn station(id: u32, class: u32, saturated: bool, lambda: f64, per: f64) -> StationConfig {
        StationConfig {
            id,
            rate_class: class,
            lambda_pps: lambda,
            saturated,
            channel: Channel::FixedPer(per),
        }
    }

    #[test]
    fn lone_saturated_station_is_closed_form() {
        let sc = Scenario::with_stations(vec![station(1, 4, true, 0.0, 0.0)]);
        let op = solve_operating_point(&sc, &SolverOptions::default()).unwrap();
        assert!(op.converged);
        assert!(op.residual < 1e-12);
        assert!((op.stations[0].tau - 2.0 / 33.0).abs() < 1e-15);
        assert_eq!(op.stations[0].p_col, 0.0);
        assert_eq!(op.stations[0].b_i, 0.0);
    }

    #[test]
    fn single_station_throughput() {
        let sc = Scenario::with_stations(vec![station(1, 4, true, 0.0, 0.0)]);
        let rep = analyze(&sc, &SolverOptions::default()).unwrap();
        // (2/33) * 8224 bits over (31 * 20 us + 2 * 1326 us) / 33
        let expected = 2.0 * 8224.0 / (31.0 * 20e-6 + 2.0 * 1326e-6);
        assert!((rep.aggregate_bps - expected).abs() < 1e-6);
        assert!((rep.aggregate_bps / 1e6 - 5.03).abs() < 0.005);
        assert_eq!(rep.aggregate_bps, rep.per_station_bps.iter().sum::<f64>());
    }

    #[test]
    fn idle_network_carries_nothing() {
        let sc = Scenario::with_stations(vec![
            station(1, 4, false, 0.0, 0.0),
            station(2, 1, false, 0.0, 0.0),
        ]);
        let rep = analyze(&sc, &SolverOptions::default()).unwrap();
        assert_eq!(rep.aggregate_bps, 0.0);
        assert_eq!(rep.t_av, sc.mac.slot_sigma);
        let st = rep.operating_point.stations[0];
        assert_eq!((st.b_00, st.b_i), (0.0, 1.0));
    }

    #[test]
    fn uniform_per_scales_throughput_at_fixed_point() {
        let sc = Scenario::with_stations(vec![
            station(1, 4, true, 0.0, 0.0),
            station(2, 2, true, 0.0, 0.0),
        ]);
        let op = solve_operating_point(&sc, &SolverOptions::default()).unwrap();
        let base = aggregate_throughput(&op, &sc).unwrap();
        let mut lossy = op.clone();
        for st in &mut lossy.stations {
            st.p_e = 0.1;
        }
        let scaled = aggregate_throughput(&lossy, &sc).unwrap();
        for (a, b) in base.per_station_bps.iter().zip(&scaled.per_station_bps) {
            assert!((b - 0.9 * a).abs() < 1e-9 * a);
        }
    }

    #[test]
    fn unconverged_point_is_rejected() {
        let sc = Scenario::with_stations(vec![station(1, 4, true, 0.0, 0.0)]);
        let mut op = solve_operating_point(&sc, &SolverOptions::default()).unwrap();
        op.converged = false;
        assert_eq!(
            aggregate_throughput(&op, &sc),
            Err(SolverError::NotConverged)
        );
    }

    #[test]
    fn iteration_budget_exhaustion() {
        let stations = (1..=10).map(|i| station(i, 4, true, 0.0, 0.0)).collect();
        let sc = Scenario::with_stations(stations);
        let opts = SolverOptions {
            max_iterations: 2,
            ..Default::default()
        };
        assert!(matches!(
            solve_operating_point(&sc, &opts),
            Err(SolverError::NoConvergence { .. })
        ));
    }

    #[test]
    fn degenerate_window_reports_station() {
        let mut sc = Scenario::with_stations(vec![
            station(1, 4, true, 0.0, 0.0),
            station(2, 4, true, 0.0, 0.0),
        ]);
        sc.mac.w0 = 1;
        sc.mac.m = 0;
        assert!(matches!(
            solve_operating_point(&sc, &SolverOptions::default()),
            Err(SolverError::DegenerateScenario { .. })
        ));
    }

    #[test]
    fn sweep_of_one_point_matches_direct_solve() {
        let sc = Scenario::with_stations(vec![
            station(1, 4, true, 0.0, 0.0),
            station(2, 1, false, 5.0, 0.0),
        ]);
        let axis = SweepAxis {
            station: 2,
            param: SweepParam::LambdaPps,
        };
        let opts = SolverOptions::default();
        let pts = sweep(&sc, &axis, &[20.0], &opts).unwrap();
        let direct = analyze(&axis.apply(&sc, 20.0).unwrap(), &opts).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].outcome.as_ref().unwrap(), &direct);
        assert_eq!(
            sweep(&sc, &SweepAxis { station: 9, ..axis }, &[1.0], &opts),
            Err(SolverError::UnknownStation(9))
        );
    }

    #[test]
    fn sweep_records_bad_points() {
        let sc = Scenario::with_stations(vec![station(1, 4, true, 0.0, 0.0)]);
        let axis = SweepAxis {
            station: 1,
            param: SweepParam::FixedPer,
        };
        let pts = sweep(&sc, &axis, &[0.0, 1.5, 0.1], &SolverOptions::default()).unwrap();
        assert!(pts[0].outcome.is_ok());
        assert!(matches!(
            pts[1].outcome,
            Err(SolverError::InvalidScenario(_))
        ));
        assert!(pts[2].outcome.is_ok());
    }
}
