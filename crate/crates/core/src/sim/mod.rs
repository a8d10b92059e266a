//! Discrete-event simulator of DCF basic access (DATA + ACK).
//!
//! Time is integer nanoseconds. All stations hear each other; a collision
//! happens exactly when two countdowns expire at the same instant. The
//! channel then stays busy for the longest frame involved.
//!
//! Backoff follows the slotted chain: a counter `k` drawn from `[0, W)`
//! means `k` idle slots and then a transmission. A station that is counting
//! down when someone else transmits treats that busy period as one slot and
//! decrements once when the medium is released. There is no retry limit:
//! after `m` doublings the window stays at `W_max`.
//!
//! Each station owns a ChaCha8 generator seeded with `seed ^ station_id`,
//! used for its arrivals, backoff draws and channel-error draws.

mod station;

use thiserror::Error;

use crate::phy::{self, PhyError};
use crate::scenario::{Scenario, ValidationErrors};
use station::{Countdown, Station};

pub type Nanos = u64;

pub fn to_nanos(seconds: f64) -> Nanos {
    (seconds * 1e9).round() as Nanos
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Simulated seconds, warmup included.
    pub duration: f64,
    /// Leading seconds excluded from statistics.
    pub warmup: f64,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(#[from] ValidationErrors),
    #[error("duration ({duration} s) must exceed warmup ({warmup} s), warmup must be >= 0")]
    EmptyWindow { duration: f64, warmup: f64 },
    #[error("station {station}: {source}")]
    Phy { station: u32, source: PhyError },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StationStats {
    pub id: u32,
    pub tx_attempts: u64,
    pub successes: u64,
    pub collisions: u64,
    pub channel_errors: u64,
    pub delivered_payload_bits: u64,
    /// Time-averaged queue length (head-of-line frame included). Saturated
    /// stations report 1.
    pub mean_queue_occupancy: f64,
    /// Generic slots (idle slots counted down plus busy periods) seen while
    /// the station held a backoff counter.
    pub eligible_slots: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SlotCounts {
    pub idle: u64,
    pub success: u64,
    pub collision: u64,
    pub error: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimStats {
    pub per_station: Vec<StationStats>,
    pub aggregate_bps: f64,
    pub sim_slots: SlotCounts,
    /// Length of the measurement window, seconds.
    pub measured_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BusyKind {
    Success,
    ChannelError,
    Collision,
}

/// One busy interval of the medium, as seen by an observer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BusyPeriod {
    pub start: Nanos,
    /// When the medium falls silent (ACK included for a success).
    pub end: Nanos,
    pub kind: BusyKind,
    pub stations: Vec<u32>,
}

pub fn run(config: &SimConfig) -> Result<SimStats, SimError> {
    run_observed(config, |_| {})
}

/// Attempts per eligible slot, per station. Zero when nothing was counted.
pub fn estimate_tau(stats: &SimStats) -> Vec<f64> {
    stats
        .per_station
        .iter()
        .map(|s| {
            if s.eligible_slots == 0 {
                0.0
            } else {
                s.tx_attempts as f64 / s.eligible_slots as f64
            }
        })
        .collect()
}

/// [`run`], reporting every busy period to `observer` in time order.
pub fn run_observed(
    config: &SimConfig,
    observer: impl FnMut(&BusyPeriod),
) -> Result<SimStats, SimError> {
    let scenario = &config.scenario;
    scenario.check()?;
    if !(config.warmup >= 0.0 && config.duration > config.warmup && config.duration.is_finite()) {
        return Err(SimError::EmptyWindow {
            duration: config.duration,
            warmup: config.warmup,
        });
    }

    let mac = &scenario.mac;
    let basic = mac.basic_rate;
    let stations = scenario
        .stations
        .iter()
        .zip(scenario.station_classes())
        .map(|(st, class)| {
            let per = phy::station_per(st, class, &scenario.radio, mac.payload_bits).map_err(
                |source| SimError::Phy {
                    station: st.id,
                    source,
                },
            )?;
            let frame = to_nanos(
                f64::from(mac.phy_header_bits) / basic
                    + f64::from(mac.mac_header_bits + mac.payload_bits) / class.data_rate,
            );
            let exchange = frame
                + 2 * to_nanos(mac.prop_delay)
                + to_nanos(mac.sifs)
                + to_nanos(f64::from(mac.phy_header_bits + mac.ack_bits) / basic);
            Ok(Station::new(
                st.id,
                config.seed,
                st.saturated,
                st.lambda_pps,
                per,
                frame,
                exchange,
            ))
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let mut engine = Engine {
        stations,
        slot: to_nanos(mac.slot_sigma),
        difs: to_nanos(mac.difs),
        eifs: to_nanos(mac.eifs),
        ack_timeout: to_nanos(mac.ack_timeout),
        w0: u64::from(mac.w0),
        m: mac.m,
        payload_bits: u64::from(mac.payload_bits),
        lo: to_nanos(config.warmup),
        hi: to_nanos(config.duration),
        idle_since: 0,
        slots: SlotCounts::default(),
        observer,
    };
    engine.start();
    engine.run();
    Ok(engine.finish())
}

struct Engine<F> {
    stations: Vec<Station>,
    slot: Nanos,
    difs: Nanos,
    eifs: Nanos,
    ack_timeout: Nanos,
    w0: u64,
    m: u32,
    payload_bits: u64,
    lo: Nanos,
    hi: Nanos,
    /// Earliest post-busy resume time; idle slots are counted from here.
    idle_since: Nanos,
    slots: SlotCounts,
    observer: F,
}

impl<F: FnMut(&BusyPeriod)> Engine<F> {
    fn in_window(&self, t: Nanos) -> bool {
        t >= self.lo && t < self.hi
    }

    fn start(&mut self) {
        let difs = self.difs;
        let w0 = self.w0;
        for st in &mut self.stations {
            st.resume = difs;
            if st.saturated {
                let k = st.draw_backoff(w0);
                st.countdown = Some(Countdown {
                    start: difs,
                    remaining: k,
                });
            } else {
                st.schedule_arrival(0);
            }
        }
        self.idle_since = difs;
    }

    fn run(&mut self) {
        loop {
            let fire = self
                .stations
                .iter()
                .filter_map(|s| s.fire_time(self.slot))
                .min();
            let arrival = self.stations.iter().filter_map(|s| s.next_arrival).min();
            let next = match (fire, arrival) {
                (None, None) => break,
                (Some(f), None) => f,
                (None, Some(a)) => a,
                (Some(f), Some(a)) => f.min(a),
            };
            if next >= self.hi {
                break;
            }
            if arrival == Some(next) {
                for i in 0..self.stations.len() {
                    if self.stations[i].next_arrival == Some(next) {
                        self.arrive(i, next);
                    }
                }
            } else {
                self.busy(next);
            }
        }
    }

    fn arrive(&mut self, i: usize, t: Nanos) {
        let (slot, lo, hi, w0) = (self.slot, self.lo, self.hi, self.w0);
        let counted = self.in_window(t);
        let st = &mut self.stations[i];
        st.track_queue(t, lo, hi);
        let was_empty = st.queue == 0;
        st.queue += 1;
        if let Some(c) = st.countdown {
            // post-backoff ran out while the queue was empty
            if was_empty && c.fire_time(slot) < t {
                if counted {
                    st.stats.eligible_slots += c.remaining;
                }
                st.countdown = None;
            }
        }
        if st.countdown.is_none() {
            st.stage = 0;
            let k = st.draw_backoff(w0);
            let start = if t <= st.resume {
                st.resume
            } else {
                st.resume + (t - st.resume).div_ceil(slot) * slot
            };
            st.countdown = Some(Countdown {
                start,
                remaining: k,
            });
        }
        st.schedule_arrival(t);
    }

    fn busy(&mut self, t: Nanos) {
        let slot = self.slot;
        let counted = self.in_window(t);
        let transmitters: Vec<usize> = (0..self.stations.len())
            .filter(|&i| self.stations[i].fire_time(slot) == Some(t))
            .collect();

        if counted {
            self.slots.idle += (t - self.idle_since.min(t)) / slot;
        }

        // outcome and per-station release times
        let mut resume = vec![0; self.stations.len()];
        let (kind, end) = if let [only] = transmitters[..] {
            if self.stations[only].corrupted() {
                let end = t + self.stations[only].frame;
                resume.fill(end + self.eifs);
                resume[only] = end + self.ack_timeout;
                (BusyKind::ChannelError, end)
            } else {
                let end = t + self.stations[only].exchange;
                resume.fill(end + self.difs);
                (BusyKind::Success, end)
            }
        } else {
            let longest = transmitters
                .iter()
                .map(|&i| self.stations[i].frame)
                .max()
                .unwrap_or(0);
            let end = t + longest;
            resume.fill(end + self.eifs);
            for &i in &transmitters {
                if self.stations[i].frame == longest {
                    resume[i] = end + self.ack_timeout;
                }
            }
            (BusyKind::Collision, end)
        };

        (self.observer)(&BusyPeriod {
            start: t,
            end,
            kind,
            stations: transmitters.iter().map(|&i| self.stations[i].id).collect(),
        });
        if counted {
            match kind {
                BusyKind::Success => self.slots.success += 1,
                BusyKind::ChannelError => self.slots.error += 1,
                BusyKind::Collision => self.slots.collision += 1,
            }
        }

        for (i, &release) in resume.iter().enumerate() {
            if transmitters.contains(&i) {
                self.after_transmission(i, t, release, kind, counted);
            } else {
                self.freeze(i, t, release, counted);
            }
            self.stations[i].resume = release;
        }
        self.idle_since = resume.iter().copied().min().unwrap_or(t);
    }

    fn after_transmission(
        &mut self,
        i: usize,
        t: Nanos,
        release: Nanos,
        kind: BusyKind,
        counted: bool,
    ) {
        let (lo, hi, payload, w0, m) = (self.lo, self.hi, self.payload_bits, self.w0, self.m);
        let st = &mut self.stations[i];
        let c = st.countdown.expect("transmitter holds a countdown");
        if counted {
            st.stats.eligible_slots += c.remaining + 1;
            st.stats.tx_attempts += 1;
        }
        let window = match kind {
            BusyKind::Success => {
                if counted {
                    st.stats.successes += 1;
                    st.stats.delivered_payload_bits += payload;
                }
                if !st.saturated {
                    st.track_queue(t, lo, hi);
                    st.queue -= 1;
                }
                st.stage = 0;
                w0
            }
            BusyKind::ChannelError | BusyKind::Collision => {
                if counted {
                    if kind == BusyKind::Collision {
                        st.stats.collisions += 1;
                    } else {
                        st.stats.channel_errors += 1;
                    }
                }
                st.stage = (st.stage + 1).min(m);
                w0 << st.stage
            }
        };
        // a fresh draw after success is the post-backoff
        let k = st.draw_backoff(window);
        st.countdown = Some(Countdown {
            start: release,
            remaining: k,
        });
    }

    fn freeze(&mut self, i: usize, t: Nanos, release: Nanos, counted: bool) {
        let slot = self.slot;
        let st = &mut self.stations[i];
        let Some(c) = st.countdown else {
            return;
        };
        if t < c.start {
            // still deferring; nothing was counted down
            st.countdown = Some(Countdown {
                start: release,
                ..c
            });
            return;
        }
        if !st.has_packet() && c.fire_time(slot) <= t {
            if counted {
                st.stats.eligible_slots += c.remaining;
            }
            st.countdown = None;
            return;
        }
        let elapsed = c.elapsed(t, slot);
        debug_assert!(elapsed < c.remaining);
        if counted {
            st.stats.eligible_slots += elapsed + 1;
        }
        st.countdown = Some(Countdown {
            start: release,
            remaining: c.remaining - elapsed - 1,
        });
    }

    fn finish(mut self) -> SimStats {
        let (lo, hi) = (self.lo, self.hi);
        let window = hi - lo;
        let per_station: Vec<StationStats> = self
            .stations
            .iter_mut()
            .map(|st| {
                st.track_queue(hi, lo, hi);
                let mut stats = st.stats.clone();
                stats.mean_queue_occupancy = st.mean_queue(window);
                stats
            })
            .collect();
        let measured_seconds = window as f64 * 1e-9;
        let delivered: u64 = per_station.iter().map(|s| s.delivered_payload_bits).sum();
        SimStats {
            aggregate_bps: delivered as f64 / measured_seconds,
            per_station,
            sim_slots: self.slots,
            measured_seconds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Channel, StationConfig};

    fn station(id: u32, class: u32, saturated: bool, lambda: f64, per: f64) -> StationConfig {
        StationConfig {
            id,
            rate_class: class,
            lambda_pps: lambda,
            saturated,
            channel: Channel::FixedPer(per),
        }
    }

    fn config(stations: Vec<StationConfig>, seed: u64, duration: f64) -> SimConfig {
        SimConfig {
            scenario: Scenario::with_stations(stations),
            seed,
            duration,
            warmup: 0.0,
        }
    }

    #[test]
    fn silent_network() {
        let cfg = config(
            vec![
                station(1, 4, false, 0.0, 0.0),
                station(2, 1, false, 0.0, 0.0),
            ],
            3,
            2.0,
        );
        let stats = run(&cfg).unwrap();
        assert_eq!(stats.aggregate_bps, 0.0);
        assert!(stats.per_station.iter().all(|s| s.tx_attempts == 0));
        assert_eq!(estimate_tau(&stats), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_window_rejected() {
        let mut cfg = config(vec![station(1, 4, true, 0.0, 0.0)], 1, 1.0);
        cfg.warmup = 1.0;
        assert!(matches!(run(&cfg), Err(SimError::EmptyWindow { .. })));
    }

    #[test]
    fn default_durations_are_exact_nanoseconds() {
        assert_eq!(to_nanos(20e-6), 20_000);
        assert_eq!(to_nanos(8448.0 / 11e6), 768_000);
        assert_eq!(to_nanos(8448.0 / 5.5e6), 1_536_000);
    }

    #[test]
    fn same_seed_same_stats() {
        let cfg = config(
            vec![
                station(1, 4, true, 0.0, 0.05),
                station(2, 1, false, 30.0, 0.0),
                station(3, 3, false, 200.0, 0.1),
            ],
            42,
            3.0,
        );
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
        let other = SimConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(run(&cfg).unwrap(), run(&other).unwrap());
    }

    #[test]
    fn counters_conserved() {
        let cfg = config(
            vec![
                station(1, 4, true, 0.0, 0.08),
                station(2, 4, true, 0.0, 0.08),
                station(3, 1, false, 50.0, 0.2),
            ],
            9,
            5.0,
        );
        let stats = run(&cfg).unwrap();
        for s in &stats.per_station {
            assert_eq!(s.tx_attempts, s.successes + s.collisions + s.channel_errors);
            assert_eq!(s.delivered_payload_bits, s.successes * 8224);
        }
        let ok: u64 = stats.per_station.iter().map(|s| s.successes).sum();
        assert_eq!(ok, stats.sim_slots.success);
    }

    #[test]
    fn successful_exchanges_never_overlap() {
        let cfg = config(
            (1..=6)
                .map(|i| station(i, 1 + i % 4, i % 2 == 0, 80.0, 0.05))
                .collect(),
            5,
            4.0,
        );
        let mut periods = Vec::new();
        run_observed(&cfg, |p| periods.push(p.clone())).unwrap();
        assert!(periods.len() > 100);
        for w in periods.windows(2) {
            assert!(w[0].end <= w[1].start, "{:?} overlaps {:?}", w[0], w[1]);
        }
        assert!(periods
            .iter()
            .filter(|p| p.kind == BusyKind::Collision)
            .all(|p| p.stations.len() >= 2));
    }

    #[test]
    fn unsaturated_station_delivers_its_load() {
        // 20 pkt/s is far below capacity: everything offered gets through
        let cfg = config(vec![station(1, 4, false, 20.0, 0.0)], 11, 100.0);
        let stats = run(&cfg).unwrap();
        let pps = stats.per_station[0].successes as f64 / 100.0;
        assert!((pps - 20.0).abs() < 2.0, "{pps}");
        assert!(stats.per_station[0].mean_queue_occupancy < 0.1);
    }

    #[test]
    fn warmup_excluded() {
        let mut cfg = config(vec![station(1, 4, true, 0.0, 0.0)], 2, 2.0);
        let full = run(&cfg).unwrap();
        cfg.warmup = 1.0;
        let half = run(&cfg).unwrap();
        assert!(half.per_station[0].successes < full.per_station[0].successes);
        assert!((half.measured_seconds - 1.0).abs() < 1e-12);
    }
}
