use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{Nanos, StationStats};

/// Backoff countdown: the station fires at `start + remaining * slot`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) struct Countdown {
    pub start: Nanos,
    pub remaining: u64,
}

impl Countdown {
    pub fn fire_time(&self, slot: Nanos) -> Nanos {
        self.start + self.remaining * slot
    }

    /// Whole idle slots completed between `start` and `now`.
    pub fn elapsed(&self, now: Nanos, slot: Nanos) -> u64 {
        now.saturating_sub(self.start) / slot
    }
}

pub(super) struct Station {
    pub id: u32,
    pub saturated: bool,
    pub per: f64,
    /// PLCP + MAC header + payload airtime.
    pub frame: Nanos,
    /// Frame through the ACK, excluding the DIFS that follows.
    pub exchange: Nanos,
    pub stage: u32,
    pub countdown: Option<Countdown>,
    /// End of the current DIFS/EIFS/ACK-timeout deferral.
    pub resume: Nanos,
    pub queue: u64,
    pub next_arrival: Option<Nanos>,
    arrivals: Option<Exp<f64>>,
    rng: ChaCha8Rng,
    pub stats: StationStats,
    queue_area: f64,
    queue_mark: Nanos,
}

impl Station {
    pub fn new(
        id: u32,
        seed: u64,
        saturated: bool,
        lambda_pps: f64,
        per: f64,
        frame: Nanos,
        exchange: Nanos,
    ) -> Self {
        let arrivals = if saturated || lambda_pps <= 0.0 {
            None
        } else {
            Some(Exp::new(lambda_pps).expect("positive finite arrival rate"))
        };
        Station {
            id,
            saturated,
            per,
            frame,
            exchange,
            stage: 0,
            countdown: None,
            resume: 0,
            queue: 0,
            next_arrival: None,
            arrivals,
            rng: ChaCha8Rng::seed_from_u64(seed ^ u64::from(id)),
            stats: StationStats {
                id,
                ..Default::default()
            },
            queue_area: 0.0,
            queue_mark: 0,
        }
    }

    pub fn has_packet(&self) -> bool {
        self.saturated || self.queue > 0
    }

    pub fn draw_backoff(&mut self, window: u64) -> u64 {
        self.rng.random_range(0..window)
    }

    pub fn corrupted(&mut self) -> bool {
        self.per > 0.0 && self.rng.random::<f64>() < self.per
    }

    pub fn schedule_arrival(&mut self, now: Nanos) {
        self.next_arrival = self.arrivals.map(|exp| {
            let gap = exp.sample(&mut self.rng);
            now + (gap * 1e9).round() as Nanos
        });
    }

    /// Transmission time, if the station holds a frame and a countdown.
    pub fn fire_time(&self, slot: Nanos) -> Option<Nanos> {
        if self.has_packet() {
            self.countdown.map(|c| c.fire_time(slot))
        } else {
            None
        }
    }

    /// Time-integral of the queue length inside `[lo, hi)`.
    pub fn track_queue(&mut self, now: Nanos, lo: Nanos, hi: Nanos) {
        let a = self.queue_mark.clamp(lo, hi);
        let b = now.clamp(lo, hi);
        self.queue_area += self.queue as f64 * (b - a) as f64;
        self.queue_mark = now;
    }

    pub fn mean_queue(&self, window: Nanos) -> f64 {
        if self.saturated {
            1.0
        } else {
            self.queue_area / window as f64
        }
    }
}
