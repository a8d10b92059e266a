//! Slot taxonomy and mean slot duration.
//!
//! Every generic slot is idle, a success, a channel error (exactly one
//! transmitter), or a collision (two or more). Collisions are attributed to
//! the slowest class involved, since the channel stays busy for that class's
//! frame.
//!
//! All `t_*` aggregates here are probability-weighted contributions to the
//! mean slot duration, not raw durations.

use thiserror::Error;

use crate::scenario::{ClassMap, MacParams, RateClass};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SlotError {
    #[error("unknown rate class {0}")]
    UnknownClass(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassCollision {
    pub class: u32,
    /// Intra-class plus inter-class collision probability.
    pub p_c: f64,
    pub p_c1: f64,
    pub p_c2: f64,
    pub t_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationSuccess {
    pub station: usize,
    pub p_s: f64,
    pub t_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotDurations {
    pub t_i: f64,
    pub t_s: f64,
    pub t_c: f64,
    pub t_e: f64,
    pub t_av: f64,
    /// Probability that at least one station transmits.
    pub p_t: f64,
    pub per_class_collision: Vec<ClassCollision>,
    pub per_station_success: Vec<StationSuccess>,
}

fn silent(taus: &[f64], stations: impl IntoIterator<Item = usize>) -> f64 {
    stations.into_iter().map(|s| 1.0 - taus[s]).product()
}

pub fn p_busy(taus: &[f64]) -> f64 {
    1.0 - taus.iter().map(|t| 1.0 - t).product::<f64>()
}

pub fn t_idle(taus: &[f64], sigma: f64) -> f64 {
    (1.0 - p_busy(taus)) * sigma
}

/// Probability that station `s` is the only transmitter.
pub fn p_success(s: usize, taus: &[f64]) -> f64 {
    taus[s] * silent(taus, (0..taus.len()).filter(|&j| j != s))
}

/// Busy time of a successful exchange: DATA, SIFS, ACK and the DIFS that
/// follows. PLCP and ACK go at the basic rate.
pub fn t_success_station(class: &RateClass, mac: &MacParams) -> f64 {
    f64::from(mac.phy_header_bits) / mac.basic_rate
        + f64::from(mac.mac_header_bits + mac.payload_bits) / class.data_rate
        + mac.prop_delay
        + mac.sifs
        + f64::from(mac.phy_header_bits + mac.ack_bits) / mac.basic_rate
        + mac.prop_delay
        + mac.difs
}

pub fn t_success_avg(classes: &[&RateClass], taus: &[f64], pers: &[f64], mac: &MacParams) -> f64 {
    (0..taus.len())
        .map(|s| p_success(s, taus) * (1.0 - pers[s]) * t_success_station(classes[s], mac))
        .sum()
}

fn class_position(r: u32, map: &ClassMap) -> Result<usize, SlotError> {
    map.position(r).ok_or(SlotError::UnknownClass(r))
}

/// At least two stations of class `r` transmit and nobody outside it does.
pub fn p_intra_class(r: u32, taus: &[f64], map: &ClassMap) -> Result<f64, SlotError> {
    let pos = class_position(r, map)?;
    let members = map.members(pos);
    let none = silent(taus, members.iter().copied());
    let exactly_one: f64 = members
        .iter()
        .map(|&s| taus[s] * silent(taus, members.iter().copied().filter(|&j| j != s)))
        .sum();
    let outside = silent(
        taus,
        (0..map.len())
            .filter(|&c| c != pos)
            .flat_map(|c| map.members(c).iter().copied()),
    );
    Ok((1.0 - (none + exactly_one)) * outside)
}

/// At least one station of class `r` and at least one of a faster class
/// transmit, while every slower class is silent.
pub fn p_inter_class(r: u32, taus: &[f64], map: &ClassMap) -> Result<f64, SlotError> {
    let pos = class_position(r, map)?;
    let own_busy = 1.0 - silent(taus, map.members(pos).iter().copied());
    let faster_busy = 1.0
        - silent(
            taus,
            (pos + 1..map.len()).flat_map(|c| map.members(c).iter().copied()),
        );
    let slower_silent = silent(taus, (0..pos).flat_map(|c| map.members(c).iter().copied()));
    Ok(own_busy * faster_busy * slower_silent)
}

/// Busy time of a collision (or channel error) involving a class-`r` frame:
/// the frame plus the ACK timeout.
pub fn t_collision_class(class: &RateClass, mac: &MacParams) -> f64 {
    f64::from(mac.phy_header_bits) / mac.basic_rate
        + f64::from(mac.mac_header_bits + mac.payload_bits) / class.data_rate
        + mac.ack_timeout
}

/// `sum_r P_c^(r) T_c^(r)`.
pub fn t_collision_avg(collisions: &[ClassCollision]) -> f64 {
    collisions.iter().map(|c| c.p_c * c.t_c).sum()
}

/// Channel-error slots last as long as a collision of the station's class.
pub fn t_error_avg(classes: &[&RateClass], taus: &[f64], pers: &[f64], mac: &MacParams) -> f64 {
    (0..taus.len())
        .map(|s| p_success(s, taus) * pers[s] * t_collision_class(classes[s], mac))
        .sum()
}

pub fn t_av(t_i: f64, t_c: f64, t_s: f64, t_e: f64) -> f64 {
    t_i + t_c + t_s + t_e
}

impl SlotDurations {
    /// Full slot breakdown for one attempt-probability vector.
    ///
    /// `classes[s]` is station `s`'s rate class and `map` the same stations
    /// grouped by class. Classes without members are left out of
    /// `per_class_collision`.
    pub fn compute(
        taus: &[f64],
        pers: &[f64],
        classes: &[&RateClass],
        map: &ClassMap,
        mac: &MacParams,
    ) -> Result<Self, SlotError> {
        let mut per_class_collision = Vec::with_capacity(map.len());
        for (pos, &id) in map.class_ids().iter().enumerate() {
            let Some(&first) = map.members(pos).first() else {
                continue;
            };
            let p_c1 = p_intra_class(id, taus, map)?;
            let p_c2 = p_inter_class(id, taus, map)?;
            per_class_collision.push(ClassCollision {
                class: id,
                p_c: p_c1 + p_c2,
                p_c1,
                p_c2,
                t_c: t_collision_class(classes[first], mac),
            });
        }
        let per_station_success = (0..taus.len())
            .map(|s| StationSuccess {
                station: s,
                p_s: p_success(s, taus),
                t_s: t_success_station(classes[s], mac),
            })
            .collect();

        let p_t = p_busy(taus);
        let t_i = t_idle(taus, mac.slot_sigma);
        let t_s = t_success_avg(classes, taus, pers, mac);
        let t_c = t_collision_avg(&per_class_collision);
        let t_e = t_error_avg(classes, taus, pers, mac);
        Ok(SlotDurations {
            t_i,
            t_s,
            t_c,
            t_e,
            t_av: t_av(t_i, t_c, t_s, t_e),
            p_t,
            per_class_collision,
            per_station_success,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(id: u32) -> RateClass {
        RateClass::ieee80211b()
            .into_iter()
            .find(|c| c.id == id)
            .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn map_of(station_classes: &[u32]) -> ClassMap {
        ClassMap::new(vec![1, 2, 3, 4], station_classes)
    }

    #[test]
    fn busy_examples() {
        assert_eq!(p_busy(&[0.0, 0.0, 0.0]), 0.0);
        close(p_busy(&[0.3]), 0.3, 1e-16);
        close(p_busy(&[0.1, 0.2]), 0.28, 1e-15);
    }

    #[test]
    fn idle_examples() {
        assert_eq!(t_idle(&[0.0, 0.0], 20e-6), 20e-6);
        close(t_idle(&[2.0 / 33.0], 20e-6), 31.0 / 33.0 * 20e-6, 1e-20);
        close(t_idle(&[2.0 / 33.0], 20e-6), 18.788e-6, 1e-9);
        assert_eq!(t_idle(&[1.0, 0.5], 20e-6), 0.0);
    }

    #[test]
    fn success_probability_examples() {
        close(p_success(0, &[0.42]), 0.42, 0.0);
        close(p_success(0, &[0.1, 0.1, 0.1]), 0.081, 1e-16);
        let taus = [0.3, 0.05, 0.6, 0.2];
        let total: f64 = (0..4).map(|s| p_success(s, &taus)).sum();
        assert!(total <= p_busy(&taus));
    }

    #[test]
    fn success_durations() {
        let mac = MacParams::default();
        close(t_success_station(&class(4), &mac), 1326e-6, 1e-12);
        close(t_success_station(&class(1), &mac), 9006e-6, 1e-12);
        let mut big = mac.clone();
        big.payload_bits *= 2;
        for id in 1..=4 {
            let c = class(id);
            close(
                t_success_station(&c, &big) - t_success_station(&c, &mac),
                8.0 * 1028.0 / c.data_rate,
                1e-12,
            );
        }
    }

    #[test]
    fn success_average_examples() {
        let mac = MacParams::default();
        let c4 = class(4);
        assert_eq!(
            t_success_avg(&[&c4, &c4], &[0.0, 0.0], &[0.0, 0.0], &mac),
            0.0
        );
        let tau = 2.0 / 33.0;
        close(
            t_success_avg(&[&c4], &[tau], &[0.0], &mac),
            tau * 1326e-6,
            1e-15,
        );
        close(t_success_avg(&[&c4], &[tau], &[0.0], &mac), 80.36e-6, 1e-8);
        assert_eq!(t_success_avg(&[&c4], &[tau], &[1.0], &mac), 0.0);
    }

    #[test]
    fn intra_class_examples() {
        let map = map_of(&[4, 1]);
        assert_eq!(p_intra_class(4, &[0.3, 0.4], &map).unwrap(), 0.0);
        let map = map_of(&[2, 2]);
        close(p_intra_class(2, &[0.1, 0.1], &map).unwrap(), 0.01, 1e-15);
        assert_eq!(p_intra_class(2, &[0.0, 0.0], &map).unwrap(), 0.0);
        assert_eq!(
            p_intra_class(7, &[0.1, 0.1], &map),
            Err(SlotError::UnknownClass(7))
        );
    }

    #[test]
    fn inter_class_examples() {
        let map = map_of(&[3, 3, 3]);
        assert_eq!(p_inter_class(3, &[0.2, 0.3, 0.1], &map).unwrap(), 0.0);
        let map = map_of(&[1, 4]);
        close(p_inter_class(1, &[0.1, 0.2], &map).unwrap(), 0.02, 1e-16);
        assert_eq!(p_inter_class(4, &[0.1, 0.2], &map).unwrap(), 0.0);
        assert_eq!(
            p_inter_class(9, &[0.1, 0.2], &map),
            Err(SlotError::UnknownClass(9))
        );
    }

    #[test]
    fn collision_durations() {
        let mac = MacParams::default();
        close(t_collision_class(&class(1), &mac), 9004e-6, 1e-12);
        close(t_collision_class(&class(4), &mac), 1324e-6, 1e-12);
        assert!(t_collision_class(&class(1), &mac) > t_collision_class(&class(4), &mac));
    }

    #[test]
    fn collision_average_examples() {
        let mac = MacParams::default();
        let (c1, c4) = (class(1), class(4));
        let map = map_of(&[1, 4]);
        let slots =
            SlotDurations::compute(&[0.0, 0.0], &[0.0, 0.0], &[&c1, &c4], &map, &mac).unwrap();
        assert_eq!(slots.t_c, 0.0);

        let slots =
            SlotDurations::compute(&[0.1, 0.2], &[0.0, 0.0], &[&c1, &c4], &map, &mac).unwrap();
        close(slots.t_c, 0.02 * 9004e-6, 1e-15);

        let map = map_of(&[4, 4, 4]);
        let taus = [0.1, 0.2, 0.3];
        let slots = SlotDurations::compute(&taus, &[0.0; 3], &[&c4, &c4, &c4], &map, &mac).unwrap();
        let p_c1 = p_intra_class(4, &taus, &map).unwrap();
        close(slots.t_c, p_c1 * 1324e-6, 1e-18);
    }

    #[test]
    fn error_average_examples() {
        let mac = MacParams::default();
        let c4 = class(4);
        let tau = 2.0 / 33.0;
        assert_eq!(t_error_avg(&[&c4], &[tau], &[0.0], &mac), 0.0);
        close(
            t_error_avg(&[&c4], &[tau], &[0.08], &mac),
            tau * 0.08 * 1324e-6,
            1e-18,
        );
        close(t_error_avg(&[&c4], &[tau], &[0.08], &mac), 6.42e-6, 1e-8);
    }

    #[test]
    fn mean_slot_examples() {
        let mac = MacParams::default();
        let c4 = class(4);
        let map = map_of(&[4]);
        let idle = SlotDurations::compute(&[0.0], &[0.0], &[&c4], &map, &mac).unwrap();
        assert_eq!(idle.t_av, mac.slot_sigma);

        let tau = 2.0 / 33.0;
        let one = SlotDurations::compute(&[tau], &[0.0], &[&c4], &map, &mac).unwrap();
        close(one.t_av, (31.0 * 20e-6 + 2.0 * 1326e-6) / 33.0, 1e-18);
        close(one.t_av, 99.15e-6, 1e-8);
        assert_eq!(one.t_av, one.t_i + one.t_c + one.t_s + one.t_e);
        assert!(one.t_av >= (1.0 - one.p_t) * mac.slot_sigma);
    }

    #[test]
    fn slow_station_lengthens_mean_slot() {
        let mac = MacParams::default();
        let (c1, c4) = (class(1), class(4));
        let tau = 0.05;
        let fast = SlotDurations::compute(
            &[tau; 3],
            &[0.0; 3],
            &[&c4, &c4, &c4],
            &map_of(&[4, 4, 4]),
            &mac,
        )
        .unwrap();
        let mixed = SlotDurations::compute(
            &[tau; 4],
            &[0.0; 4],
            &[&c4, &c4, &c4, &c1],
            &map_of(&[4, 4, 4, 1]),
            &mac,
        )
        .unwrap();
        assert!(mixed.t_av > fast.t_av);
    }
}
