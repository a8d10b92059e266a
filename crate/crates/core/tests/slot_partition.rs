//! Slot probabilities against exhaustive enumeration of transmit/silent
//! outcomes.

use dcfwb_core::scenario::{ClassMap, MacParams, RateClass};
use dcfwb_core::slots::{self, SlotDurations};
use proptest::prelude::*;

/// Event probabilities from all `2^N` outcomes: idle, per-station sole
/// transmitter, per-class (intra, inter) collision, at least one busy.
struct Enumerated {
    idle: f64,
    sole: Vec<f64>,
    intra: Vec<f64>,
    inter: Vec<f64>,
    busy: f64,
}

fn enumerate(taus: &[f64], class_pos: &[usize], n_classes: usize) -> Enumerated {
    let n = taus.len();
    let mut e = Enumerated {
        idle: 0.0,
        sole: vec![0.0; n],
        intra: vec![0.0; n_classes],
        inter: vec![0.0; n_classes],
        busy: 0.0,
    };
    for mask in 0u32..(1 << n) {
        let prob: f64 = (0..n)
            .map(|s| {
                if mask >> s & 1 == 1 {
                    taus[s]
                } else {
                    1.0 - taus[s]
                }
            })
            .product();
        let active: Vec<usize> = (0..n).filter(|s| mask >> s & 1 == 1).collect();
        match active.len() {
            0 => e.idle += prob,
            1 => {
                e.sole[active[0]] += prob;
                e.busy += prob;
            }
            _ => {
                e.busy += prob;
                let slowest = active.iter().map(|&s| class_pos[s]).min().unwrap();
                if active.iter().all(|&s| class_pos[s] == slowest) {
                    e.intra[slowest] += prob;
                } else {
                    e.inter[slowest] += prob;
                }
            }
        }
    }
    e
}

fn check(taus: &[f64], class_pos: &[usize]) -> Result<(), TestCaseError> {
    let ids = vec![1, 2, 3, 4];
    let station_ids: Vec<u32> = class_pos.iter().map(|&p| ids[p]).collect();
    let map = ClassMap::new(ids.clone(), &station_ids);
    let e = enumerate(taus, class_pos, ids.len());

    prop_assert!((slots::p_busy(taus) - e.busy).abs() < 1e-12);
    for s in 0..taus.len() {
        prop_assert!((slots::p_success(s, taus) - e.sole[s]).abs() < 1e-12);
    }
    let mut collisions = 0.0;
    for (pos, &id) in ids.iter().enumerate() {
        let c1 = slots::p_intra_class(id, taus, &map).unwrap();
        let c2 = slots::p_inter_class(id, taus, &map).unwrap();
        prop_assert!(
            (c1 - e.intra[pos]).abs() < 1e-12,
            "intra {} {} {}",
            id,
            c1,
            e.intra[pos]
        );
        prop_assert!(
            (c2 - e.inter[pos]).abs() < 1e-12,
            "inter {} {} {}",
            id,
            c2,
            e.inter[pos]
        );
        collisions += c1 + c2;
    }
    let sole: f64 = (0..taus.len()).map(|s| slots::p_success(s, taus)).sum();
    let total = (1.0 - slots::p_busy(taus)) + sole + collisions;
    prop_assert!((total - 1.0).abs() < 1e-12, "partition sums to {}", total);
    prop_assert!((e.idle - (1.0 - slots::p_busy(taus))).abs() < 1e-12);
    Ok(())
}

#[test]
fn two_station_cross_class_enumeration() {
    let e = enumerate(&[0.1, 0.2], &[0, 3], 4);
    assert!((e.inter[0] - 0.02).abs() < 1e-15);
    assert_eq!(e.inter[3], 0.0);
    let e = enumerate(&[0.1, 0.1], &[1, 1], 4);
    assert!((e.intra[1] - 0.01).abs() < 1e-15);
}

proptest! {
    #[test]
    fn partition_matches_enumeration(
        stations in prop::collection::vec((0.0f64..=1.0, 0usize..4), 1..=6)
    ) {
        let taus: Vec<f64> = stations.iter().map(|s| s.0).collect();
        let classes: Vec<usize> = stations.iter().map(|s| s.1).collect();
        check(&taus, &classes)?;
    }

    #[test]
    fn mean_slot_is_sum_of_parts(
        stations in prop::collection::vec((0.0f64..0.5, 0usize..4, 0.0f64..0.5), 1..=8)
    ) {
        let mac = MacParams::default();
        let all = RateClass::ieee80211b();
        let taus: Vec<f64> = stations.iter().map(|s| s.0).collect();
        let pers: Vec<f64> = stations.iter().map(|s| s.2).collect();
        let classes: Vec<&RateClass> = stations.iter().map(|s| &all[s.1]).collect();
        let ids: Vec<u32> = classes.iter().map(|c| c.id).collect();
        let map = ClassMap::new(vec![1, 2, 3, 4], &ids);
        let d = SlotDurations::compute(&taus, &pers, &classes, &map, &mac).unwrap();
        prop_assert_eq!(d.t_av, d.t_i + d.t_c + d.t_s + d.t_e);
        prop_assert!(d.t_av >= (1.0 - d.p_t) * mac.slot_sigma);
        let sole: f64 = d.per_station_success.iter().map(|s| s.p_s).sum();
        let coll: f64 = d.per_class_collision.iter().map(|c| c.p_c).sum();
        prop_assert!(((1.0 - d.p_t) + sole + coll - 1.0).abs() < 1e-12);
    }
}

#[test]
fn slow_station_raises_mean_slot_of_saturated_fast_network() {
    use dcfwb_core::{analyze, Channel, Scenario, SolverOptions, StationConfig};
    let fast = |id| StationConfig {
        id,
        rate_class: 4,
        lambda_pps: 0.0,
        saturated: true,
        channel: Channel::FixedPer(0.0),
    };
    let base = Scenario::with_stations((1..=4).map(fast).collect());
    let mut mixed = base.clone();
    mixed.stations.push(StationConfig {
        id: 5,
        rate_class: 1,
        ..fast(5)
    });
    let opts = SolverOptions::default();
    let t_fast = analyze(&base, &opts).unwrap().t_av;
    let t_mixed = analyze(&mixed, &opts).unwrap().t_av;
    assert!(t_mixed > t_fast, "{t_mixed} <= {t_fast}");
}
