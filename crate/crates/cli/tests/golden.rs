//! Output schema and values against checked-in CSV files. Headers must match
//! exactly; numbers to a relative 1e-9 so that last-bit libm differences
//! between platforms do not matter. `UPDATE_GOLDEN=1` rewrites the files.

mod common;

use common::{scenario, stdout_ok};
use std::path::Path;

fn numbers_match(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-300),
        _ => false,
    }
}

fn check(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let (exp, act): (Vec<&str>, Vec<&str>) = (expected.lines().collect(), actual.lines().collect());
    assert_eq!(exp.first(), act.first(), "{name}: header changed");
    assert_eq!(exp.len(), act.len(), "{name}: row count changed");
    for (i, (e, a)) in exp.iter().zip(&act).enumerate().skip(1) {
        let (ef, af): (Vec<&str>, Vec<&str>) = (e.split(',').collect(), a.split(',').collect());
        assert_eq!(ef.len(), af.len(), "{name} line {}", i + 1);
        for (x, y) in ef.iter().zip(&af) {
            assert!(numbers_match(x, y), "{name} line {}: {x} vs {y}", i + 1);
        }
    }
}

#[test]
fn analyze_single_station() {
    check(
        "analyze_single.csv",
        &stdout_ok(&["analyze", "--scenario", &scenario("single.toml")]),
    );
}

#[test]
fn analyze_mixed_network() {
    check(
        "analyze_slow_station.csv",
        &stdout_ok(&[
            "analyze",
            "--scenario",
            &scenario("slow_station_per08.toml"),
        ]),
    );
}

#[test]
fn sweep_two_classes() {
    check(
        "sweep_slow_station.csv",
        &stdout_ok(&[
            "sweep",
            "--scenario",
            &scenario("slow_station.toml"),
            "--axis",
            "station=10,param=lambda_pps,grid=0.5;50;5000",
            "--classes",
            "1,4",
        ]),
    );
}

#[test]
fn ber_curve_coarse() {
    check(
        "ber_curve.csv",
        &stdout_ok(&[
            "ber-curve",
            "--from-db",
            "-10",
            "--to-db",
            "40",
            "--step-db",
            "5",
        ]),
    );
}

#[test]
fn simulate_short_run() {
    check(
        "simulate_pair.csv",
        &stdout_ok(&[
            "simulate",
            "--scenario",
            &scenario("mixed.toml"),
            "--seeds",
            "1..=2",
            "--duration",
            "0.6",
            "--warmup",
            "0.1",
        ]),
    );
}
