//! Analytical model and discrete-event simulator of the IEEE 802.11 DCF
//! with multirate stations, channel errors and non-saturated traffic.
//!
//! The analytical side goes [`scenario`] → [`phy`] (packet error rates) →
//! [`markov`] + [`slots`] → [`solver`] (operating point and throughput).
//! [`sim`] runs the same network event by event so the two can be compared.

pub mod markov;
pub mod phy;
pub mod scenario;
pub mod sim;
pub mod slots;
pub mod solver;

pub use scenario::{
    validate_scenario, Channel, ClassMap, MacParams, Modulation, Radio, RateClass, Scenario,
    StationConfig,
};
pub use solver::{analyze, SolverOptions, ThroughputReport};
