//! Network description: MAC/PHY parameters, rate classes, stations.
//!
//! A [`Scenario`] is plain data. Every consumer (solver, simulator, CLI)
//! calls [`Scenario::check`] before use, so an unchecked scenario never
//! reaches the numerics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Backoff and frame-timing parameters shared by every station.
///
/// Durations are in seconds, sizes in bits, rates in bits per second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacParams {
    /// Minimum contention window.
    pub w0: u32,
    /// Number of window doublings; the largest window is `2^m * w0`.
    pub m: u32,
    pub slot_sigma: f64,
    pub sifs: f64,
    pub difs: f64,
    pub eifs: f64,
    pub ack_timeout: f64,
    pub prop_delay: f64,
    /// PLCP preamble plus PLCP header.
    pub phy_header_bits: u32,
    pub mac_header_bits: u32,
    pub ack_bits: u32,
    pub payload_bits: u32,
    /// Rate used for PLCP headers and control frames.
    pub basic_rate: f64,
}

impl MacParams {
    /// Largest contention window, `2^m * w0`.
    pub fn w_max(&self) -> u64 {
        u64::from(self.w0) << self.m
    }

    /// Contention window at backoff stage `stage` (capped at `m`).
    pub fn window(&self, stage: u32) -> u64 {
        u64::from(self.w0) << stage.min(self.m)
    }
}

impl Default for MacParams {
    /// IEEE 802.11b DSSS parameters, long preamble.
    fn default() -> Self {
        Self {
            w0: 32,
            m: 5,
            slot_sigma: 20e-6,
            sifs: 10e-6,
            difs: 50e-6,
            eifs: 364e-6,
            ack_timeout: 364e-6,
            prop_delay: 1e-6,
            phy_header_bits: 144 + 48,
            mac_header_bits: 28 * 8,
            ack_bits: 14 * 8,
            payload_bits: 1028 * 8,
            basic_rate: 1e6,
        }
    }
}

/// Modulation scheme of a rate class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "DBPSK")]
    Dbpsk,
    #[serde(rename = "DQPSK")]
    Dqpsk,
    /// CCK at 5.5 Mbps (4 bits per symbol).
    #[serde(rename = "CCK55")]
    Cck55,
    /// CCK at 11 Mbps (8 bits per symbol).
    #[serde(rename = "CCK11")]
    Cck11,
}

impl Modulation {
    pub const ALL: [Modulation; 4] = [
        Modulation::Dbpsk,
        Modulation::Dqpsk,
        Modulation::Cck55,
        Modulation::Cck11,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Dbpsk => "DBPSK",
            Modulation::Dqpsk => "DQPSK",
            Modulation::Cck55 => "CCK55",
            Modulation::Cck11 => "CCK11",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A group of stations sharing one data rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateClass {
    pub id: u32,
    /// Payload data rate, bits per second.
    pub data_rate: f64,
    pub chips_per_symbol: u32,
    pub bits_per_symbol: u32,
    pub modulation: Modulation,
    pub sensitivity_dbm: f64,
}

impl RateClass {
    /// The four 802.11b classes: 1, 2, 5.5 and 11 Mbps with ids 1..=4.
    pub fn ieee80211b() -> Vec<RateClass> {
        let row = |id, rate, cs, bs, modulation, sens| RateClass {
            id,
            data_rate: rate,
            chips_per_symbol: cs,
            bits_per_symbol: bs,
            modulation,
            sensitivity_dbm: sens,
        };
        vec![
            row(1, 1e6, 11, 1, Modulation::Dbpsk, -85.0),
            row(2, 2e6, 11, 2, Modulation::Dqpsk, -82.0),
            row(3, 5.5e6, 8, 4, Modulation::Cck55, -80.0),
            row(4, 11e6, 8, 8, Modulation::Cck11, -76.0),
        ]
    }
}

/// How a station's packet error rate is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Channel {
    /// Derived from the link budget at this distance from the access point.
    Distance(f64),
    /// Fixed packet error rate.
    FixedPer(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStation", into = "RawStation")]
pub struct StationConfig {
    pub id: u32,
    /// Rate class id.
    pub rate_class: u32,
    /// Poisson packet arrival rate, packets per second.
    pub lambda_pps: f64,
    /// Always backlogged; pins `q = 1` in the model.
    pub saturated: bool,
    pub channel: Channel,
}

// TOML form of a station: exactly one of `distance_m` / `fixed_per`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStation {
    id: u32,
    rate_class: u32,
    #[serde(default)]
    lambda_pps: f64,
    #[serde(default)]
    saturated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distance_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixed_per: Option<f64>,
}

impl TryFrom<RawStation> for StationConfig {
    type Error = String;

    fn try_from(raw: RawStation) -> Result<Self, Self::Error> {
        let channel = match (raw.distance_m, raw.fixed_per) {
            (Some(d), None) => Channel::Distance(d),
            (None, Some(p)) => Channel::FixedPer(p),
            (Some(_), Some(_)) => {
                return Err(format!(
                    "station {}: `distance_m` and `fixed_per` are mutually exclusive",
                    raw.id
                ))
            }
            (None, None) => {
                return Err(format!(
                    "station {}: one of `distance_m` or `fixed_per` is required",
                    raw.id
                ))
            }
        };
        Ok(StationConfig {
            id: raw.id,
            rate_class: raw.rate_class,
            lambda_pps: raw.lambda_pps,
            saturated: raw.saturated,
            channel,
        })
    }
}

impl From<StationConfig> for RawStation {
    fn from(s: StationConfig) -> Self {
        let (distance_m, fixed_per) = match s.channel {
            Channel::Distance(d) => (Some(d), None),
            Channel::FixedPer(p) => (None, Some(p)),
        };
        RawStation {
            id: s.id,
            rate_class: s.rate_class,
            lambda_pps: s.lambda_pps,
            saturated: s.saturated,
            distance_m,
            fixed_per,
        }
    }
}

/// Link-budget inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Radio {
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub path_loss_exponent: f64,
    pub ref_distance_m: f64,
    pub carrier_hz: f64,
    /// Path loss at the reference distance. Defaults to free-space loss
    /// with unit antenna gains.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_loss_db: Option<f64>,
}

impl Default for Radio {
    fn default() -> Self {
        Self {
            tx_power_dbm: 20.0,
            noise_figure_db: 10.0,
            bandwidth_hz: 22e6,
            path_loss_exponent: 4.0,
            ref_distance_m: 1.0,
            carrier_hz: 2.4e9,
            ref_loss_db: None,
        }
    }
}

/// Omitted `[mac]`, `[radio]` or `[[rate_class]]` tables (and omitted
/// fields inside the first two) take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub mac: MacParams,
    #[serde(default)]
    pub radio: Radio,
    #[serde(rename = "rate_class", default = "RateClass::ieee80211b")]
    pub rate_classes: Vec<RateClass>,
    #[serde(rename = "station")]
    pub stations: Vec<StationConfig>,
}

/// One violated scenario invariant.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScenarioError {
    #[error("network has no stations")]
    EmptyNetwork,
    #[error("station {station}: unknown rate class {class}")]
    UnknownRateClass { station: u32, class: u32 },
    #[error("mac.{field} must be positive, got {value}")]
    NonPositiveDuration { field: &'static str, value: f64 },
    #[error("{field} must be positive, got {value}")]
    NonPositiveSize { field: String, value: f64 },
    #[error("station {station}: fixed_per must lie in [0, 1), got {value}")]
    PerOutOfRange { station: u32, value: f64 },
    #[error("mac.w0 must be at least 1")]
    ZeroContentionWindow,
    #[error("mac.m = {0} overflows the contention window")]
    TooManyBackoffStages(u32),
    #[error("station {station}: lambda_pps must be finite and non-negative, got {value}")]
    InvalidArrivalRate { station: u32, value: f64 },
    #[error("station {station}: distance_m must be positive, got {value}")]
    NonPositiveDistance { station: u32, value: f64 },
    #[error("duplicate station id {0}")]
    DuplicateStation(u32),
    #[error("duplicate rate class id {0}")]
    DuplicateRateClass(u32),
    #[error("rate class {id}: data_rate must increase with class id")]
    RateOrder { id: u32 },
    #[error("radio.{field} is invalid: {value}")]
    InvalidRadio { field: &'static str, value: f64 },
}

/// Every invariant violation found in a scenario.
#[derive(Clone, Debug, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ScenarioError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ValidationErrors),
}

/// Returns the scenario iff every invariant holds.
pub fn validate_scenario(scenario: Scenario) -> Result<Scenario, ValidationErrors> {
    scenario.check()?;
    Ok(scenario)
}

impl Scenario {
    /// Default MAC and radio settings with the canonical 802.11b classes and the
    /// given stations.
    pub fn with_stations(stations: Vec<StationConfig>) -> Self {
        Scenario {
            mac: MacParams::default(),
            radio: Radio::default(),
            rate_classes: RateClass::ieee80211b(),
            stations,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LoadError> {
        let scenario: Scenario = toml::from_str(text)?;
        Ok(validate_scenario(scenario)?)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn check(&self) -> Result<(), ValidationErrors> {
        let mut errs = Vec::new();
        let mac = &self.mac;

        if mac.w0 == 0 {
            errs.push(ScenarioError::ZeroContentionWindow);
        }
        // keeps 2^m * w0 well inside u64 and the window draws exact
        if mac.m > 20 {
            errs.push(ScenarioError::TooManyBackoffStages(mac.m));
        }
        for (field, value) in [
            ("slot_sigma", mac.slot_sigma),
            ("sifs", mac.sifs),
            ("difs", mac.difs),
            ("eifs", mac.eifs),
            ("ack_timeout", mac.ack_timeout),
            ("prop_delay", mac.prop_delay),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                errs.push(ScenarioError::NonPositiveDuration { field, value });
            }
        }
        for (field, value) in [
            ("phy_header_bits", mac.phy_header_bits),
            ("mac_header_bits", mac.mac_header_bits),
            ("ack_bits", mac.ack_bits),
            ("payload_bits", mac.payload_bits),
        ] {
            if value == 0 {
                errs.push(ScenarioError::NonPositiveSize {
                    field: format!("mac.{field}"),
                    value: 0.0,
                });
            }
        }
        if !(mac.basic_rate > 0.0 && mac.basic_rate.is_finite()) {
            errs.push(ScenarioError::NonPositiveSize {
                field: "mac.basic_rate".into(),
                value: mac.basic_rate,
            });
        }

        let r = &self.radio;
        for (field, value, ok) in [
            ("bandwidth_hz", r.bandwidth_hz, r.bandwidth_hz > 0.0),
            ("ref_distance_m", r.ref_distance_m, r.ref_distance_m > 0.0),
            ("carrier_hz", r.carrier_hz, r.carrier_hz > 0.0),
            (
                "path_loss_exponent",
                r.path_loss_exponent,
                (2.0..=6.0).contains(&r.path_loss_exponent),
            ),
            ("tx_power_dbm", r.tx_power_dbm, r.tx_power_dbm.is_finite()),
            (
                "noise_figure_db",
                r.noise_figure_db,
                r.noise_figure_db.is_finite(),
            ),
        ] {
            if !(ok && value.is_finite()) {
                errs.push(ScenarioError::InvalidRadio { field, value });
            }
        }

        let mut class_ids = BTreeMap::new();
        for class in &self.rate_classes {
            if class_ids.insert(class.id, class).is_some() {
                errs.push(ScenarioError::DuplicateRateClass(class.id));
            }
            if !(class.data_rate > 0.0 && class.data_rate.is_finite()) {
                errs.push(ScenarioError::NonPositiveSize {
                    field: format!("rate_class {}.data_rate", class.id),
                    value: class.data_rate,
                });
            }
            for (field, v) in [
                ("chips_per_symbol", class.chips_per_symbol),
                ("bits_per_symbol", class.bits_per_symbol),
            ] {
                if v == 0 {
                    errs.push(ScenarioError::NonPositiveSize {
                        field: format!("rate_class {}.{field}", class.id),
                        value: 0.0,
                    });
                }
            }
        }
        let mut prev: Option<f64> = None;
        for (id, class) in &class_ids {
            if let Some(p) = prev {
                if class.data_rate <= p {
                    errs.push(ScenarioError::RateOrder { id: *id });
                }
            }
            prev = Some(class.data_rate);
        }

        if self.stations.is_empty() {
            errs.push(ScenarioError::EmptyNetwork);
        }
        let mut seen = BTreeSet::new();
        for st in &self.stations {
            if !seen.insert(st.id) {
                errs.push(ScenarioError::DuplicateStation(st.id));
            }
            if !class_ids.contains_key(&st.rate_class) {
                errs.push(ScenarioError::UnknownRateClass {
                    station: st.id,
                    class: st.rate_class,
                });
            }
            if !(st.lambda_pps.is_finite() && st.lambda_pps >= 0.0) {
                errs.push(ScenarioError::InvalidArrivalRate {
                    station: st.id,
                    value: st.lambda_pps,
                });
            }
            match st.channel {
                Channel::FixedPer(p) => {
                    if !(0.0..1.0).contains(&p) {
                        errs.push(ScenarioError::PerOutOfRange {
                            station: st.id,
                            value: p,
                        });
                    }
                }
                Channel::Distance(d) => {
                    if !(d > 0.0 && d.is_finite()) {
                        errs.push(ScenarioError::NonPositiveDistance {
                            station: st.id,
                            value: d,
                        });
                    }
                }
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errs))
        }
    }

    pub fn class(&self, id: u32) -> Option<&RateClass> {
        self.rate_classes.iter().find(|c| c.id == id)
    }

    /// Rate class of every station, in station order.
    ///
    /// Panics on an unknown class id; call [`Scenario::check`] first.
    pub fn station_classes(&self) -> Vec<&RateClass> {
        self.stations
            .iter()
            .map(|s| {
                self.class(s.rate_class)
                    .unwrap_or_else(|| panic!("station {}: unknown rate class", s.id))
            })
            .collect()
    }

    /// Partition of station indices by rate class, classes in increasing
    /// data-rate order.
    pub fn class_map(&self) -> ClassMap {
        let mut ids: Vec<u32> = self.rate_classes.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        let station_classes: Vec<u32> = self.stations.iter().map(|s| s.rate_class).collect();
        ClassMap::new(ids, &station_classes)
    }

    pub fn station_index(&self, id: u32) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }
}

/// Stations grouped into rate classes, ordered by increasing data rate.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMap {
    class_ids: Vec<u32>,
    members: Vec<Vec<usize>>,
}

impl ClassMap {
    /// `class_ids` in increasing data-rate order; `station_classes[s]` is the
    /// class id of station index `s`. Stations whose class is not listed are
    /// dropped from every class.
    pub fn new(class_ids: Vec<u32>, station_classes: &[u32]) -> Self {
        let mut members = vec![Vec::new(); class_ids.len()];
        for (s, c) in station_classes.iter().enumerate() {
            if let Some(pos) = class_ids.iter().position(|id| id == c) {
                members[pos].push(s);
            }
        }
        ClassMap { class_ids, members }
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    /// Position of class `id` in rate order.
    pub fn position(&self, id: u32) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == id)
    }

    /// Station indices in the class at rate-order position `pos`.
    pub fn members(&self, pos: usize) -> &[usize] {
        &self.members[pos]
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }
}
