//! Link budget and Rayleigh-fading bit/packet error rates for 802.11b.

use std::f64::consts::PI;

use thiserror::Error;

use crate::scenario::{Channel, Modulation, Radio, RateClass, StationConfig};

/// One-sided thermal noise density, dBm/Hz.
pub const NOISE_DENSITY_DBM_HZ: f64 = -174.0;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PhyError {
    #[error("distance {distance} m is below the reference distance {reference} m")]
    DistanceBelowReference { distance: f64, reference: f64 },
    #[error("path-loss exponent {0} outside [2, 6]")]
    PathLossExponent(f64),
    #[error("SNR per bit must be non-negative, got {0}")]
    NegativeGamma(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    pub rx_power_dbm: f64,
    pub snr_db: f64,
    pub gamma_db: f64,
    pub ber: f64,
    pub per: f64,
}

/// Free-space loss at `d0` with unit antenna gains.
pub fn free_space_loss_db(d0: f64, carrier_hz: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    20.0 * (4.0 * PI * d0 / wavelength).log10()
}

/// Log-distance path loss: free-space loss at `d0` plus `10 n_p log10(d/d0)`.
pub fn path_loss_db(d: f64, n_p: f64, d0: f64, carrier_hz: f64) -> Result<f64, PhyError> {
    log_distance_loss(d, n_p, d0, free_space_loss_db(d0, carrier_hz))
}

fn log_distance_loss(d: f64, n_p: f64, d0: f64, ref_loss_db: f64) -> Result<f64, PhyError> {
    if !(d >= d0 && d0 > 0.0) {
        return Err(PhyError::DistanceBelowReference {
            distance: d,
            reference: d0,
        });
    }
    if !(2.0..=6.0).contains(&n_p) {
        return Err(PhyError::PathLossExponent(n_p));
    }
    Ok(ref_loss_db + 10.0 * n_p * (d / d0).log10())
}

fn radio_path_loss(d: f64, radio: &Radio) -> Result<f64, PhyError> {
    let reference = radio
        .ref_loss_db
        .unwrap_or_else(|| free_space_loss_db(radio.ref_distance_m, radio.carrier_hz));
    log_distance_loss(d, radio.path_loss_exponent, radio.ref_distance_m, reference)
}

pub fn rx_power_dbm(d: f64, radio: &Radio) -> Result<f64, PhyError> {
    Ok(radio.tx_power_dbm - radio_path_loss(d, radio)?)
}

/// Received SNR at distance `d` over the channel bandwidth.
pub fn snr_db(d: f64, radio: &Radio) -> Result<f64, PhyError> {
    Ok(rx_power_dbm(d, radio)?
        - NOISE_DENSITY_DBM_HZ
        - 10.0 * radio.bandwidth_hz.log10()
        - radio.noise_figure_db)
}

/// SNR per transmitted bit after despreading.
pub fn gamma_db(snr_db: f64, class: &RateClass) -> f64 {
    snr_db + 10.0 * (f64::from(class.chips_per_symbol) / f64::from(class.bits_per_symbol)).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Bit error rate under Rayleigh fading at linear SNR-per-bit `gamma`.
pub fn ber(gamma: f64, modulation: Modulation) -> Result<f64, PhyError> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(PhyError::NegativeGamma(gamma));
    }
    let p = match modulation {
        Modulation::Dbpsk => 0.5 / (1.0 + gamma),
        Modulation::Dqpsk => {
            let g = gamma * std::f64::consts::SQRT_2;
            if g.is_infinite() {
                0.0
            } else {
                0.5 * (1.0 - (g / (1.0 + g)).sqrt())
            }
        }
        Modulation::Cck55 => cck_ber(4, gamma),
        Modulation::Cck11 => cck_ber(8, gamma),
    };
    Ok(p.clamp(0.0, 0.5))
}

fn cck_ber(alpha: u32, gamma: f64) -> f64 {
    let n = alpha - 1;
    let scale = f64::from(1u32 << n) / f64::from((1u32 << alpha) - 1);
    let mut binom: u64 = 1;
    let mut sum = 0.0;
    for i in 1..=n {
        // C(n, i) = C(n, i - 1) * (n - i + 1) / i, exact in integers
        binom = binom * u64::from(n - i + 1) / u64::from(i);
        let fi = f64::from(i);
        let term = binom as f64 / (1.0 + fi + fi * gamma);
        if i % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    scale * sum
}

/// Packet error rate over `payload_bits` independent bit errors.
pub fn per(ber: f64, payload_bits: u32) -> f64 {
    if payload_bits == 0 || ber <= 0.0 {
        return 0.0;
    }
    if ber >= 1.0 {
        return 1.0;
    }
    -(f64::from(payload_bits) * (-ber).ln_1p()).exp_m1()
}

pub fn link_budget(
    d: f64,
    radio: &Radio,
    class: &RateClass,
    payload_bits: u32,
) -> Result<LinkBudget, PhyError> {
    let rx = rx_power_dbm(d, radio)?;
    let snr = snr_db(d, radio)?;
    let gamma = gamma_db(snr, class);
    let b = ber(db_to_linear(gamma), class.modulation)?;
    Ok(LinkBudget {
        rx_power_dbm: rx,
        snr_db: snr,
        gamma_db: gamma,
        ber: b,
        per: per(b, payload_bits),
    })
}

/// Packet error rate seen by one station: fixed, or from its link budget.
pub fn station_per(
    station: &StationConfig,
    class: &RateClass,
    radio: &Radio,
    payload_bits: u32,
) -> Result<f64, PhyError> {
    match station.channel {
        Channel::FixedPer(p) => Ok(p),
        Channel::Distance(d) => Ok(link_budget(d, radio, class, payload_bits)?.per),
    }
}
