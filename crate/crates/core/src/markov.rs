//! Per-station backoff chain: failure probability, normalization constant,
//! transmission probability and the idle/backoff split of the stationary
//! distribution.
//!
//! The chain has backoff stages `0..=m` with windows `W_i = 2^i W_0`, plus an
//! idle state `I` for stations whose queue is empty. A station attempts a
//! transmission only from the `(i, 0)` states; a failed attempt (collision or
//! channel error) moves it one stage up, and stage `m` loops on itself.

use thiserror::Error;

/// Inputs may stray outside `[0, 1]` by this much (fixed-point round-off)
/// and are clamped; anything further is an error.
pub const PROBABILITY_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum MarkovError {
    #[error("failure probability P_eq = {0} must lie in [0, 1)")]
    PeqOutOfRange(f64),
    #[error("{name} = {value} is not a probability")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("alpha = {0} must be at least 1")]
    InvalidAlpha(f64),
    #[error("station can never leave the idle state (q < 1 and P_I,0 = 0)")]
    DegenerateIdle,
}

/// Snapshot of one station's chain at an operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationState {
    pub tau: f64,
    pub p_col: f64,
    pub p_e: f64,
    pub p_eq: f64,
    pub q: f64,
    pub p_i0: f64,
    pub b_i: f64,
    pub b_00: f64,
    pub alpha: f64,
}

pub(crate) fn probability(name: &'static str, value: f64) -> Result<f64, MarkovError> {
    if (-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(MarkovError::NotAProbability { name, value })
    }
}

fn failure_probability(p_eq: f64) -> Result<f64, MarkovError> {
    let p = probability("P_eq", p_eq).map_err(|_| MarkovError::PeqOutOfRange(p_eq))?;
    if p >= 1.0 {
        return Err(MarkovError::PeqOutOfRange(p_eq));
    }
    Ok(p)
}

/// Failure probability of an attempt when collisions and channel errors are
/// independent: `1 - (1 - p_col)(1 - p_e)`.
pub fn p_eq(p_col: f64, p_e: f64) -> f64 {
    p_col + p_e - p_e * p_col
}

// sum_{i=0}^{m-1} (2p)^i, the removable-singularity-free form of
// (1 - (2p)^m) / (1 - 2p)
fn doubling_series(p: f64, m: u32) -> f64 {
    let x = 2.0 * p;
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..m {
        sum += term;
        term *= x;
    }
    sum
}

/// Normalization constant of the backoff states: `alpha * b_00` is the total
/// probability of the non-idle part of the chain.
pub fn alpha(p_eq: f64, w0: u32, m: u32) -> Result<f64, MarkovError> {
    let p = failure_probability(p_eq)?;
    let w0 = f64::from(w0);
    let top = (2.0 * p).powi(m as i32) / (1.0 - p);
    Ok(0.5 * (w0 * (doubling_series(p, m) + top) + 1.0 / (1.0 - p)))
}

/// Attempt probability of an always-backlogged station.
pub fn tau_saturated(p_eq: f64, w0: u32, m: u32) -> Result<f64, MarkovError> {
    let p = failure_probability(p_eq)?;
    let w0 = f64::from(w0);
    Ok(2.0 / ((w0 + 1.0) + w0 * p * doubling_series(p, m)))
}

/// Attempt probability of a station whose queue is non-empty with
/// probability `q` (small-buffer approximation, `P_I,0 = q`).
pub fn tau_unsaturated(q: f64, p_eq: f64, alpha: f64) -> Result<f64, MarkovError> {
    let q = probability("q", q)?;
    let p = failure_probability(p_eq)?;
    if alpha.is_nan() || alpha < 1.0 {
        return Err(MarkovError::InvalidAlpha(alpha));
    }
    Ok((q / (1.0 - p)) / (q * (alpha - 1.0) + 1.0))
}

/// Solves `b_I = (1 - q) / P_I,0 * b_00` and `alpha * b_00 + b_I = 1`
/// jointly. Returns `(b_00, b_I)`.
pub fn stationary_split(
    q: f64,
    p_eq: f64,
    alpha: f64,
    p_i0: f64,
) -> Result<(f64, f64), MarkovError> {
    let q = probability("q", q)?;
    let p_i0 = probability("P_I,0", p_i0)?;
    failure_probability(p_eq)?;
    if alpha.is_nan() || alpha < 1.0 {
        return Err(MarkovError::InvalidAlpha(alpha));
    }
    if q >= 1.0 {
        return Ok((1.0 / alpha, 0.0));
    }
    if p_i0 == 0.0 {
        return Err(MarkovError::DegenerateIdle);
    }
    let ratio = (1.0 - q) / p_i0;
    let b_00 = 1.0 / (alpha + ratio);
    Ok((b_00, ratio * b_00))
}

/// [`stationary_split`] under `P_I,0 = q`, written so that `q = 0` gives the
/// limit `(0, 1)` rather than an error.
pub fn stationary_split_small_buffer(q: f64, alpha: f64) -> (f64, f64) {
    let denom = q * alpha + 1.0 - q;
    (q / denom, (1.0 - q) / denom)
}

/// Probability that at least one other station transmits in a slot.
pub fn p_col(s: usize, taus: &[f64]) -> f64 {
    let silent: f64 = taus
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != s)
        .map(|(_, t)| 1.0 - t)
        .product();
    1.0 - silent
}

/// Probability of at least one Poisson arrival during a mean slot.
pub fn q_prob(lambda_pps: f64, t_av: f64) -> f64 {
    -(-lambda_pps * t_av).exp_m1()
}
