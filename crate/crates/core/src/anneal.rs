//! Metropolis acceptance and geometric cooling.
//!
//! A candidate move with loss worsening `Δ` at temperature `T` is accepted
//! with probability `e^(-Δ/T)`; improving moves (`Δ ≤ 0`) are always
//! accepted. The temperature starts at `T₀` and decays by a factor
//! `α ∈ (0,1)` at every cooling step.

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Temperature trajectory: `current = t0 * alpha^epochs_cooled`, maintained
/// by repeated multiplication.
#[derive(Clone, Debug, PartialEq)]
pub struct CoolingState {
    t0: f64,
    alpha: f64,
    current: f64,
    epochs_cooled: u32,
}

impl CoolingState {
    pub fn new(t0: f64, alpha: f64) -> Result<Self> {
        if !t0.is_finite() || t0 <= 0.0 {
            return Err(Error::NonPositiveTemperature(t0));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidCoolingFactor(alpha));
        }
        Ok(CoolingState {
            t0,
            alpha,
            current: t0,
            epochs_cooled: 0,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn temperature(&self) -> f64 {
        self.current
    }

    pub fn epochs_cooled(&self) -> u32 {
        self.epochs_cooled
    }

    /// One cooling step: `T <- alpha * T`. The multiplication is applied to
    /// the running value (not recomputed as a power) so repeated calls are
    /// bit-reproducible.
    #[must_use]
    pub fn cool(&self) -> CoolingState {
        CoolingState {
            t0: self.t0,
            alpha: self.alpha,
            current: self.current * self.alpha,
            epochs_cooled: self.epochs_cooled + 1,
        }
    }
}

/// Record of one Metropolis decision.
///
/// `probability` is clipped to 1 for reporting; `raw_probability` is the
/// unclipped `e^(-Δ/T)` (which exceeds 1 for improving moves) and is the
/// value the draw is compared against.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceDecision {
    pub worsening: f64,
    pub probability: f64,
    pub raw_probability: f64,
    pub draw: f64,
    pub accepted: bool,
}

/// Acceptance probability `e^(-worsening/temperature)`, clipped to 1 for
/// `worsening ≤ 0`.
///
/// For large positive `worsening / temperature` the exponential underflows
/// to 0 rather than erroring; a subnormal result can only be beaten by a
/// draw of exactly 0.
pub fn acceptance_probability(worsening: f64, temperature: f64) -> Result<f64> {
    if !worsening.is_finite() {
        return Err(Error::NonFiniteWorsening(worsening));
    }
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    if worsening <= 0.0 {
        Ok(1.0)
    } else {
        Ok((-worsening / temperature).exp())
    }
}

/// Metropolis decision at the current temperature.
///
/// Always consumes exactly one uniform draw, improving move or not, so the
/// acceptance stream stays aligned across trajectories.
pub fn decide(
    worsening: f64,
    cooling: &CoolingState,
    rng: &mut RngState,
) -> Result<AcceptanceDecision> {
    if !worsening.is_finite() {
        return Err(Error::NonFiniteWorsening(worsening));
    }
    let temperature = cooling.temperature();
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    let raw = (-worsening / temperature).exp();
    let draw = rng.uniform01();
    Ok(AcceptanceDecision {
        worsening,
        probability: raw.min(1.0),
        raw_probability: raw,
        draw,
        accepted: draw < raw,
    })
}
