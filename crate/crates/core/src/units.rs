//! Laboratory units, atomic units and classically scaled variables.
//!
//! Scaled variables measure the drive in units of the unperturbed Kepler
//! orbit of the initial state: `omega0 = omega * n0^3`, `F0 = F * n0^4`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atomic unit of time in seconds (CODATA 2018).
pub const AU_TIME_S: f64 = 2.418884326586e-17;
/// Atomic unit of electric field in V/cm (CODATA 2018).
pub const AU_FIELD_V_PER_CM: f64 = 5.142206748e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabParams {
    /// Drive frequency in Hz (not angular).
    pub frequency_hz: f64,
    pub interaction_time_s: f64,
    pub field_v_per_cm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicParams {
    /// Angular frequency in a.u.
    pub omega: f64,
    pub time: f64,
    pub field: f64,
    pub n0: u32,
    pub n_eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub omega0: f64,
    pub f0: f64,
    /// Interaction time in field periods.
    pub t_cycles: f64,
}

impl AtomicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::domain(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.time >= 0.0) {
            return Err(Error::domain(format!("time must be non-negative, got {}", self.time)));
        }
        if !(self.field >= 0.0) {
            return Err(Error::domain(format!("field must be non-negative, got {}", self.field)));
        }
        if self.n0 == 0 {
            return Err(Error::domain("n0 must be at least 1"));
        }
        if !(self.n_eff > 0.0) {
            return Err(Error::domain(format!("n_eff must be positive, got {}", self.n_eff)));
        }
        Ok(())
    }

    /// Field-free energy of the initial state, `-1/(2 n0^2)`.
    pub fn initial_energy(&self) -> f64 {
        -0.5 / (self.n0 as f64).powi(2)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Converts laboratory parameters to atomic units for a given initial state.
pub fn lab_to_atomic(lab: &LabParams, n0: u32, n_eff: f64) -> Result<AtomicParams> {
    positive("frequency", lab.frequency_hz)?;
    positive("interaction time", lab.interaction_time_s)?;
    let field = match lab.field_v_per_cm {
        Some(f) => {
            positive("field amplitude", f)?;
            f / AU_FIELD_V_PER_CM
        }
        None => 0.0,
    };
    let atomic = AtomicParams {
        omega: 2.0 * PI * lab.frequency_hz * AU_TIME_S,
        time: lab.interaction_time_s / AU_TIME_S,
        field,
        n0,
        n_eff,
    };
    atomic.validate()?;
    Ok(atomic)
}

pub fn scale(atomic: &AtomicParams) -> ScaledParams {
    let n = atomic.n0 as f64;
    ScaledParams {
        omega0: atomic.omega * n.powi(3),
        f0: atomic.field * n.powi(4),
        t_cycles: atomic.time * atomic.omega / (2.0 * PI),
    }
}

/// Inverse of [`scale`]; `n_eff` is carried through unchanged.
pub fn unscale(scaled: &ScaledParams, n0: u32, n_eff: f64) -> Result<AtomicParams> {
    if n0 == 0 {
        return Err(Error::domain("n0 must be at least 1"));
    }
    let n = n0 as f64;
    let omega = scaled.omega0 / n.powi(3);
    Ok(AtomicParams { omega, time: scaled.t_cycles * 2.0 * PI / omega, field: scaled.f0 / n.powi(4), n0, n_eff })
}
