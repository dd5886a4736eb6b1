//! Steady-state regime of the FEL-like coherence mechanism in a myelinated axon.
//!
//! The saturated transverse field modulus and the gain time follow the
//! power laws `A₀ = c_A ρ^{2/3} P_z^{1/3}` and `t = c_t ρ^{-1/3} P_z^{-2/3}`,
//! where `ρ` is the sodium-ion number density in one myelin-sheath volume and
//! `P_z` the permanent polarization of the solvating water.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted prefactor of the saturated field modulus, m³·kg·s⁻²·A⁻¹.
pub const C_A: f64 = 2.6e-22;
/// Fitted prefactor of the gain time, m⁻¹·s.
pub const C_T: f64 = 8.1e-5;

/// Geometry and electrophysiology of a myelinated central-nervous-system axon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxonPreset {
    /// Axon diameter, m.
    pub l_a: f64,
    /// Myelin run length, m.
    pub l_r: f64,
    /// Number of myelin sheaths on the axon.
    pub n_ms: u32,
    /// Total number of Na⁺ ions migrating in during one action potential.
    pub n_total: f64,
    /// Conduction velocity, m/s.
    pub v_cond: f64,
    /// Potential difference between firing and resting states, V.
    pub delta_u: f64,
    /// Static field along the axon, V/m.
    pub e0z: f64,
    /// Permanent polarization of the solvating water, dimensionless.
    pub p_z: f64,
}

impl Default for AxonPreset {
    /// Parameter set quoted for the human brain; `n_ms` sits at the top of the
    /// 50–100 range.
    fn default() -> Self {
        Self {
            l_a: 10e-6,
            l_r: 1e-3,
            n_ms: 100,
            n_total: 1e6,
            v_cond: 150.0,
            delta_u: 0.1,
            e0z: 100.0,
            p_z: 4.9e-7,
        }
    }
}

impl AxonPreset {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_a", self.l_a),
            ("l_r", self.l_r),
            ("v_cond", self.v_cond),
            ("delta_u", self.delta_u),
            ("e0z", self.e0z),
            ("p_z", self.p_z),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("axon preset `{name}` must be positive, got {v}")));
            }
        }
        if self.n_ms == 0 {
            return Err(Error::domain("axon preset `n_ms` must be at least 1"));
        }
        if !(self.n_total.is_finite() && self.n_total >= 0.0) {
            return Err(Error::domain(format!(
                "axon preset `n_total` must be non-negative, got {}",
                self.n_total
            )));
        }
        if self.p_z > 1.0 {
            return Err(Error::domain(format!("P_z must not exceed 1, got {}", self.p_z)));
        }
        Ok(())
    }

    /// Dynamical time of action-potential propagation over one run, `l_r / v`.
    pub fn dynamical_time(&self) -> f64 {
        self.l_r / self.v_cond
    }
}

/// Ion number density in one sheath volume `π l_a² l_r / 4`, m⁻³.
pub fn ion_density(preset: &AxonPreset) -> Result<f64> {
    if preset.n_ms == 0 {
        return Err(Error::domain("n_ms must be at least 1"));
    }
    let volume = std::f64::consts::PI * preset.l_a * preset.l_a * preset.l_r / 4.0;
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::domain(format!("sheath volume must be positive, got {volume}")));
    }
    if !(preset.n_total >= 0.0) {
        return Err(Error::domain("n_total must be non-negative"));
    }
    Ok(preset.n_total / preset.n_ms as f64 / volume)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    /// Ion number density, m⁻³.
    pub rho: f64,
    pub p_z: f64,
    /// Saturated transverse field modulus in the radiation gauge, V·s/m.
    pub a0: f64,
    /// Gain time, s.
    pub t_gain: f64,
}

impl SteadyState {
    pub const C_A: f64 = C_A;
    pub const C_T: f64 = C_T;
}

pub fn steady_state(rho: f64, p_z: f64) -> Result<SteadyState> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("ion density must be positive, got {rho}")));
    }
    if !(p_z > 0.0 && p_z <= 1.0) {
        return Err(Error::domain(format!("P_z must lie in (0, 1], got {p_z}")));
    }
    Ok(SteadyState {
        rho,
        p_z,
        a0: C_A * rho.powf(2.0 / 3.0) * p_z.cbrt(),
        t_gain: C_T * rho.cbrt().recip() * p_z.powf(-2.0 / 3.0),
    })
}

/// Steady state of a preset together with the ratio of gain time to the
/// propagation time `l_r / v`.
pub fn evaluate_preset(preset: &AxonPreset) -> Result<(SteadyState, f64)> {
    preset.validate()?;
    let ss = steady_state(ion_density(preset)?, preset.p_z)?;
    let ratio = ss.t_gain / preset.dynamical_time();
    Ok((ss, ratio))
}
