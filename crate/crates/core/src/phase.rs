//! Superradiant phase transition of the Dicke–Preparata model.
//!
//! A domain turns superradiant when the quasi-particle density exceeds
//! `ρ_c = 2ε₀ε / (ε_k₀·d₁₀)²` and the temperature is below
//! `T_c(ρ) = ε / (k_B ln((ρ+ρ_c)/(ρ−ρ_c)))`. Both inequalities are strict, so
//! boundary points (including `ρ = ρ_c`) are normal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::numeric::{dot, norm, Vec3};

/// Two-level quasi-particle coupled to a single resonant photon polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiParticleSpec {
    /// Two-level gap `ε = ħΩ`, J.
    pub eps_gap: f64,
    /// Transition dipole `d₁₀`, C·m.
    pub d10: Vec3,
    /// Unit photon polarization vector.
    pub pol: Vec3,
}

impl QuasiParticleSpec {
    /// Water rotational transition with a 1.85 D dipole along the polarization.
    pub fn water(consts: &PhysicalConstants) -> Self {
        Self {
            eps_gap: consts.eps_w,
            d10: [6.17e-30, 0.0, 0.0],
            pol: [1.0, 0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_gap > 0.0 && self.eps_gap.is_finite()) {
            return Err(Error::domain(format!("eps_gap must be positive, got {}", self.eps_gap)));
        }
        if self.d10.iter().chain(self.pol.iter()).any(|x| !x.is_finite()) {
            return Err(Error::domain("dipole and polarization must be finite"));
        }
        if (norm(&self.pol) - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "polarization must be a unit vector, |pol| = {}",
                norm(&self.pol)
            )));
        }
        Ok(())
    }

    /// Projection `ε_k₀ · d₁₀`.
    pub fn coupling(&self) -> f64 {
        dot(&self.pol, &self.d10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Superradiant,
    Normal,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Superradiant => "SR",
            Phase::Normal => "N",
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, Phase::Superradiant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub rho: f64,
    pub t: f64,
    pub phase: Phase,
}

pub fn critical_density(spec: &QuasiParticleSpec, consts: &PhysicalConstants) -> Result<f64> {
    spec.validate()?;
    let coupling = spec.coupling();
    if coupling == 0.0 || coupling.abs() <= 1e-12 * norm(&spec.d10) {
        return Err(Error::domain(
            "dipole orthogonal to polarization: critical density is infinite",
        ));
    }
    Ok(2.0 * consts.eps0 * spec.eps_gap / (coupling * coupling))
}

/// Critical temperature in units of `ε / k_B` for a reduced density `r = ρ/ρ_c`.
pub fn reduced_critical_temperature(r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::domain(format!(
            "no superradiance at any temperature for rho/rho_c = {r} <= 1"
        )));
    }
    Ok(1.0 / ((r + 1.0) / (r - 1.0)).ln())
}

pub fn critical_temperature(
    rho: f64,
    rho_c: f64,
    eps_gap: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if !(rho_c > 0.0) {
        return Err(Error::domain(format!("rho_c must be positive, got {rho_c}")));
    }
    if !(rho > rho_c) {
        return Err(Error::domain(format!(
            "no superradiance at any temperature: rho = {rho} <= rho_c = {rho_c}"
        )));
    }
    Ok(eps_gap / (consts.k_b * ((rho + rho_c) / (rho - rho_c)).ln()))
}

/// Classification rule in reduced coordinates `(ρ/ρ_c, k_B T/ε)`.
pub fn classify_reduced(r: f64, tau: f64) -> Phase {
    match reduced_critical_temperature(r) {
        Ok(tc) if tau < tc => Phase::Superradiant,
        _ => Phase::Normal,
    }
}

/// Precomputed `ρ_c` for repeated classification.
#[derive(Debug, Clone, Copy)]
pub struct PhaseClassifier {
    pub rho_c: f64,
    pub eps_gap: f64,
    pub k_b: f64,
}

impl PhaseClassifier {
    pub fn new(spec: &QuasiParticleSpec, consts: &PhysicalConstants) -> Result<Self> {
        Ok(Self {
            rho_c: critical_density(spec, consts)?,
            eps_gap: spec.eps_gap,
            k_b: consts.k_b,
        })
    }

    pub fn reduced(&self, rho: f64, t: f64) -> (f64, f64) {
        (rho / self.rho_c, self.k_b * t / self.eps_gap)
    }

    pub fn classify(&self, rho: f64, t: f64) -> Phase {
        let (r, tau) = self.reduced(rho, t);
        classify_reduced(r, tau)
    }
}

pub fn classify_phase(
    rho: f64,
    t: f64,
    spec: &QuasiParticleSpec,
    consts: &PhysicalConstants,
) -> Result<PhasePoint> {
    if !(rho >= 0.0 && t >= 0.0) {
        return Err(Error::domain(format!("density and temperature must be non-negative, got ({rho}, {t})")));
    }
    let classifier = PhaseClassifier::new(spec, consts)?;
    Ok(PhasePoint { rho, t, phase: classifier.classify(rho, t) })
}

/// Classified `(ρ, T)` grid, row-major with temperature as the inner index.
#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub rho_c: f64,
    pub eps_gap: f64,
    pub k_b: f64,
    pub rho_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub points: Vec<PhasePoint>,
}

impl PhaseDiagram {
    pub fn at(&self, i_rho: usize, i_t: usize) -> &PhasePoint {
        &self.points[i_rho * self.t_grid.len() + i_t]
    }

    /// Rows of `(ρ/ρ_c, k_B T/ε, phase)`.
    pub fn reduced_rows(&self) -> impl Iterator<Item = (f64, f64, Phase)> + '_ {
        self.points
            .iter()
            .map(|p| (p.rho / self.rho_c, self.k_b * p.t / self.eps_gap, p.phase))
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(format!("{name} grid values must be finite and non-negative")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(format!("{name} grid must be strictly ascending")));
    }
    Ok(())
}

pub fn phase_diagram(
    spec: &QuasiParticleSpec,
    rho_grid: &[f64],
    t_grid: &[f64],
    consts: &PhysicalConstants,
) -> Result<PhaseDiagram> {
    check_grid("density", rho_grid)?;
    check_grid("temperature", t_grid)?;
    let classifier = PhaseClassifier::new(spec, consts)?;
    let points: Vec<PhasePoint> = rho_grid
        .par_iter()
        .flat_map_iter(|&rho| {
            t_grid.iter().map(move |&t| PhasePoint { rho, t, phase: classifier.classify(rho, t) })
        })
        .collect();
    Ok(PhaseDiagram {
        rho_c: classifier.rho_c,
        eps_gap: spec.eps_gap,
        k_b: consts.k_b,
        rho_grid: rho_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn spec() -> QuasiParticleSpec {
        QuasiParticleSpec { eps_gap: 5.06e-22, d10: [1e-29, 0.0, 0.0], pol: [1.0, 0.0, 0.0] }
    }

    #[test]
    fn critical_density_arithmetic() {
        // 2 · 8.8541878128e-12 · 5.06e-22 / (1e-29)²
        let rc = critical_density(&spec(), &consts()).unwrap();
        let expected = 2.0 * 8.854_187_812_8e-12 * 5.06e-22 / 1e-58;
        assert!((rc - expected).abs() / expected < 1e-14);
        assert!((rc - 8.96e25).abs() / 8.96e25 < 1e-3);
    }

    #[test]
    fn doubling_dipole_quarters_density() {
        let s = spec();
        let d = QuasiParticleSpec { d10: [2e-29, 0.0, 0.0], ..s };
        let a = critical_density(&s, &consts()).unwrap();
        let b = critical_density(&d, &consts()).unwrap();
        assert!((b - a / 4.0).abs() / a < 1e-14);
    }

    #[test]
    fn orthogonal_dipole_is_rejected() {
        let s = QuasiParticleSpec { d10: [0.0, 1e-29, 0.0], ..spec() };
        assert!(matches!(critical_density(&s, &consts()), Err(Error::Domain(_))));
    }

    #[test]
    fn non_unit_polarization_rejected() {
        let s = QuasiParticleSpec { pol: [1.0, 1.0, 0.0], ..spec() };
        assert!(critical_density(&s, &consts()).is_err());
    }

    #[test]
    fn tc_at_three_rho_c_is_closed_form() {
        assert_eq!(reduced_critical_temperature(3.0).unwrap(), 1.0 / std::f64::consts::LN_2);
        let c = consts();
        let eps = 5.06e-22;
        let tc = critical_temperature(3.0, 1.0, eps, &c).unwrap();
        assert_eq!(tc, eps / (c.k_b * std::f64::consts::LN_2));
    }

    #[test]
    fn tc_vanishes_at_threshold_and_rejects_subcritical() {
        let c = consts();
        let near = critical_temperature(1.0 + 1e-12, 1.0, 1.0, &c).unwrap();
        let far = critical_temperature(1.1, 1.0, 1.0, &c).unwrap();
        assert!(near > 0.0 && near < far / 5.0);
        assert!(critical_temperature(1.0, 1.0, 1.0, &c).is_err());
        assert!(critical_temperature(0.5, 1.0, 1.0, &c).is_err());
    }

    #[test]
    fn tc_monotone_on_sampled_grid() {
        let c = consts();
        let ratios = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0];
        let tcs: Vec<f64> =
            ratios.iter().map(|r| critical_temperature(*r, 1.0, 5.06e-22, &c).unwrap()).collect();
        assert!(tcs.windows(2).all(|w| w[0] < w[1]), "{tcs:?}");
        let big = critical_temperature(1e6, 1.0, 1.0, &c).unwrap();
        let mid = critical_temperature(1e3, 1.0, 1.0, &c).unwrap();
        assert!(big > mid);
    }

    #[test]
    fn classification_examples() {
        let c = consts();
        let s = spec();
        let rc = critical_density(&s, &c).unwrap();
        for t in [0.0, 1.0, 1e6] {
            assert_eq!(classify_phase(0.5 * rc, t, &s, &c).unwrap().phase, Phase::Normal);
        }
        let t_half = 0.5 * s.eps_gap / (c.k_b * std::f64::consts::LN_2);
        assert_eq!(classify_phase(3.0 * rc, t_half, &s, &c).unwrap().phase, Phase::Superradiant);
        // equality in the temperature condition is normal
        let tc = reduced_critical_temperature(3.0).unwrap();
        assert_eq!(classify_reduced(3.0, tc), Phase::Normal);
        assert_eq!(classify_reduced(1.0, 0.0), Phase::Normal);
        assert!(classify_phase(-1.0, 1.0, &s, &c).is_err());
    }

    #[test]
    fn diagram_degenerate_and_subcritical() {
        let c = consts();
        let s = spec();
        let rc = critical_density(&s, &c).unwrap();
        let d = phase_diagram(&s, &[0.1 * rc, 0.5 * rc, 0.99 * rc], &[0.0, 1.0, 100.0], &c).unwrap();
        assert!(d.points.iter().all(|p| p.phase == Phase::Normal));

        let single = phase_diagram(&s, &[2.0 * rc], &[0.3], &c).unwrap();
        assert_eq!(single.points[0].phase, classify_phase(2.0 * rc, 0.3, &s, &c).unwrap().phase);

        assert!(phase_diagram(&s, &[], &[1.0], &c).is_err());
        assert!(phase_diagram(&s, &[2.0, 1.0], &[1.0], &c).is_err());
    }

    #[test]
    fn diagram_boundary_within_one_cell() {
        let c = consts();
        let s = spec();
        let rc = critical_density(&s, &c).unwrap();
        let temp_unit = s.eps_gap / c.k_b;
        let n = 100;
        let r_grid: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
        let tau_grid: Vec<f64> = (0..n).map(|i| 3.0 * i as f64 / (n - 1) as f64).collect();
        let rho: Vec<f64> = r_grid.iter().map(|r| r * rc).collect();
        let t: Vec<f64> = tau_grid.iter().map(|x| x * temp_unit).collect();
        let d = phase_diagram(&s, &rho, &t, &c).unwrap();
        let dtau = tau_grid[1];
        for (i, &r) in r_grid.iter().enumerate() {
            // first normal row above the superradiant block
            let boundary = (0..n).find(|&j| d.at(i, j).phase == Phase::Normal).map(|j| tau_grid[j]);
            match reduced_critical_temperature(r) {
                Ok(tc) if tc <= 3.0 => {
                    let b = boundary.expect("boundary inside grid");
                    assert!((b - tc).abs() <= dtau, "r = {r}: boundary {b}, tc {tc}");
                }
                Ok(_) => {}
                Err(_) => assert_eq!(boundary, Some(0.0)),
            }
        }
    }

    proptest! {
        #[test]
        fn scale_invariance(r in 0.0f64..20.0, tau in 0.0f64..5.0, k in -20i32..20) {
            let c = consts();
            let s = spec();
            let rc = critical_density(&s, &c).unwrap();
            let base = classify_phase(r * rc, tau * s.eps_gap / c.k_b, &s, &c).unwrap().phase;
            // rescale gap by 2^k and dipole by 2^(k/2 rounded) consistently
            let f = 2f64.powi(k);
            let scaled_spec = QuasiParticleSpec { eps_gap: s.eps_gap * f * f, d10: [s.d10[0] * f, 0.0, 0.0], ..s };
            let rc2 = critical_density(&scaled_spec, &c).unwrap();
            let again = classify_phase(r * rc2, tau * scaled_spec.eps_gap / c.k_b, &scaled_spec, &c).unwrap().phase;
            prop_assert_eq!(base, again);
        }
    }
}
