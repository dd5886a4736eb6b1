//! Physical constants, energy-spin operators and the two-level rotor model of
//! a water molecule.
//!
//! All values are SI. The rotor lives in the four-dimensional space spanned by
//! `|1,1⟩, |1,0⟩, |1,-1⟩, |0,0⟩`; dynamics are truncated to the two-level space
//! `(|e⟩, |g⟩) = (|1,1⟩, |0,0⟩)`.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Vec3;

/// SI constants plus the water rotational gap and the neural decoherence time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Vacuum permeability, H/m.
    pub mu0: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Gap between the two lowest rotational levels of water, J.
    pub eps_w: f64,
    /// Decoherence time of a spatial superposition of firing/resting states, s.
    /// Stored, never derived.
    pub t_dec: f64,
}

/// Wavenumber of the water rotational gap, `eps_w / (hbar c)`, in m⁻¹ (160 cm⁻¹).
pub const WATER_GAP_WAVENUMBER: f64 = 1.6e4;

impl Default for PhysicalConstants {
    fn default() -> Self {
        let hbar = 1.054_571_817e-34;
        let c = 299_792_458.0;
        Self {
            hbar,
            k_b: 1.380_649e-23,
            eps0: 8.854_187_812_8e-12,
            mu0: 1.256_637_062_12e-6,
            c,
            eps_w: WATER_GAP_WAVENUMBER * hbar * c,
            t_dec: 1e-20,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hbar", self.hbar),
            ("k_b", self.k_b),
            ("eps0", self.eps0),
            ("mu0", self.mu0),
            ("c", self.c),
            ("eps_w", self.eps_w),
            ("t_dec", self.t_dec),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!(
                    "constant `{name}` must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// `eps_w / (hbar c)` in m⁻¹.
    pub fn water_gap_wavenumber(&self) -> f64 {
        self.eps_w / (self.hbar * self.c)
    }
}

/// The three energy-spin matrices in the `(|e⟩, |g⟩)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMatrices {
    pub s1: Matrix2<Complex64>,
    pub s2: Matrix2<Complex64>,
    pub s3: Matrix2<Complex64>,
}

impl SpinMatrices {
    pub fn component(&self, a: usize) -> &Matrix2<Complex64> {
        match a {
            0 => &self.s1,
            1 => &self.s2,
            2 => &self.s3,
            _ => panic!("spin component index {a} out of range"),
        }
    }
}

/// `s¹ = ½(|e⟩⟨g| + |g⟩⟨e|)`, `s² = (1/2i)(|e⟩⟨g| − |g⟩⟨e|)`, `s³ = ½(|e⟩⟨e| − |g⟩⟨g|)`.
pub fn energy_spin_matrices() -> SpinMatrices {
    let z = Complex64::new(0.0, 0.0);
    let h = Complex64::new(0.5, 0.0);
    let ih = Complex64::new(0.0, 0.5);
    SpinMatrices {
        s1: Matrix2::new(z, h, h, z),
        // 1/(2i) = -i/2 on |e⟩⟨g|, +i/2 on |g⟩⟨e|
        s2: Matrix2::new(z, -ih, ih, z),
        s3: Matrix2::new(h, z, z, -h),
    }
}

/// Resonant photon wavelength `l_c = 2π ħ c / ε`.
pub fn coherence_length(consts: &PhysicalConstants) -> Result<f64> {
    coherence_length_for_gap(consts.eps_w, consts)
}

/// Same as [`coherence_length`] for an arbitrary transition gap.
pub fn coherence_length_for_gap(gap: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::domain(format!("energy gap must be positive, got {gap}")));
    }
    Ok(2.0 * std::f64::consts::PI * consts.hbar * consts.c / gap)
}

/// Semi-classical rotor: dipole constant and a classical radiation vector potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorModel {
    /// Dipole constant d̃₀, C·m.
    pub d_tilde0: f64,
    /// Classical radiation vector potential of the resonant mode, V·s/m.
    pub a_ext: Vec3,
}

impl RotorModel {
    /// Free Hamiltonian `(ε_w/2) I₃,₁` over `|1,1⟩, |1,0⟩, |1,-1⟩, |0,0⟩`.
    pub fn h_free(&self, consts: &PhysicalConstants) -> Matrix4<f64> {
        let h = 0.5 * consts.eps_w;
        Matrix4::from_diagonal(&nalgebra::Vector4::new(h, h, h, -h))
    }

    /// Truncated dipole operator `(-d̃₀ s¹, -d̃₀ s², 0)`.
    pub fn d_tr(&self) -> [Matrix2<Complex64>; 3] {
        let s = energy_spin_matrices();
        let d = Complex64::new(-self.d_tilde0, 0.0);
        [s.s1 * d, s.s2 * d, Matrix2::zeros()]
    }

    /// Time derivative of the truncated dipole, `(i/ħ)[ε_w s³, d_tr]`.
    ///
    /// Restricted to the two-level space the free Hamiltonian acts as `ε_w s³`
    /// up to a constant, since `[I₃,₁/2, sᵃ] = [s³, sᵃ]`.
    pub fn d_tr_dot(&self, consts: &PhysicalConstants) -> [Matrix2<Complex64>; 3] {
        let s3 = energy_spin_matrices().s3 * Complex64::new(consts.eps_w, 0.0);
        let pref = Complex64::new(0.0, 1.0 / consts.hbar);
        self.d_tr().map(|d| (s3 * d - d * s3) * pref)
    }
}

/// Returns `(H_free, H_int)` with `H_int = -A · ḋ_tr`.
pub fn rotor_hamiltonians(
    model: &RotorModel,
    consts: &PhysicalConstants,
) -> (Matrix4<f64>, Matrix2<Complex64>) {
    let d_dot = model.d_tr_dot(consts);
    let mut h_int = Matrix2::zeros();
    for (a, d) in model.a_ext.iter().zip(d_dot.iter()) {
        h_int -= d * Complex64::new(*a, 0.0);
    }
    (model.h_free(consts), h_int)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix2<Complex64> {
        a * b - b * a
    }

    fn max_abs(m: &Matrix2<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn s3_eigenvalue_on_excited_state() {
        let s = energy_spin_matrices();
        let e = nalgebra::Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let out = s.s3 * e;
        assert_eq!(out[0], Complex64::new(0.5, 0.0));
        assert_eq!(out[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn su2_closure_is_exact_for_cyclic_triples() {
        let s = energy_spin_matrices();
        let i = Complex64::new(0.0, 1.0);
        for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let lhs = commutator(s.component(a), s.component(b));
            let rhs = s.component(c) * i;
            assert_eq!(lhs, rhs, "[s{},s{}]", a + 1, b + 1);
        }
    }

    #[test]
    fn casimir_is_three_quarters() {
        // direct 2x2 arithmetic oracle
        let s = energy_spin_matrices();
        let c = s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3;
        let expected = Matrix2::identity() * Complex64::new(0.75, 0.0);
        assert!(max_abs(&(c - expected)) == 0.0);
    }

    #[test]
    fn spin_matrices_hermitian_traceless() {
        let s = energy_spin_matrices();
        for a in 0..3 {
            let m = s.component(a);
            assert_eq!(*m, m.adjoint());
            assert_eq!(m.trace(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn default_constants_match_water_gap() {
        let c = PhysicalConstants::default();
        c.validate().unwrap();
        let k = c.water_gap_wavenumber();
        assert!((k / 1.6e4 - 1.0).abs() < 0.01);
        assert_eq!(c.t_dec, 1e-20);
    }

    #[test]
    fn coherence_length_near_400_micron() {
        let c = PhysicalConstants::default();
        let lc = coherence_length(&c).unwrap();
        assert!((lc - 3.927e-4).abs() / 3.927e-4 < 1e-3, "{lc}");
        let doubled = PhysicalConstants { eps_w: 2.0 * c.eps_w, ..c };
        assert!((coherence_length(&doubled).unwrap() - lc / 2.0).abs() < 1e-18);
        let electronic = coherence_length_for_gap(100.0 * c.eps_w, &c).unwrap();
        assert!((electronic - 3.927e-6).abs() / 3.927e-6 < 1e-3);
        assert!(coherence_length_for_gap(0.0, &c).is_err());
        assert!(coherence_length_for_gap(-1.0, &c).is_err());
    }

    #[test]
    fn coherence_length_strictly_decreasing() {
        let c = PhysicalConstants::default();
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let lc = coherence_length_for_gap(c.eps_w * k as f64 * 0.3, &c).unwrap();
            assert!(lc < prev);
            prev = lc;
        }
    }

    #[test]
    fn h_free_multiplicities() {
        let c = PhysicalConstants::default();
        let model = RotorModel { d_tilde0: 1e-30, a_ext: [0.0; 3] };
        let (h_free, h_int) = rotor_hamiltonians(&model, &c);
        let diag = h_free.diagonal();
        let up = diag.iter().filter(|&&x| x == 0.5 * c.eps_w).count();
        let down = diag.iter().filter(|&&x| x == -0.5 * c.eps_w).count();
        assert_eq!((up, down), (3, 1));
        assert_eq!(h_free, nalgebra::Matrix4::from_diagonal(&diag));
        assert_eq!(h_int, Matrix2::zeros());
    }

    #[test]
    fn dipole_derivative_matches_commutator_oracle() {
        let c = PhysicalConstants::default();
        let d0 = 6.2e-30;
        let model = RotorModel { d_tilde0: d0, a_ext: [1.0, 0.0, 0.0] };
        let d_dot = model.d_tr_dot(&c);
        let s = energy_spin_matrices();
        let expected1 = s.s2 * Complex64::new(d0 * c.eps_w / c.hbar, 0.0);
        let expected2 = s.s1 * Complex64::new(-d0 * c.eps_w / c.hbar, 0.0);
        let scale = d0 * c.eps_w / c.hbar;
        assert!(max_abs(&(d_dot[0] - expected1)) < 1e-14 * scale);
        assert!(max_abs(&(d_dot[1] - expected2)) < 1e-14 * scale);
        assert_eq!(d_dot[2], Matrix2::zeros());
    }

    #[test]
    fn d_tr_components() {
        let model = RotorModel { d_tilde0: 2.0, a_ext: [0.0; 3] };
        let s = energy_spin_matrices();
        let d = model.d_tr();
        assert_eq!(d[0], s.s1 * Complex64::new(-2.0, 0.0));
        assert_eq!(d[1], s.s2 * Complex64::new(-2.0, 0.0));
        assert_eq!(d[2], Matrix2::zeros());
    }

    #[test]
    fn h_int_hermitian_for_real_fields() {
        let c = PhysicalConstants::default();
        for a in [[1.0, -2.0, 0.5], [0.0, 3.0, -7.0], [1e-13, 2e-13, 0.0]] {
            let model = RotorModel { d_tilde0: 3.3e-30, a_ext: a };
            let (_, h_int) = rotor_hamiltonians(&model, &c);
            let scale = max_abs(&h_int).max(f64::MIN_POSITIVE);
            assert!(max_abs(&(h_int - h_int.adjoint())) <= 1e-15 * scale);
        }
    }
}
