//! Mean-field dynamics of photon modes resonantly coupled to two-level elements.
//!
//! The Heisenberg equations of the spin–boson Hamiltonian
//! `H = H_em + H_el + H_int` are closed by replacing every operator product by
//! the product of expectation values. The resulting classical system is
//! Hamiltonian: the energy [`hamiltonian`] and every spin length are conserved,
//! and the flow commutes with the global U(1) rotation [`u1_transform`].
//!
//! Internally time is measured in units of `1/Ω` and couplings in units of
//! `Ω`; `q`, `p` and the spins are already dimensionless. SI enters only
//! through [`ModeSet`] construction, [`hamiltonian`] and [`field_profile`].
//!
//! Modes are stored as a list closed under `k → -k`. Reality of the field
//! requires `q_{-k} = conj(q_k)` and `p_{-k} = conj(p_k)`; each `±k` pair
//! contributes complex-conjugate terms to the spin equations, so the spin
//! derivatives are real up to rounding and only their real part is kept.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::numeric::{dot, norm, Vec3};

/// One photon mode: wavevector (m⁻¹) and real unit polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: Vec3,
    pub pol: Vec3,
}

/// Resonant modes `S_Ω` with their couplings `λ_{k,i}` to each element.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
    /// Index of the `-k` partner of each mode.
    pub partner: Vec<usize>,
    /// Resonance angular frequency, rad/s.
    pub omega: f64,
    /// Quantization volume, m³.
    pub volume: f64,
    /// `λ_{k,i}` in s⁻¹, indexed `[mode][element]`.
    pub lambdas: Vec<Vec<f64>>,
}

impl ModeSet {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.lambdas.first().map_or(0, Vec::len)
    }

    /// Two-level gap `ħΩ`.
    pub fn eps_gap(&self, consts: &PhysicalConstants) -> f64 {
        consts.hbar * self.omega
    }
}

fn find_partner(modes: &[Mode], m: usize) -> Option<usize> {
    let k = modes[m].k;
    let scale = norm(&k);
    modes.iter().enumerate().find_map(|(j, other)| {
        let sum = [other.k[0] + k[0], other.k[1] + k[1], other.k[2] + k[2]];
        let pol_diff = [
            other.pol[0] - modes[m].pol[0],
            other.pol[1] - modes[m].pol[1],
            other.pol[2] - modes[m].pol[2],
        ];
        (j != m && norm(&sum) <= 1e-12 * scale && norm(&pol_diff) <= 1e-12).then_some(j)
    })
}

/// Builds the resonant mode set for identical elements with gap `eps_gap`
/// (so `Ω = eps_gap/ħ`) and per-element transition dipoles `d10`.
///
/// `λ_{k,i} = -sqrt(Ω/(ε₀ħV)) (ε_k · d₁₀,ᵢ)`. Every mode must satisfy
/// `|k| = Ω/c` to 1e-9 relative, be transverse, and have a `-k` partner with
/// the same polarization.
pub fn make_modes(
    eps_gap: f64,
    dipoles: &[Vec3],
    volume: f64,
    k_list: &[Mode],
    consts: &PhysicalConstants,
) -> Result<ModeSet> {
    if !(eps_gap > 0.0 && eps_gap.is_finite()) {
        return Err(Error::domain(format!("eps_gap must be positive, got {eps_gap}")));
    }
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::domain(format!("volume must be positive, got {volume}")));
    }
    if dipoles.is_empty() {
        return Err(Error::invalid("at least one element is required"));
    }
    if k_list.is_empty() {
        return Err(Error::invalid("at least one ±k mode pair is required"));
    }
    let omega = eps_gap / consts.hbar;
    let k_res = omega / consts.c;
    for (m, mode) in k_list.iter().enumerate() {
        let kn = norm(&mode.k);
        if ((kn - k_res) / k_res).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "mode {m} is off resonance: |k| = {kn}, expected Omega/c = {k_res}"
            )));
        }
        if (norm(&mode.pol) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mode {m} polarization is not a unit vector")));
        }
        if dot(&mode.k, &mode.pol).abs() > 1e-9 * kn {
            return Err(Error::invalid(format!("mode {m} polarization is not transverse")));
        }
    }
    let mut partner = Vec::with_capacity(k_list.len());
    for m in 0..k_list.len() {
        match find_partner(k_list, m) {
            Some(j) => partner.push(j),
            None => {
                return Err(Error::invalid(format!(
                    "mode {m} has no -k partner with equal polarization"
                )))
            }
        }
    }
    for (m, &j) in partner.iter().enumerate() {
        if partner[j] != m {
            return Err(Error::invalid(format!("mode {m} pairing is ambiguous (duplicate modes?)")));
        }
    }
    let pref = -(omega / (consts.eps0 * consts.hbar * volume)).sqrt();
    let lambdas = k_list
        .iter()
        .map(|mode| dipoles.iter().map(|d| pref * dot(&mode.pol, d)).collect())
        .collect();
    Ok(ModeSet { modes: k_list.to_vec(), partner, omega, volume, lambdas })
}

/// A single `±k` pair along `axis` with the given polarization, on resonance.
pub fn resonant_pair(eps_gap: f64, axis: Vec3, pol: Vec3, consts: &PhysicalConstants) -> [Mode; 2] {
    let k = eps_gap / (consts.hbar * consts.c);
    let n = norm(&axis);
    let kv = [axis[0] / n * k, axis[1] / n * k, axis[2] / n * k];
    [Mode { k: kv, pol }, Mode { k: [-kv[0], -kv[1], -kv[2]], pol }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    /// `⟨q_k⟩` per mode.
    pub q: Vec<Complex64>,
    /// `⟨p_k⟩` per mode.
    pub p: Vec<Complex64>,
    /// `(s¹, s², s³)` per element.
    pub spins: Vec<Vec3>,
    /// Element positions, m.
    pub positions: Vec<Vec3>,
    /// Time, s.
    pub time: f64,
}

impl MeanFieldState {
    /// Field vacuum with every element in its ground state `s = (0, 0, -1/2)`.
    pub fn vacuum(modes: &ModeSet, positions: Vec<Vec3>) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            q: vec![zero; modes.n_modes()],
            p: vec![zero; modes.n_modes()],
            spins: vec![[0.0, 0.0, -0.5]; positions.len()],
            positions,
            time: 0.0,
        }
    }

    pub fn check_consistent(&self, modes: &ModeSet) -> Result<()> {
        if self.q.len() != modes.n_modes() || self.p.len() != modes.n_modes() {
            return Err(Error::invalid(format!(
                "state carries {} / {} mode amplitudes, mode set has {}",
                self.q.len(),
                self.p.len(),
                modes.n_modes()
            )));
        }
        if self.spins.len() != modes.n_elements() || self.positions.len() != modes.n_elements() {
            return Err(Error::invalid(format!(
                "state carries {} spins and {} positions, mode set couples {} elements",
                self.spins.len(),
                self.positions.len(),
                modes.n_elements()
            )));
        }
        for (i, s) in self.spins.iter().enumerate() {
            if norm(s) > 0.5 + 1e-9 {
                return Err(Error::invalid(format!("spin {i} has length {} > 1/2", norm(s))));
            }
        }
        Ok(())
    }

    /// Largest violation of `q_{-k} = conj(q_k)`, `p_{-k} = conj(p_k)`.
    pub fn reality_defect(&self, modes: &ModeSet) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, &j) in modes.partner.iter().enumerate() {
            worst = worst.max((self.q[j] - self.q[m].conj()).norm());
            worst = worst.max((self.p[j] - self.p[m].conj()).norm());
        }
        worst
    }

    /// Replaces each pair by its nearest reality-respecting value.
    pub fn symmetrize(&mut self, modes: &ModeSet) {
        for (m, &j) in modes.partner.iter().enumerate() {
            if m < j {
                let q = 0.5 * (self.q[m] + self.q[j].conj());
                let p = 0.5 * (self.p[m] + self.p[j].conj());
                self.q[m] = q;
                self.q[j] = q.conj();
                self.p[m] = p;
                self.p[j] = p.conj();
            }
        }
    }

    pub fn spin_norms(&self) -> Vec<f64> {
        self.spins.iter().map(norm).collect()
    }
}

/// Time derivative of a [`MeanFieldState`] per unit of dimensionless time `Ωt`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dq: Vec<Complex64>,
    pub dp: Vec<Complex64>,
    pub dspins: Vec<Vec3>,
}

impl StateDerivative {
    pub fn max_abs(&self) -> f64 {
        let a = self.dq.iter().chain(self.dp.iter()).map(|z| z.norm());
        let b = self.dspins.iter().flat_map(|s| s.iter().map(|x| x.abs()));
        a.chain(b).fold(0.0, f64::max)
    }
}

/// Couplings `λ/Ω` and phases `e^{-ik·xᵢ}` for a fixed geometry.
struct Kernel {
    lam: Vec<Vec<f64>>,
    phase: Vec<Vec<Complex64>>,
    partner: Vec<usize>,
}

impl Kernel {
    fn new(modes: &ModeSet, positions: &[Vec3]) -> Self {
        let lam = modes
            .lambdas
            .iter()
            .map(|row| row.iter().map(|l| l / modes.omega).collect())
            .collect();
        let phase = modes
            .modes
            .iter()
            .map(|mode| {
                positions.iter().map(|x| Complex64::from_polar(1.0, -dot(&mode.k, x))).collect()
            })
            .collect();
        Self { lam, phase, partner: modes.partner.clone() }
    }

    /// `Σᵢ λ_{k,i} fᵢ e^{-ik·xᵢ}` for mode `m`.
    fn mode_sum(&self, m: usize, f: impl Fn(usize) -> f64) -> Complex64 {
        self.lam[m]
            .iter()
            .zip(&self.phase[m])
            .enumerate()
            .map(|(i, (l, ph))| ph * (l * f(i)))
            .sum()
    }

    fn rhs(&self, q: &[Complex64], p: &[Complex64], spins: &[Vec3]) -> StateDerivative {
        let n_modes = q.len();
        let mut dq = Vec::with_capacity(n_modes);
        let mut dp = Vec::with_capacity(n_modes);
        for m in 0..n_modes {
            let j = self.partner[m];
            // dq_k = p_{-k} - Σ λ s¹ e^{-ikx}
            dq.push(p[j] - self.mode_sum(m, |i| spins[i][0]));
            // dp_k = -q_{-k} + Σ λ_{-k} s² e^{+ikx}
            dp.push(-q[j] + self.mode_sum(j, |i| spins[i][1]));
        }
        let dspins = spins
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut a = Complex64::new(0.0, 0.0);
                let mut b = Complex64::new(0.0, 0.0);
                for m in 0..n_modes {
                    let w = self.phase[m][i] * self.lam[m][i];
                    a += w * q[self.partner[m]];
                    b += w * p[m];
                }
                let (a, b) = (a.re, b.re);
                [-s[1] - a * s[2], s[0] + b * s[2], a * s[0] - b * s[1]]
            })
            .collect();
        StateDerivative { dq, dp, dspins }
    }

    /// Energy in units of `ħΩ`.
    fn energy(&self, q: &[Complex64], p: &[Complex64], spins: &[Vec3]) -> f64 {
        let mut field = 0.0;
        let mut coupling = 0.0;
        for m in 0..q.len() {
            let j = self.partner[m];
            field += 0.5 * (p[j] * p[m] + q[m] * q[j]).re;
            coupling += self
                .lam[m]
                .iter()
                .zip(&self.phase[m])
                .zip(spins)
                .map(|((l, ph), s)| (ph * (q[j] * s[1] + p[m] * s[0]) * *l).re)
                .sum::<f64>();
        }
        let free: f64 = spins.iter().map(|s| s[2]).sum();
        field + free - coupling
    }
}

/// Mean-field equations of motion, per unit of `Ωt`.
pub fn eom_rhs(state: &MeanFieldState, modes: &ModeSet) -> Result<StateDerivative> {
    state.check_consistent(modes)?;
    let kernel = Kernel::new(modes, &state.positions);
    Ok(kernel.rhs(&state.q, &state.p, &state.spins))
}

/// Total energy in J:
/// `(ħΩ/2)Σ(p_{-k}p_k + q_k q_{-k}) + ε Σ s³ − ħ Σ λ (q_{-k}s² + p_k s¹) e^{-ik·x}` with `ε = ħΩ`.
pub fn hamiltonian(state: &MeanFieldState, modes: &ModeSet, consts: &PhysicalConstants) -> Result<f64> {
    state.check_consistent(modes)?;
    let kernel = Kernel::new(modes, &state.positions);
    Ok(modes.eps_gap(consts) * kernel.energy(&state.q, &state.p, &state.spins))
}

/// Global U(1) rotation by `theta`.
pub fn u1_transform(state: &MeanFieldState, modes: &ModeSet, theta: f64) -> MeanFieldState {
    let (sn, cs) = theta.sin_cos();
    let mut out = state.clone();
    for (m, &j) in modes.partner.iter().enumerate() {
        // (q_k, p_{-k}) rotate together
        out.q[m] = state.q[m] * cs - state.p[j] * sn;
        out.p[j] = state.q[m] * sn + state.p[j] * cs;
    }
    for (s_out, s) in out.spins.iter_mut().zip(&state.spins) {
        s_out[0] = s[0] * cs + s[1] * sn;
        s_out[1] = -s[0] * sn + s[1] * cs;
    }
    out
}

/// Largest `dt·Ω` accepted by [`integrate`].
pub const MAX_STEP_OMEGA: f64 = 0.1;

/// Fixed-step RK4 trajectory of `steps` steps, including the initial state.
///
/// `dt` is in seconds and must satisfy `dt·Ω < 0.1`. The `±k` reality
/// constraint is re-imposed after every step.
pub fn integrate(
    state: &MeanFieldState,
    modes: &ModeSet,
    dt: f64,
    steps: usize,
) -> Result<Vec<MeanFieldState>> {
    let mut out = Vec::with_capacity(steps + 1);
    integrate_with(state, modes, dt, steps, |s| out.push(s.clone()))?;
    Ok(out)
}

/// Same as [`integrate`], handing each state (initial one included) to `visit`
/// instead of collecting them.
pub fn integrate_with(
    state: &MeanFieldState,
    modes: &ModeSet,
    dt: f64,
    steps: usize,
    mut visit: impl FnMut(&MeanFieldState),
) -> Result<()> {
    state.check_consistent(modes)?;
    let h = dt * modes.omega;
    if !(h > 0.0 && h < MAX_STEP_OMEGA) {
        return Err(Error::domain(format!(
            "resolution guard: dt*Omega = {h:.3e} must lie in (0, {MAX_STEP_OMEGA}); try dt = {:.6e} s",
            0.01 / modes.omega
        )));
    }
    let kernel = Kernel::new(modes, &state.positions);
    let mut cur = state.clone();
    visit(&cur);
    for n in 1..=steps {
        rk4_step(&kernel, &mut cur, h);
        cur.symmetrize(modes);
        cur.time = state.time + n as f64 * dt;
        if !cur.q.iter().chain(cur.p.iter()).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::numerical(format!("non-finite mode amplitude at step {n}")));
        }
        visit(&cur);
    }
    Ok(())
}

fn rk4_step(kernel: &Kernel, s: &mut MeanFieldState, h: f64) {
    fn shifted(
        base: &MeanFieldState,
        d: &StateDerivative,
        h: f64,
    ) -> (Vec<Complex64>, Vec<Complex64>, Vec<Vec3>) {
        let q = base.q.iter().zip(&d.dq).map(|(x, dx)| x + dx * h).collect();
        let p = base.p.iter().zip(&d.dp).map(|(x, dx)| x + dx * h).collect();
        let spins = base
            .spins
            .iter()
            .zip(&d.dspins)
            .map(|(x, dx)| [x[0] + h * dx[0], x[1] + h * dx[1], x[2] + h * dx[2]])
            .collect();
        (q, p, spins)
    }

    let k1 = kernel.rhs(&s.q, &s.p, &s.spins);
    let (q2, p2, s2) = shifted(s, &k1, 0.5 * h);
    let k2 = kernel.rhs(&q2, &p2, &s2);
    let (q3, p3, s3) = shifted(s, &k2, 0.5 * h);
    let k3 = kernel.rhs(&q3, &p3, &s3);
    let (q4, p4, s4) = shifted(s, &k3, h);
    let k4 = kernel.rhs(&q4, &p4, &s4);

    let w = h / 6.0;
    for m in 0..s.q.len() {
        s.q[m] += (k1.dq[m] + k2.dq[m] * 2.0 + k3.dq[m] * 2.0 + k4.dq[m]) * w;
        s.p[m] += (k1.dp[m] + k2.dp[m] * 2.0 + k3.dp[m] * 2.0 + k4.dp[m]) * w;
    }
    for i in 0..s.spins.len() {
        for a in 0..3 {
            s.spins[i][a] += w
                * (k1.dspins[i][a] + 2.0 * k2.dspins[i][a] + 2.0 * k3.dspins[i][a] + k4.dspins[i][a]);
        }
    }
}

/// Constants `v` and `θ₀` of the spontaneously broken stationary solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VevAnsatz {
    pub v_amp: f64,
    pub theta0: f64,
}

impl VevAnsatz {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_amp >= 0.0 && self.v_amp.is_finite()) {
            return Err(Error::domain(format!("v must be non-negative, got {}", self.v_amp)));
        }
        if !(0.0..std::f64::consts::TAU).contains(&self.theta0) {
            return Err(Error::domain(format!("theta0 must lie in [0, 2pi), got {}", self.theta0)));
        }
        Ok(())
    }
}

/// Time-independent solution of the mean-field equations:
///
/// `⟨q_k⟩ = (v sinθ₀/Ω) Σᵢ λ_{k,i} e^{-ik·xᵢ}`, `⟨p_{-k}⟩ = (v cosθ₀/Ω) Σᵢ λ_{k,i} e^{-ik·xᵢ}`,
/// `s¹ = v cosθ₀`, `s² = v sinθ₀`, `s³ᵢ = -Ω² / Σ_k λ_{k,i} Σⱼ λ_{k,j} e^{-ik·(xᵢ-xⱼ)}`.
///
/// Rejects geometries with a vanishing denominator and ansätze whose spins
/// would be longer than 1/2.
pub fn stationary_state(
    ansatz: &VevAnsatz,
    modes: &ModeSet,
    positions: &[Vec3],
) -> Result<MeanFieldState> {
    ansatz.validate()?;
    if positions.len() != modes.n_elements() {
        return Err(Error::invalid(format!(
            "{} positions given for {} elements",
            positions.len(),
            modes.n_elements()
        )));
    }
    let kernel = Kernel::new(modes, positions);
    let sums: Vec<Complex64> = (0..modes.n_modes()).map(|m| kernel.mode_sum(m, |_| 1.0)).collect();
    let (sn, cs) = ansatz.theta0.sin_cos();
    let v = ansatz.v_amp;

    let zero = Complex64::new(0.0, 0.0);
    let mut q = vec![zero; modes.n_modes()];
    let mut p = vec![zero; modes.n_modes()];
    for (m, &j) in modes.partner.iter().enumerate() {
        q[m] = sums[m] * (v * sn);
        p[j] = sums[m] * (v * cs);
    }

    let mut spins = Vec::with_capacity(positions.len());
    for i in 0..positions.len() {
        // Σ_k λ_{k,i} e^{-ik·xᵢ} Σ_j λ_{k,j} e^{+ik·xⱼ}
        let denom: f64 = (0..modes.n_modes())
            .map(|m| (kernel.phase[m][i] * kernel.lam[m][i] * sums[m].conj()).re)
            .sum();
        let scale: f64 = (0..modes.n_modes())
            .map(|m| kernel.lam[m][i].abs() * sums[m].norm())
            .sum();
        if !(denom.abs() > 1e-12 * scale) || denom == 0.0 {
            return Err(Error::invalid(format!(
                "degenerate geometry: coupling denominator vanishes for element {i}"
            )));
        }
        let s = [v * cs, v * sn, -1.0 / denom];
        if norm(&s) > 0.5 + 1e-9 {
            return Err(Error::domain(format!(
                "stationary spin {i} would have length {:.6} > 1/2 (|s3| = {:.6}); reduce v or strengthen coupling",
                norm(&s),
                s[2].abs()
            )));
        }
        spins.push(s);
    }
    Ok(MeanFieldState { q, p, spins, positions: positions.to_vec(), time: 0.0 })
}

/// Largest `v` for which every stationary spin has length exactly 1/2, if any.
pub fn saturating_amplitude(modes: &ModeSet, positions: &[Vec3]) -> Result<f64> {
    let probe = stationary_state(&VevAnsatz { v_amp: 0.0, theta0: 0.0 }, modes, positions)?;
    let worst = probe.spins.iter().map(|s| s[2].abs()).fold(0.0, f64::max);
    Ok((0.25 - worst * worst).max(0.0).sqrt())
}

/// Classical vector potential `A_c(x) = Σ_k sqrt(ħ/(ε₀ΩV)) ⟨q_k⟩ ε_k e^{ik·x}` (real part), V·s/m.
pub fn field_profile(
    state: &MeanFieldState,
    modes: &ModeSet,
    consts: &PhysicalConstants,
    points: &[Vec3],
) -> Result<Vec<Vec3>> {
    state.check_consistent(modes)?;
    let pref = (consts.hbar / (consts.eps0 * modes.omega * modes.volume)).sqrt();
    Ok(points
        .iter()
        .map(|x| {
            let mut a = [0.0; 3];
            for (mode, q) in modes.modes.iter().zip(&state.q) {
                let amp = (q * Complex64::from_polar(1.0, dot(&mode.k, x))).re * pref;
                for (ac, pc) in a.iter_mut().zip(&mode.pol) {
                    *ac += amp * pc;
                }
            }
            a
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    /// Dipole giving dimensionless coupling `lam_over_omega` in volume `volume`.
    fn dipole_for(lam_over_omega: f64, volume: f64, c: &PhysicalConstants) -> f64 {
        lam_over_omega * (c.eps0 * c.eps_w * volume).sqrt()
    }

    fn scene(n: usize, lam: f64) -> (ModeSet, Vec<Vec3>) {
        let c = consts();
        let lc = crate::constants::coherence_length(&c).unwrap();
        let volume = lc.powi(3);
        let d = dipole_for(lam, volume, &c);
        let dipoles = vec![[d, 0.0, 0.0]; n];
        let pair = resonant_pair(c.eps_w, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], &c);
        let modes = make_modes(c.eps_w, &dipoles, volume, &pair, &c).unwrap();
        let positions = (0..n).map(|i| [0.0, 0.0, 0.02 * lc * i as f64]).collect();
        (modes, positions)
    }

    fn random_state(modes: &ModeSet, positions: &[Vec3], rng: &mut ChaCha8Rng) -> MeanFieldState {
        let mut st = MeanFieldState::vacuum(modes, positions.to_vec());
        for m in 0..modes.n_modes() {
            st.q[m] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            st.p[m] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        st.symmetrize(modes);
        for s in st.spins.iter_mut() {
            let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = norm(&v);
            let len = rng.random_range(0.1..0.5);
            *s = [v[0] / n * len, v[1] / n * len, v[2] / n * len];
        }
        st
    }

    #[test]
    fn coupling_matches_formula() {
        let c = consts();
        let volume = 1e-10;
        let d = 6e-30;
        let pair = resonant_pair(c.eps_w, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], &c);
        let modes = make_modes(c.eps_w, &[[d, 0.0, 0.0]], volume, &pair, &c).unwrap();
        let omega = c.eps_w / c.hbar;
        let expected = -(omega / (c.eps0 * c.hbar * volume)).sqrt() * d;
        for m in 0..2 {
            assert!((modes.lambdas[m][0] - expected).abs() <= 1e-14 * expected.abs());
        }
        assert_eq!(modes.partner, vec![1, 0]);
    }

    #[test]
    fn orthogonal_dipole_decouples_and_equal_dipoles_share_columns() {
        let c = consts();
        let pair = resonant_pair(c.eps_w, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], &c);
        let modes =
            make_modes(c.eps_w, &[[0.0, 5e-30, 0.0], [3e-30, 0.0, 0.0], [3e-30, 0.0, 0.0]], 1e-10, &pair, &c)
                .unwrap();
        for m in 0..2 {
            assert_eq!(modes.lambdas[m][0], 0.0);
            assert_eq!(modes.lambdas[m][1], modes.lambdas[m][2]);
        }
    }

    #[test]
    fn make_modes_rejects_bad_mode_sets() {
        let c = consts();
        let pair = resonant_pair(c.eps_w, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], &c);
        let d = [[1e-30, 0.0, 0.0]];
        assert!(make_modes(c.eps_w, &d, 1e-10, &pair[..1], &c).is_err(), "unpaired");
        let off = [
            Mode { k: [0.0, 0.0, pair[0].k[2] * 1.01], pol: [1.0, 0.0, 0.0] },
            Mode { k: [0.0, 0.0, -pair[0].k[2] * 1.01], pol: [1.0, 0.0, 0.0] },
        ];
        assert!(make_modes(c.eps_w, &d, 1e-10, &off, &c).is_err(), "off resonance");
        let longitudinal = resonant_pair(c.eps_w, [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], &c);
        assert!(make_modes(c.eps_w, &d, 1e-10, &longitudinal, &c).is_err());
    }

    #[test]
    fn decoupled_limit_is_pure_precession() {
        let (mut modes, positions) = scene(2, 0.3);
        for row in modes.lambdas.iter_mut() {
            row.iter_mut().for_each(|l| *l = 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = random_state(&modes, &positions, &mut rng);
        let d = eom_rhs(&st, &modes).unwrap();
        for (s, ds) in st.spins.iter().zip(&d.dspins) {
            assert_eq!(*ds, [-s[1], s[0], 0.0]);
        }
    }

    #[test]
    fn spin_norm_derivative_vanishes() {
        let (modes, positions) = scene(4, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let st = random_state(&modes, &positions, &mut rng);
            let d = eom_rhs(&st, &modes).unwrap();
            for (s, ds) in st.spins.iter().zip(&d.dspins) {
                assert!(dot(s, ds).abs() < 1e-14, "{}", dot(s, ds));
            }
        }
    }

    #[test]
    fn precession_closes_after_one_period() {
        let (mut modes, _) = scene(1, 0.3);
        for row in modes.lambdas.iter_mut() {
            row[0] = 0.0;
        }
        let mut st = MeanFieldState::vacuum(&modes, vec![[0.0; 3]]);
        st.spins[0] = [0.5, 0.0, 0.0];
        let steps = 1000;
        let period = std::f64::consts::TAU / modes.omega;
        let traj = integrate(&st, &modes, period / steps as f64, steps).unwrap();
        let end = traj.last().unwrap();
        for a in 0..3 {
            assert!((end.spins[0][a] - st.spins[0][a]).abs() < 1e-8);
        }
    }

    #[test]
    fn resolution_guard() {
        let (modes, positions) = scene(1, 0.3);
        let st = MeanFieldState::vacuum(&modes, positions);
        let err = integrate(&st, &modes, 0.2 / modes.omega, 1).unwrap_err();
        assert!(err.to_string().contains("try dt"), "{err}");
    }

    #[test]
    fn vacuum_energy() {
        let c = consts();
        let (modes, positions) = scene(3, 0.3);
        let st = MeanFieldState::vacuum(&modes, positions);
        let e = hamiltonian(&st, &modes, &c).unwrap();
        let eps = modes.eps_gap(&c);
        assert!((e + 1.5 * eps).abs() < 1e-14 * eps);
    }

    #[test]
    fn decoupled_energy_is_free_sum() {
        let c = consts();
        let (mut modes, positions) = scene(2, 0.3);
        for row in modes.lambdas.iter_mut() {
            row.iter_mut().for_each(|l| *l = 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let st = random_state(&modes, &positions, &mut rng);
        let eps = modes.eps_gap(&c);
        let field: f64 = st.q.iter().chain(st.p.iter()).map(|z| z.norm_sqr()).sum::<f64>() * 0.5;
        let spins: f64 = st.spins.iter().map(|s| s[2]).sum();
        let e = hamiltonian(&st, &modes, &c).unwrap();
        assert!((e - eps * (field + spins)).abs() < 1e-13 * eps);
    }

    #[test]
    fn u1_identity_cases_and_energy_invariance() {
        let c = consts();
        let (modes, positions) = scene(3, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let st = random_state(&modes, &positions, &mut rng);
            assert_eq!(u1_transform(&st, &modes, 0.0), st);
            let full = u1_transform(&st, &modes, std::f64::consts::TAU);
            for (a, b) in full.q.iter().zip(&st.q) {
                assert!((a - b).norm() < 1e-12);
            }
            for (a, b) in full.spins.iter().zip(&st.spins) {
                assert!((0..3).all(|k| (a[k] - b[k]).abs() < 1e-12));
            }
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let rotated = u1_transform(&st, &modes, theta);
            let e0 = hamiltonian(&st, &modes, &c).unwrap();
            let e1 = hamiltonian(&rotated, &modes, &c).unwrap();
            let eps = modes.eps_gap(&c);
            assert!((e0 - e1).abs() < 1e-10 * eps.max(e0.abs()));
            assert!(rotated.reality_defect(&modes) < 1e-15);
        }
    }

    #[test]
    fn stationary_state_is_a_fixed_point() {
        let (modes, positions) = scene(5, 0.5);
        let v = saturating_amplitude(&modes, &positions).unwrap();
        assert!(v > 0.0);
        let st = stationary_state(&VevAnsatz { v_amp: v, theta0: 0.7 }, &modes, &positions).unwrap();
        let r = eom_rhs(&st, &modes).unwrap();
        assert!(r.max_abs() < 1e-12, "residual {}", r.max_abs());
        assert!(st.reality_defect(&modes) == 0.0);
        for s in &st.spins {
            assert!(norm(s) <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn unbroken_stationary_state() {
        let (modes, positions) = scene(3, 0.7);
        let st = stationary_state(&VevAnsatz { v_amp: 0.0, theta0: 1.0 }, &modes, &positions).unwrap();
        assert!(st.q.iter().chain(st.p.iter()).all(|z| z.norm() == 0.0));
        assert!(st.spins.iter().all(|s| s[0] == 0.0 && s[1] == 0.0 && s[2] < 0.0));
    }

    #[test]
    fn stationary_states_related_by_u1() {
        let (modes, positions) = scene(4, 0.6);
        let v = 0.9 * saturating_amplitude(&modes, &positions).unwrap();
        let a = stationary_state(&VevAnsatz { v_amp: v, theta0: 0.3 }, &modes, &positions).unwrap();
        let b = stationary_state(&VevAnsatz { v_amp: v, theta0: 1.9 }, &modes, &positions).unwrap();
        // s¹ → s¹cos + s²sin rotates the in-plane angle backwards
        let rotated = u1_transform(&b, &modes, 1.9 - 0.3);
        for m in 0..modes.n_modes() {
            assert!((rotated.q[m] - a.q[m]).norm() < 1e-12);
            assert!((rotated.p[m] - a.p[m]).norm() < 1e-12);
        }
        for (x, y) in rotated.spins.iter().zip(&a.spins) {
            assert!((0..3).all(|k| (x[k] - y[k]).abs() < 1e-12));
        }
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let c = consts();
        let pair = resonant_pair(c.eps_w, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], &c);
        let modes = make_modes(c.eps_w, &[[0.0, 1e-30, 0.0]], 1e-10, &pair, &c).unwrap();
        let err = stationary_state(&VevAnsatz { v_amp: 0.1, theta0: 0.0 }, &modes, &[[0.0; 3]]);
        assert!(err.is_err());
        // too long a spin
        let (modes, positions) = scene(2, 0.5);
        assert!(stationary_state(&VevAnsatz { v_amp: 0.6, theta0: 0.0 }, &modes, &positions).is_err());
    }

    #[test]
    fn field_profile_cases() {
        let c = consts();
        let (modes, positions) = scene(1, 0.3);
        let st = MeanFieldState::vacuum(&modes, positions.clone());
        let pts = [[0.0, 0.0, 0.0], [1e-5, 2e-5, 3e-5]];
        assert!(field_profile(&st, &modes, &c, &pts).unwrap().iter().all(|a| *a == [0.0; 3]));

        let mut st = st;
        st.q[0] = Complex64::from_polar(0.7, 0.4);
        st.q[1] = st.q[0].conj();
        let k = norm(&modes.modes[0].k);
        let pref = (c.hbar / (c.eps0 * modes.omega * modes.volume)).sqrt();
        let zs: Vec<Vec3> = (0..20).map(|i| [0.0, 0.0, i as f64 * 3e-5]).collect();
        let a = field_profile(&st, &modes, &c, &zs).unwrap();
        for (x, ai) in zs.iter().zip(&a) {
            // standing wave 2|q| cos(kz + φ) along the polarization
            let expected = 2.0 * 0.7 * pref * (k * x[2] + 0.4).cos();
            assert!((ai[0] - expected).abs() < 1e-12 * pref);
            assert_eq!(ai[1], 0.0);
        }
        let lambda = std::f64::consts::TAU / k;
        let shifted: Vec<Vec3> = zs.iter().map(|x| [x[0], x[1], x[2] + lambda]).collect();
        let b = field_profile(&st, &modes, &c, &shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((norm(x) - norm(y)).abs() < 1e-12 * pref);
        }
    }
}
