//! Sensory transduction and decoherence through a continuous superselection rule.
//!
//! A stimulus eigenvalue `𝒪` is turned into an energy input `𝓔_j(𝒪)` at each
//! receptor `j`. During the transduction window `δt` the averaged cation mass
//! concentration of the cell (the pointer coordinate `Q̄_j`) shifts by
//! `δQ̄_j = Λ 𝓔_j(𝒪) δt`. Interference between outcomes `m` and `n` is damped
//! by the characteristic function of the conjugate pointer momentum, evaluated
//! at `δ²Q̄_j/ħ` with `δ²Q̄_j = δQ̄_j(m) − δQ̄_j(n)`. The product of the inverse
//! damping factors over all cells is the degree of progress of decoherence.

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::density::{DensityMatrix, FactorMatrix};
use crate::error::{Error, Result};
use crate::grid::ScalarGrid;

/// Default value of the "much greater than one" decoherence threshold.
pub const DEFAULT_THRESHOLD: f64 = 1e3;

/// Potassium concentration of the endolymph, m⁻³ (10⁵ μm⁻³).
pub const ENDOLYMPH_CONCENTRATION: f64 = 1e23;
/// Cubic volume spanned by a hair-cell tip link, m³ (10⁻² μm³).
pub const TIP_LINK_VOLUME: f64 = 1e-20;

/// Diffusion constant of small ions in water, m²/s.
pub const ION_DIFFUSION: f64 = 1.3e-9;

/// Time to diffuse a distance `x` in three dimensions, `x²/(6D)`.
pub fn diffusion_time(x: f64, d: f64) -> Result<f64> {
    check_diffusion(d)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("distance must be non-negative, got {x}")));
    }
    Ok(x * x / (6.0 * d))
}

/// Distance covered in time `t`, `sqrt(6Dt)`.
pub fn diffusion_distance(t: f64, d: f64) -> Result<f64> {
    check_diffusion(d)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be non-negative, got {t}")));
    }
    Ok((6.0 * d * t).sqrt())
}

/// Prefactor `c_x = sqrt(6D)` of `x_t = c_x sqrt(t)`, m·s^-1/2.
pub fn diffusion_prefactor(d: f64) -> Result<f64> {
    check_diffusion(d)?;
    Ok((6.0 * d).sqrt())
}

fn check_diffusion(d: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("diffusion constant must be positive, got {d}")));
    }
    Ok(())
}

/// Number of ions drawn from an outer volume at the given concentration.
pub fn influx_count(concentration: f64, volume: f64) -> Result<f64> {
    if !(concentration >= 0.0 && volume >= 0.0) {
        return Err(Error::domain("concentration and volume must be non-negative"));
    }
    Ok(concentration * volume)
}

/// One layer of identical sensory cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensoryLayer {
    pub n_cells: usize,
    /// `Λ`, kg·m⁻³·J⁻¹·s⁻¹.
    pub lambda_gain: f64,
    /// Transduction window `δt`, s.
    pub dt_window: f64,
    /// Pointer-momentum uncertainty `ΔP₀`, J·s·m³/kg.
    #[serde(default)]
    pub dp0: Option<f64>,
    /// Pointer-coordinate uncertainty `ΔQ₀`, kg/m³.
    #[serde(default)]
    pub dq0: Option<f64>,
    /// Ion-count resolution `Δn₀` for the count form of the criterion.
    #[serde(default)]
    pub dn0: Option<f64>,
    /// Cell volume, m³.
    pub cell_volume: f64,
    /// Cation mass, kg.
    pub cation_mass: f64,
}

impl SensoryLayer {
    pub fn validate(&self, consts: &PhysicalConstants) -> Result<()> {
        if self.n_cells == 0 {
            return Err(Error::domain("a sensory layer needs at least one cell"));
        }
        let positive = [
            ("lambda_gain", Some(self.lambda_gain)),
            ("dt_window", Some(self.dt_window)),
            ("cell_volume", Some(self.cell_volume)),
            ("cation_mass", Some(self.cation_mass)),
            ("dp0", self.dp0),
            ("dq0", self.dq0),
            ("dn0", self.dn0),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::domain(format!("layer `{name}` must be positive, got {v}")));
                }
            }
        }
        if self.dp0.is_none() && self.dq0.is_none() {
            return Err(Error::domain("layer needs at least one of `dp0` and `dq0`"));
        }
        let product = self.pointer_momentum_width(consts) * self.pointer_coordinate_width(consts);
        // order-of-magnitude uncertainty check
        if product < 0.05 * consts.hbar {
            return Err(Error::domain(format!(
                "dp0*dq0 = {product:.3e} violates the uncertainty relation (hbar/2 = {:.3e})",
                0.5 * consts.hbar
            )));
        }
        Ok(())
    }

    /// `ΔP₀`, closed by `ΔQ₀ΔP₀ = ħ` when only `ΔQ₀` is given.
    pub fn pointer_momentum_width(&self, consts: &PhysicalConstants) -> f64 {
        self.dp0.unwrap_or_else(|| consts.hbar / self.dq0.unwrap_or(f64::NAN))
    }

    /// `ΔQ₀`, closed by `ΔQ₀ΔP₀ = ħ` when only `ΔP₀` is given.
    pub fn pointer_coordinate_width(&self, consts: &PhysicalConstants) -> f64 {
        self.dq0.unwrap_or_else(|| consts.hbar / self.dp0.unwrap_or(f64::NAN))
    }

    /// Converts a mass-concentration shift into an ion count, `δn = δQ̄ v/m`.
    pub fn count_from_concentration(&self, dq: f64) -> f64 {
        dq * self.cell_volume / self.cation_mass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensoryStack {
    pub layers: Vec<SensoryLayer>,
}

impl SensoryStack {
    pub fn validate(&self, consts: &PhysicalConstants) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::domain("sensory stack has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(consts).map_err(|e| Error::domain(format!("layer {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn total_cells(&self) -> usize {
        self.layers.iter().map(|l| l.n_cells).sum()
    }
}

/// Receptor response `𝓔_j(𝒪)`, J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyMap {
    /// `𝓔(𝒪) = slope·𝒪`.
    Linear { slope: f64 },
    /// Piecewise-linear interpolation through `(𝒪, 𝓔)` points sorted by `𝒪`,
    /// constant beyond the ends. Must pass through `(0, 0)`.
    Table { points: Vec<[f64; 2]> },
}

impl EnergyMap {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnergyMap::Linear { slope } => {
                if !slope.is_finite() {
                    return Err(Error::domain("energy map slope must be finite"));
                }
            }
            EnergyMap::Table { points } => {
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::domain("energy table entries must be finite"));
                }
                if points.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                    return Err(Error::domain("energy table stimulus values must be strictly ascending"));
                }
                if !points.iter().any(|p| p[0] == 0.0 && p[1] == 0.0) {
                    return Err(Error::domain("energy table must map zero stimulus to zero energy"));
                }
            }
        }
        Ok(())
    }

    pub fn energy(&self, o: f64) -> f64 {
        match self {
            EnergyMap::Linear { slope } => slope * o,
            EnergyMap::Table { points } => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if o <= first[0] {
                    return first[1];
                }
                if o >= last[0] {
                    return last[1];
                }
                let i = points.partition_point(|p| p[0] <= o);
                let (a, b) = (points[i - 1], points[i]);
                if o == a[0] {
                    return a[1];
                }
                a[1] + (b[1] - a[1]) * (o - a[0]) / (b[0] - a[0])
            }
        }
    }
}

/// External stimulus with eigenvalues `𝒪_n` and the receptors each one excites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stimulus {
    pub outcomes: Vec<f64>,
    /// One map per receptor, or a single map shared by every receptor.
    pub energy_maps: Vec<EnergyMap>,
    /// Active cell indices per outcome; absent means every cell transduces.
    #[serde(default)]
    pub active_cells: Option<Vec<Vec<usize>>>,
}

impl Stimulus {
    pub fn validate_for(&self, layer: &SensoryLayer) -> Result<()> {
        if self.outcomes.is_empty() {
            return Err(Error::domain("stimulus has no outcomes"));
        }
        if self.outcomes.iter().any(|o| !o.is_finite()) {
            return Err(Error::domain("stimulus outcomes must be finite"));
        }
        if self.energy_maps.len() != 1 && self.energy_maps.len() != layer.n_cells {
            return Err(Error::domain(format!(
                "{} energy maps for {} cells (give 1 or one per cell)",
                self.energy_maps.len(),
                layer.n_cells
            )));
        }
        for m in &self.energy_maps {
            m.validate()?;
        }
        if let Some(active) = &self.active_cells {
            if active.len() != self.outcomes.len() {
                return Err(Error::domain("one active-cell list per outcome is required"));
            }
            for (n, cells) in active.iter().enumerate() {
                if let Some(&bad) = cells.iter().find(|&&j| j >= layer.n_cells) {
                    return Err(Error::domain(format!(
                        "outcome {n} activates cell {bad}, layer has {} cells",
                        layer.n_cells
                    )));
                }
            }
        }
        Ok(())
    }

    fn map(&self, j: usize) -> &EnergyMap {
        if self.energy_maps.len() == 1 {
            &self.energy_maps[0]
        } else {
            &self.energy_maps[j]
        }
    }
}

/// Per-cell pointer shifts for one outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transduction {
    /// `δQ̄_j`, kg/m³.
    pub delta_q: Vec<f64>,
    /// `δn_j`, ion count.
    pub delta_n: Vec<f64>,
}

pub fn transduce(layer: &SensoryLayer, stim: &Stimulus, outcome: usize) -> Result<Transduction> {
    stim.validate_for(layer)?;
    let o = *stim.outcomes.get(outcome).ok_or_else(|| {
        Error::invalid(format!("unknown outcome {outcome} (stimulus has {})", stim.outcomes.len()))
    })?;
    let mut active = vec![stim.active_cells.is_none(); layer.n_cells];
    if let Some(cells) = &stim.active_cells {
        for &j in &cells[outcome] {
            active[j] = true;
        }
    }
    let delta_q: Vec<f64> = (0..layer.n_cells)
        .map(|j| if active[j] { layer.lambda_gain * stim.map(j).energy(o) * layer.dt_window } else { 0.0 })
        .collect();
    let delta_n = delta_q.iter().map(|&dq| layer.count_from_concentration(dq)).collect();
    Ok(Transduction { delta_q, delta_n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowShape {
    /// Uniform pointer-momentum distribution of half-width `ΔP`.
    #[default]
    Box,
    /// Normal distribution with standard deviation `ΔP`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerWindow {
    pub shape: WindowShape,
    pub width: f64,
}

impl PointerWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::domain(format!("pointer window width must be positive, got {}", self.width)));
        }
        Ok(())
    }
}

/// Characteristic function of the window at reduced argument `x`, which is
/// real for both shapes. `sin x / x` may be negative.
pub fn characteristic(x: f64, shape: WindowShape) -> f64 {
    match shape {
        WindowShape::Box => {
            if x == 0.0 {
                1.0
            } else {
                let s = x.sin();
                if s.abs() <= 2.0 * x.abs() * f64::EPSILON {
                    0.0
                } else {
                    s / x
                }
            }
        }
        WindowShape::Gaussian => (-0.5 * x * x).exp(),
    }
}

/// `|∫ e^{ixu} w(u) du|` for the normalized window `w`; lies in `[0, 1]`.
pub fn damping_from_x(x: f64, shape: WindowShape) -> f64 {
    characteristic(x, shape).abs().min(1.0)
}

/// `|∫ e^{i δ²Q̄ P/ħ} |φ(P)|² dP|` with `x = δ²Q̄·ΔP/ħ`.
pub fn damping_factor(delta2q: f64, window: &PointerWindow, consts: &PhysicalConstants) -> Result<f64> {
    window.validate()?;
    if !delta2q.is_finite() {
        return Err(Error::domain("delta^2 Q must be finite"));
    }
    Ok(damping_from_x(delta2q * window.width / consts.hbar, window.shape))
}

/// `log Π 1/factor`, infinite when any factor vanishes.
pub fn log_progress(factors: &[f64]) -> f64 {
    factors.iter().map(|f| -f.ln()).sum::<f64>().max(0.0)
}

/// Progress `Π |x|/|sin x|` (Box) or `Π e^{x²/2}` (Gaussian) at given arguments.
pub fn progress_from_x(xs: &[f64], shape: WindowShape) -> f64 {
    let factors: Vec<f64> = xs.iter().map(|&x| damping_from_x(x, shape)).collect();
    log_progress(&factors).exp()
}

/// Count form of the criterion, `x = δ²n/Δn₀` per cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountForm {
    pub factors: Vec<f64>,
    pub log_progress: f64,
    pub progress: Option<f64>,
    /// Ratio of count-form to mass-form log progress, absent when both vanish.
    pub log_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingReport {
    pub outcome_m: usize,
    pub outcome_n: usize,
    /// Damping factor per cell, layers concatenated in order.
    pub factors: Vec<f64>,
    /// Reduced arguments `x` per cell.
    pub arguments: Vec<f64>,
    /// Natural log of the progress; `+∞` when a factor vanishes.
    #[serde(serialize_with = "serialize_extended")]
    pub log_progress: f64,
    /// `Π 1/factor`; `None` when infinite or beyond `f64` range.
    pub progress: Option<f64>,
    pub infinite: bool,
    pub threshold: f64,
    pub satisfied: bool,
    /// Present when every layer defines `dn0`.
    pub count_form: Option<CountForm>,
}

fn serialize_extended<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    }
}

impl DampingReport {
    /// Combined factor `Π factor = 1/progress` applied to the off-diagonal pair.
    pub fn total_factor(&self) -> f64 {
        if self.infinite {
            0.0
        } else {
            (-self.log_progress).exp()
        }
    }
}

fn finite_progress(log_p: f64) -> Option<f64> {
    let p = log_p.exp();
    p.is_finite().then_some(p)
}

/// Decoherence criterion for the pair of outcomes `(m, n)` across all layers.
pub fn decoherence_progress(
    stack: &SensoryStack,
    stim: &Stimulus,
    outcome_m: usize,
    outcome_n: usize,
    shape: WindowShape,
    threshold: f64,
    consts: &PhysicalConstants,
) -> Result<DampingReport> {
    stack.validate(consts)?;
    if !(threshold >= 1.0) {
        return Err(Error::domain(format!("threshold must be at least 1, got {threshold}")));
    }
    let mut factors = Vec::with_capacity(stack.total_cells());
    let mut arguments = Vec::with_capacity(stack.total_cells());
    let mut count_factors = Vec::with_capacity(stack.total_cells());
    let count_available = stack.layers.iter().all(|l| l.dn0.is_some());
    for layer in &stack.layers {
        let tm = transduce(layer, stim, outcome_m)?;
        let tn = transduce(layer, stim, outcome_n)?;
        let window = PointerWindow { shape, width: layer.pointer_momentum_width(consts) };
        for j in 0..layer.n_cells {
            let d2q = tm.delta_q[j] - tn.delta_q[j];
            arguments.push(d2q * window.width / consts.hbar);
            factors.push(damping_factor(d2q, &window, consts)?);
            if let Some(dn0) = layer.dn0 {
                let d2n = tm.delta_n[j] - tn.delta_n[j];
                count_factors.push(damping_from_x(d2n / dn0, shape));
            }
        }
    }
    let log_p = log_progress(&factors);
    let infinite = log_p.is_infinite();
    let count_form = count_available.then(|| {
        let lp = log_progress(&count_factors);
        CountForm {
            progress: finite_progress(lp),
            log_ratio: (log_p > 0.0 && log_p.is_finite()).then(|| lp / log_p),
            log_progress: lp,
            factors: count_factors,
        }
    });
    Ok(DampingReport {
        outcome_m,
        outcome_n,
        factors,
        arguments,
        log_progress: log_p,
        progress: finite_progress(log_p),
        infinite,
        threshold,
        satisfied: log_p > threshold.ln(),
        count_form,
    })
}

/// Reports for every unordered outcome pair and the resulting factor table.
pub fn pair_factors(
    stack: &SensoryStack,
    stim: &Stimulus,
    shape: WindowShape,
    threshold: f64,
    consts: &PhysicalConstants,
) -> Result<(Vec<DampingReport>, FactorMatrix)> {
    let n = stim.outcomes.len();
    let mut table = FactorMatrix::identity(n);
    let mut reports = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for m in 0..n {
        for k in m + 1..n {
            let r = decoherence_progress(stack, stim, m, k, shape, threshold, consts)?;
            table.set(m, k, r.total_factor());
            reports.push(r);
        }
    }
    Ok((reports, table))
}

/// Multiplies each off-diagonal element `(m, n)` of a state over the outcome
/// basis by the combined damping factor of that pair.
pub fn apply_superselection(rho: &DensityMatrix, factors: &FactorMatrix) -> Result<DensityMatrix> {
    rho.validate()?;
    let out = rho.dephase(factors)?;
    out.validate()?;
    Ok(out)
}

/// Gradient along one axis: central differences inside, one-sided at the ends.
fn gradient(g: &ScalarGrid, axis: usize) -> Vec<f64> {
    let n = g.dims[axis];
    let h = g.spacing[axis];
    let mut out = vec![0.0; g.len()];
    if n < 2 {
        return out;
    }
    for ix in 0..g.dims[0] {
        for iy in 0..g.dims[1] {
            for iz in 0..g.dims[2] {
                let idx = [ix, iy, iz];
                let i = idx[axis];
                let at = |k: usize| {
                    let mut j = idx;
                    j[axis] = k;
                    g.get(j)
                };
                let d = if i == 0 {
                    (at(1) - at(0)) / h
                } else if i == n - 1 {
                    (at(n - 1) - at(n - 2)) / h
                } else {
                    (at(i + 1) - at(i - 1)) / (2.0 * h)
                };
                out[g.index(idx)] = d;
            }
        }
    }
    out
}

/// `∫ ½ Q |∇P|² d³x` by the midpoint rule on the cell-centred samples, J.
pub fn kinetic_energy(q_field: &ScalarGrid, p_field: &ScalarGrid) -> Result<f64> {
    q_field.validate()?;
    p_field.validate()?;
    if !q_field.same_shape(p_field) {
        return Err(Error::invalid("Q and P fields must share dims and spacing"));
    }
    let grads: Vec<Vec<f64>> = (0..3).map(|a| gradient(p_field, a)).collect();
    let dv = q_field.cell_volume();
    Ok((0..q_field.len())
        .map(|i| {
            let g2: f64 = grads.iter().map(|g| g[i] * g[i]).sum();
            0.5 * q_field.values[i] * g2 * dv
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::BasisLabel;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn layer(n: usize) -> SensoryLayer {
        let c = consts();
        SensoryLayer {
            n_cells: n,
            lambda_gain: 2.0,
            dt_window: 1e-3,
            dp0: Some(c.hbar),
            dq0: Some(1.0),
            dn0: None,
            cell_volume: 1e-15,
            cation_mass: 6.5e-26,
        }
    }

    fn linear_stim(outcomes: Vec<f64>) -> Stimulus {
        Stimulus { outcomes, energy_maps: vec![EnergyMap::Linear { slope: 1.0 }], active_cells: None }
    }

    /// Composite Simpson rule of `∫ cos(x u) w(u) du` over the window support.
    fn quadrature(x: f64, shape: WindowShape) -> f64 {
        let (a, b, w): (f64, f64, Box<dyn Fn(f64) -> f64>) = match shape {
            WindowShape::Box => (-1.0, 1.0, Box::new(|_| 0.5)),
            WindowShape::Gaussian => (
                -12.0,
                12.0,
                Box::new(|u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()),
            ),
        };
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |u: f64| (x * u).cos() * w(u);
        let mut s = f(a) + f(b);
        for i in 1..n {
            let u = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 * f(u) } else { 2.0 * f(u) };
        }
        (s * h / 3.0).abs()
    }

    #[test]
    fn diffusion_numbers() {
        let t = diffusion_time(0.5e-6, ION_DIFFUSION).unwrap();
        assert!((t - 3.2e-5).abs() / 3.2e-5 < 0.05, "{t}");
        let cx = diffusion_prefactor(ION_DIFFUSION).unwrap();
        assert!((cx - 88e-6).abs() / 88e-6 < 0.02, "{cx}");
        assert_eq!(diffusion_time(0.0, ION_DIFFUSION).unwrap(), 0.0);
        let x = diffusion_distance(t, ION_DIFFUSION).unwrap();
        assert!((x - 0.5e-6).abs() < 1e-18);
        assert!(diffusion_time(1.0, 0.0).is_err());
    }

    #[test]
    fn hair_cell_influx_floor() {
        let n = influx_count(ENDOLYMPH_CONCENTRATION, TIP_LINK_VOLUME).unwrap();
        assert!((n - 1e3).abs() < 1e-9);
    }

    #[test]
    fn transduction_cases() {
        let l = layer(4);
        let zero = transduce(&l, &linear_stim(vec![0.0, 1.0]), 0).unwrap();
        assert!(zero.delta_q.iter().all(|&q| q == 0.0));
        let base = transduce(&l, &linear_stim(vec![0.0, 1.0]), 1).unwrap();
        let doubled_gain = transduce(&SensoryLayer { lambda_gain: 4.0, ..l.clone() }, &linear_stim(vec![0.0, 1.0]), 1).unwrap();
        let doubled_dt = transduce(&SensoryLayer { dt_window: 2e-3, ..l.clone() }, &linear_stim(vec![0.0, 1.0]), 1).unwrap();
        for j in 0..4 {
            assert_eq!(doubled_gain.delta_q[j], 2.0 * base.delta_q[j]);
            assert_eq!(doubled_dt.delta_q[j], 2.0 * base.delta_q[j]);
            assert_eq!(base.delta_n[j], base.delta_q[j] * l.cell_volume / l.cation_mass);
        }
        assert!(transduce(&l, &linear_stim(vec![0.0, 1.0]), 2).is_err());
    }

    #[test]
    fn active_cells_and_tables() {
        let l = layer(3);
        let stim = Stimulus {
            outcomes: vec![0.0, 2.0],
            energy_maps: vec![EnergyMap::Table { points: vec![[0.0, 0.0], [1.0, 3.0], [4.0, 3.0]] }],
            active_cells: Some(vec![vec![], vec![0, 2]]),
        };
        let t = transduce(&l, &stim, 1).unwrap();
        assert_eq!(t.delta_q, vec![2.0 * 3.0 * 1e-3, 0.0, 2.0 * 3.0 * 1e-3]);
        let bad = Stimulus {
            energy_maps: vec![EnergyMap::Table { points: vec![[0.0, 1.0], [1.0, 3.0]] }],
            ..stim
        };
        assert!(transduce(&l, &bad, 1).is_err());
    }

    #[test]
    fn damping_special_values() {
        assert_eq!(damping_from_x(std::f64::consts::PI, WindowShape::Box), 0.0);
        assert_eq!(damping_from_x(0.0, WindowShape::Box), 1.0);
        assert!((damping_from_x(1e-9, WindowShape::Box) - 1.0).abs() < 1e-15);
        let g = damping_from_x(1.0, WindowShape::Gaussian);
        assert!((g - (-0.5f64).exp()).abs() < 1e-15);
        assert!((g - quadrature(1.0, WindowShape::Gaussian)).abs() < 1e-10);
    }

    #[test]
    fn box_matches_quadrature() {
        for i in 0..20 {
            let x = 0.37 + 0.91 * i as f64;
            let q = quadrature(x, WindowShape::Box);
            assert!((damping_from_x(x, WindowShape::Box) - q).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn hundred_cells_at_unit_argument() {
        let c = consts();
        let l = SensoryLayer { n_cells: 100, lambda_gain: 1.0, dt_window: 1.0, ..layer(100) };
        let stack = SensoryStack { layers: vec![l] };
        let r = decoherence_progress(&stack, &linear_stim(vec![0.0, 1.0]), 1, 0, WindowShape::Box, 1e3, &c)
            .unwrap();
        let oracle = (1.0 / 1f64.sin()).powi(100);
        let p = r.progress.unwrap();
        assert!((p - oracle).abs() / oracle < 1e-9);
        // 3.13e7, quoted to two significant figures
        assert_eq!((p / 1e6).round() / 10.0, 3.1);
        assert!(r.satisfied);
    }

    #[test]
    fn identical_outcomes_give_unit_progress() {
        let c = consts();
        let stack = SensoryStack { layers: vec![layer(5)] };
        let r = decoherence_progress(&stack, &linear_stim(vec![0.0, 1.0]), 1, 1, WindowShape::Box, 1e3, &c)
            .unwrap();
        assert_eq!(r.progress, Some(1.0));
        assert!(!r.satisfied);
    }

    #[test]
    fn vanishing_factor_is_infinite() {
        let c = consts();
        let stack = SensoryStack { layers: vec![SensoryLayer { lambda_gain: 1.0, dt_window: 1.0, ..layer(1) }] };
        let stim = linear_stim(vec![0.0, std::f64::consts::PI]);
        let r = decoherence_progress(&stack, &stim, 1, 0, WindowShape::Box, 1e3, &c).unwrap();
        assert!(r.infinite && r.satisfied && r.progress.is_none());
        assert_eq!(r.total_factor(), 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"log_progress\":\"inf\""));
    }

    #[test]
    fn closure_fills_missing_width() {
        let c = consts();
        let l = SensoryLayer { dp0: None, dq0: Some(2.0), ..layer(1) };
        assert!((l.pointer_momentum_width(&c) * 2.0 - c.hbar).abs() < 1e-50);
        assert!(l.validate(&c).is_ok());
        let tight = SensoryLayer { dp0: Some(c.hbar * 1e-3), dq0: Some(1.0), ..layer(1) };
        assert!(tight.validate(&c).is_err());
    }

    #[test]
    fn superselection_cases() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let labels = vec![BasisLabel::Outcome { n: 0 }, BasisLabel::Outcome { n: 1 }];
        let rho = DensityMatrix::pure(labels, &[Complex64::new(h, 0.0), Complex64::new(h, 0.0)]).unwrap();
        let half = apply_superselection(&rho, &FactorMatrix::uniform(2, 0.5)).unwrap();
        assert!((half.entries[(0, 1)].re - 0.25).abs() < 1e-15);
        let full = apply_superselection(&rho, &FactorMatrix::uniform(2, 0.0)).unwrap();
        assert_eq!(full.max_off_diagonal(), 0.0);
        assert_eq!(full.weights(), rho.weights());
        assert_eq!(apply_superselection(&rho, &FactorMatrix::identity(2)).unwrap(), rho);
    }

    #[test]
    fn kinetic_energy_cases() {
        let dims = [8, 5, 4];
        let h = [1e-6, 2e-6, 1e-6];
        let q = ScalarGrid::constant(dims, h, 3.0).unwrap();
        let flat = ScalarGrid::constant(dims, h, 7.0).unwrap();
        assert_eq!(kinetic_energy(&q, &flat).unwrap(), 0.0);
        let g = 250.0;
        let p = ScalarGrid::from_fn(dims, h, |x| g * x[0]).unwrap();
        let e = kinetic_energy(&q, &p).unwrap();
        let v: f64 = q.extent().iter().product();
        let oracle = 0.5 * 3.0 * g * g * v;
        assert!((e - oracle).abs() / oracle < 0.01);
        let q2 = ScalarGrid::constant(dims, h, 6.0).unwrap();
        assert!((kinetic_energy(&q2, &p).unwrap() - 2.0 * e).abs() <= 1e-12 * e);
        let other = ScalarGrid::constant([8, 5, 3], h, 1.0).unwrap();
        assert!(kinetic_energy(&q, &other).is_err());
    }

    proptest! {
        #[test]
        fn damping_in_unit_interval(x in -1e3f64..1e3) {
            for shape in [WindowShape::Box, WindowShape::Gaussian] {
                let f = damping_from_x(x, shape);
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }

        #[test]
        fn progress_at_least_one(
            energies in proptest::collection::vec(-3.0f64..3.0, 1..20),
            gaussian in any::<bool>(),
        ) {
            let c = consts();
            let n = energies.len();
            let l = SensoryLayer { lambda_gain: 1.0, dt_window: 1.0, ..layer(n) };
            let stim = Stimulus {
                outcomes: vec![0.0, 1.0],
                energy_maps: energies.iter().map(|&s| EnergyMap::Linear { slope: s }).collect(),
                active_cells: None,
            };
            let shape = if gaussian { WindowShape::Gaussian } else { WindowShape::Box };
            let r = decoherence_progress(&SensoryStack { layers: vec![l] }, &stim, 0, 1, shape, 1e3, &c).unwrap();
            prop_assert!(r.log_progress >= 0.0);
            let all_zero = energies.iter().all(|&e| e == 0.0);
            prop_assert_eq!(r.log_progress == 0.0, all_zero);
        }

        #[test]
        fn count_form_matches_mass_form(
            energies in proptest::collection::vec(0.01f64..3.0, 1..10),
            dq0 in 0.1f64..10.0,
        ) {
            let c = consts();
            let n = energies.len();
            let base = layer(n);
            let dn0 = base.count_from_concentration(dq0);
            let l = SensoryLayer { lambda_gain: 1.0, dt_window: 1.0, dp0: None, dq0: Some(dq0), dn0: Some(dn0), ..base };
            let stim = Stimulus {
                outcomes: vec![0.0, 1.0],
                energy_maps: energies.iter().map(|&s| EnergyMap::Linear { slope: s }).collect(),
                active_cells: None,
            };
            let r = decoherence_progress(&SensoryStack { layers: vec![l] }, &stim, 0, 1, WindowShape::Gaussian, 1e3, &c).unwrap();
            let cf = r.count_form.unwrap();
            prop_assert!((cf.log_progress - r.log_progress).abs() <= 1e-12 * r.log_progress.max(1.0));
        }

        #[test]
        fn superselection_preserves_state_properties(
            re in proptest::collection::vec(-1.0f64..1.0, 6),
            im in proptest::collection::vec(-1.0f64..1.0, 6),
            xs in proptest::collection::vec(-6.0f64..6.0, 6),
            gaussian in any::<bool>(),
        ) {
            // random mixed state: ρ = A A† / tr
            let a = nalgebra::DMatrix::from_fn(6, 6, |i, j| Complex64::new(re[(i + j) % 6] * (i as f64 + 1.0), im[(i * j + 1) % 6]));
            let mut m = &a * a.adjoint();
            let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
            m /= Complex64::new(tr, 0.0);
            let labels = (0..6).map(|n| BasisLabel::Outcome { n }).collect();
            let rho = DensityMatrix::new(labels, m).unwrap();
            // outcome n sits at pointer position xs[n]; factors φ(x_m − x_n)
            let shape = if gaussian { WindowShape::Gaussian } else { WindowShape::Box };
            let scale = if gaussian { 1.0 } else { std::f64::consts::PI / 12.0 };
            let mut f = FactorMatrix::identity(6);
            for i in 0..6 {
                for j in i + 1..6 {
                    f.set(i, j, damping_from_x(scale * (xs[i] - xs[j]), shape));
                }
            }
            let out = apply_superselection(&rho, &f).unwrap();
            prop_assert!((out.trace() - rho.trace()).abs() < 1e-15);
            prop_assert!(out.hermiticity_defect() < 1e-12);
            prop_assert!(out.min_eigenvalue() >= -1e-12);
        }
    }
}
