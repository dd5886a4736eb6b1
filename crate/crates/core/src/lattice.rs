//! Bit coding of elementary optical domains.
//!
//! A volume is cut into cubes of edge `l_c`; partial cubes at the far faces
//! are dropped. Each domain stores one classical bit: 1 when its averaged
//! density and temperature lie in the superradiant phase, 0 otherwise. A
//! sample at `x` belongs to the domain with index `floor(x / l_c)` on each
//! axis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::grid::ScalarGrid;
use crate::numeric::Vec3;
use crate::phase::{PhaseClassifier, QuasiParticleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    /// Edges of the volume, m.
    pub extents: Vec3,
    /// Domain edge, m.
    pub l_c: f64,
    pub spec: QuasiParticleSpec,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.l_c > 0.0 && self.l_c.is_finite()) {
            return Err(Error::domain(format!("l_c must be positive, got {}", self.l_c)));
        }
        for (axis, e) in self.extents.iter().enumerate() {
            if !(e.is_finite() && *e >= self.l_c) {
                return Err(Error::domain(format!(
                    "extent {e} on axis {axis} is smaller than one domain (l_c = {})",
                    self.l_c
                )));
            }
        }
        Ok(())
    }
}

/// Domains per axis and their total number.
pub fn domain_count(spec: &LatticeSpec) -> Result<([usize; 3], usize)> {
    spec.validate()?;
    let dims = spec.extents.map(|e| (e / spec.l_c).floor() as usize);
    Ok((dims, dims.iter().product()))
}

/// Sampled density and temperature at time `t`, with optional per-domain
/// perturbation flags consulted by latched rewrites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryField {
    /// m⁻³.
    pub rho: ScalarGrid,
    /// K.
    pub temperature: ScalarGrid,
    /// s.
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub perturbed: Option<Vec<bool>>,
}

impl BoundaryField {
    pub fn validate(&self) -> Result<()> {
        self.rho.validate()?;
        self.temperature.validate()?;
        if !self.rho.same_shape(&self.temperature) {
            return Err(Error::invalid("density and temperature grids must share dims and spacing"));
        }
        if self.rho.values.iter().chain(&self.temperature.values).any(|v| *v < 0.0) {
            return Err(Error::invalid("field samples must be non-negative"));
        }
        if !self.t.is_finite() {
            return Err(Error::invalid("field time must be finite"));
        }
        Ok(())
    }

    fn perturbed(&self, domain: usize) -> bool {
        self.perturbed.as_ref().is_some_and(|p| p[domain])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub t: f64,
    pub changed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeState {
    pub dims: [usize; 3],
    /// Flat bits, index `(ix·ny + iy)·nz + iz`.
    pub bits: Vec<bool>,
    /// `(t, bits changed)`; the first entry counts the ones written initially.
    pub history: Vec<HistoryEntry>,
}

impl LatticeState {
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    pub fn bit(&self, i: [usize; 3]) -> bool {
        self.bits[self.index(i)]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// `(ix, iy, iz, bit)` in flat order.
    pub fn cells(&self) -> impl Iterator<Item = ([usize; 3], bool)> + '_ {
        let [_, ny, nz] = self.dims;
        self.bits.iter().enumerate().map(move |(k, b)| ([k / (ny * nz), (k / nz) % ny, k % nz], *b))
    }

    pub fn hamming(&self, other: &LatticeState) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }
}

/// Domain means `(ρ̄, T̄)` in flat domain order.
pub fn domain_means(spec: &LatticeSpec, field: &BoundaryField) -> Result<Vec<(f64, f64)>> {
    let (dims, n) = domain_count(spec)?;
    field.validate()?;
    let extent = field.rho.extent();
    for axis in 0..3 {
        let needed = dims[axis] as f64 * spec.l_c;
        if extent[axis] < needed * (1.0 - 1e-12) {
            return Err(Error::invalid(format!(
                "field covers {:.6e} m on axis {axis}, lattice needs {needed:.6e} m",
                extent[axis]
            )));
        }
    }
    if let Some(p) = &field.perturbed {
        if p.len() != n {
            return Err(Error::invalid(format!("{} perturbation flags for {n} domains", p.len())));
        }
    }
    let mut sums = vec![(0.0, 0.0, 0usize); n];
    let g = &field.rho;
    for ix in 0..g.dims[0] {
        for iy in 0..g.dims[1] {
            for iz in 0..g.dims[2] {
                let x = g.centre([ix, iy, iz]);
                let d = x.map(|c| (c / spec.l_c).floor() as usize);
                if d[0] < dims[0] && d[1] < dims[1] && d[2] < dims[2] {
                    let k = g.index([ix, iy, iz]);
                    let slot = &mut sums[(d[0] * dims[1] + d[1]) * dims[2] + d[2]];
                    slot.0 += field.rho.values[k];
                    slot.1 += field.temperature.values[k];
                    slot.2 += 1;
                }
            }
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(k, (r, t, c))| {
            if c == 0 {
                Err(Error::invalid(format!("domain {k} contains no field samples; refine the grid")))
            } else {
                Ok((r / c as f64, t / c as f64))
            }
        })
        .collect()
}

pub fn code_lattice(spec: &LatticeSpec, field: &BoundaryField, consts: &PhysicalConstants) -> Result<LatticeState> {
    let (dims, _) = domain_count(spec)?;
    let classifier = PhaseClassifier::new(&spec.spec, consts)?;
    let means = domain_means(spec, field)?;
    let bits: Vec<bool> = means.par_iter().map(|&(r, t)| classifier.classify(r, t).bit()).collect();
    let ones = bits.iter().filter(|b| **b).count();
    Ok(LatticeState { dims, bits, history: vec![HistoryEntry { t: field.t, changed: ones }] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RewriteReport {
    pub flipped: usize,
    pub set: usize,
    pub cleared: usize,
    /// Ones kept by the latch against a subcritical field.
    pub held: usize,
}

/// Recodes `state` against `new_field`. With `latch`, a 1→0 transition
/// happens only in domains whose perturbation flag is set.
pub fn rewrite(
    state: &LatticeState,
    spec: &LatticeSpec,
    new_field: &BoundaryField,
    latch: bool,
    consts: &PhysicalConstants,
) -> Result<(LatticeState, RewriteReport)> {
    let fresh = code_lattice(spec, new_field, consts)?;
    if fresh.dims != state.dims {
        return Err(Error::invalid(format!(
            "lattice dims {:?} do not match the previous state {:?}",
            fresh.dims, state.dims
        )));
    }
    let mut report = RewriteReport { flipped: 0, set: 0, cleared: 0, held: 0 };
    let bits: Vec<bool> = state
        .bits
        .iter()
        .zip(&fresh.bits)
        .enumerate()
        .map(|(k, (&old, &new))| match (old, new) {
            (true, false) if latch && !new_field.perturbed(k) => {
                report.held += 1;
                true
            }
            (true, false) => {
                report.cleared += 1;
                false
            }
            (false, true) => {
                report.set += 1;
                true
            }
            _ => old,
        })
        .collect();
    report.flipped = report.set + report.cleared;
    let mut history = state.history.clone();
    history.push(HistoryEntry { t: new_field.t, changed: report.flipped });
    Ok((LatticeState { dims: state.dims, bits, history }, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeStats {
    pub n: usize,
    pub ones: usize,
    pub zeros: usize,
    pub ones_fraction: f64,
    pub zeros_fraction: f64,
}

pub fn stats(state: &LatticeState) -> LatticeStats {
    let n = state.bits.len();
    let ones = state.bits.iter().filter(|b| **b).count();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    LatticeStats { n, ones, zeros: n - ones, ones_fraction: frac(ones), zeros_fraction: frac(n - ones) }
}

/// Analytic fields in reduced units `r = ρ/ρ_c`, `τ = k_B T/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldPreset {
    Uniform {
        r: f64,
        tau: f64,
    },
    /// `r = background + (peak − background) exp(−|x − c|²/(2σ²))`, with the
    /// centre given as fractions of the extents and `σ` in m.
    GaussianBlob {
        centre: Vec3,
        sigma: f64,
        peak_r: f64,
        background_r: f64,
        tau: f64,
    },
    /// `r` linear from `r_min` to `r_max` across the extent along `axis`.
    LinearGradient {
        axis: usize,
        r_min: f64,
        r_max: f64,
        tau: f64,
    },
}

/// Samples a preset on a grid with `samples_per_domain` points per domain edge.
pub fn preset_field(
    preset: &FieldPreset,
    spec: &LatticeSpec,
    samples_per_domain: usize,
    t: f64,
    consts: &PhysicalConstants,
) -> Result<BoundaryField> {
    let (dims, _) = domain_count(spec)?;
    if samples_per_domain == 0 {
        return Err(Error::invalid("samples_per_domain must be at least 1"));
    }
    let classifier = PhaseClassifier::new(&spec.spec, consts)?;
    let rho_c = classifier.rho_c;
    let t_unit = spec.spec.eps_gap / consts.k_b;
    let grid_dims = dims.map(|d| d * samples_per_domain);
    let h = spec.l_c / samples_per_domain as f64;
    let spacing = [h; 3];
    let extent = grid_dims.map(|d| d as f64 * h);
    let (r_fn, tau): (Box<dyn Fn(Vec3) -> f64>, f64) = match preset.clone() {
        FieldPreset::Uniform { r, tau } => (Box::new(move |_| r), tau),
        FieldPreset::GaussianBlob { centre, sigma, peak_r, background_r, tau } => {
            if !(sigma > 0.0) {
                return Err(Error::invalid("blob sigma must be positive"));
            }
            let c = [centre[0] * extent[0], centre[1] * extent[1], centre[2] * extent[2]];
            (
                Box::new(move |x: Vec3| {
                    let d2: f64 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum();
                    background_r + (peak_r - background_r) * (-d2 / (2.0 * sigma * sigma)).exp()
                }),
                tau,
            )
        }
        FieldPreset::LinearGradient { axis, r_min, r_max, tau } => {
            if axis > 2 {
                return Err(Error::invalid(format!("gradient axis must be 0, 1 or 2, got {axis}")));
            }
            let len = extent[axis];
            (Box::new(move |x: Vec3| r_min + (r_max - r_min) * x[axis] / len), tau)
        }
    };
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("reduced temperature must be non-negative, got {tau}")));
    }
    let rho = ScalarGrid::from_fn(grid_dims, spacing, |x| (r_fn(x) * rho_c).max(0.0))?;
    let temperature = ScalarGrid::constant(grid_dims, spacing, tau * t_unit)?;
    let field = BoundaryField { rho, temperature, t, perturbed: None };
    field.validate()?;
    Ok(field)
}
