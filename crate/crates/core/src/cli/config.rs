//! Run configuration and per-subcommand parameter blocks.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::PhysicalConstants;
use crate::decoherence::{SensoryStack, Stimulus, WindowShape, DEFAULT_THRESHOLD};
use crate::density::Pattern;
use crate::error::{Error, Result};
use crate::fel::AxonPreset;
use crate::grid::ScalarGrid;
use crate::lattice::FieldPreset;
use crate::mean_field::{Mode, VevAnsatz};
use crate::measurement::{Feedback, Scheme, BODY_TEMPERATURE};
use crate::numeric::{linear_grid, log_grid, Vec3};
use crate::phase::QuasiParticleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Fel,
    PhaseDiagram,
    Dynamics,
    Decoherence,
    Measure,
    Lattice,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Fel => "fel",
            Subcommand::PhaseDiagram => "phase-diagram",
            Subcommand::Dynamics => "dynamics",
            Subcommand::Decoherence => "decoherence",
            Subcommand::Measure => "measure",
            Subcommand::Lattice => "lattice",
        }
    }
}

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub constants: PhysicalConstants,
    /// Subcommand-specific block, parsed lazily so errors carry its path.
    #[serde(default = "empty_object")]
    pub parameters: Value,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: None,
            seed: 0,
            output: None,
            workers: None,
            constants: PhysicalConstants::default(),
            parameters: empty_object(),
            sweep: None,
        }
    }
}

/// Deserializes `value`, reporting failures with the JSON path below `prefix`.
pub fn parse_at<T: DeserializeOwned>(value: &Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix, inner.as_str()) {
            ("", p) => p.to_string(),
            (pre, ".") => pre.to_string(),
            (pre, p) => format!("{pre}.{p}"),
        };
        Error::Config { path, message: e.into_inner().to_string() }
    })
}

impl RunConfig {
    pub fn from_value(doc: &Value) -> Result<Self> {
        let cfg: RunConfig = parse_at(doc, "")?;
        cfg.constants.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Config {
            path: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        Self::from_value(&doc)
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        parse_at(&self.parameters, "parameters")
    }
}

/// Values substituted at a JSON-pointer path of the config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// JSON pointer, e.g. `/parameters/rho`.
    pub path: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub log: bool,
}

impl SweepSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match (&self.values, self.min, self.max, self.count) {
            (Some(v), None, None, None) => {
                if v.is_empty() {
                    return Err(Error::invalid("sweep value list is empty"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("sweep values must be finite"));
                }
                Ok(v.clone())
            }
            (None, Some(min), Some(max), Some(count)) => {
                if count == 0 {
                    return Err(Error::invalid("sweep count must be at least 1"));
                }
                if self.log {
                    log_grid(min, max, count)
                } else {
                    linear_grid(min, max, count)
                }
            }
            _ => Err(Error::invalid("sweep needs either `values` or all of `min`, `max`, `count`")),
        }
    }
}

/// Replaces the value at `pointer`, which must already exist.
pub fn set_pointer(doc: &mut Value, pointer: &str, value: Value) -> Result<()> {
    match doc.pointer_mut(pointer) {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => Err(Error::Config { path: pointer.to_string(), message: "path does not resolve".into() }),
    }
}

/// Inserts `value` at `pointer`, creating intermediate objects as needed.
pub fn insert_pointer(doc: &mut Value, pointer: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = pointer.split('/').skip(1).collect();
    for (i, key) in parts.iter().enumerate() {
        if !cur.is_object() {
            return Err(Error::Config {
                path: pointer.to_string(),
                message: format!("`{key}` is not inside an object"),
            });
        }
        let map = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = map.entry((*key).to_string()).or_insert_with(empty_object);
    }
    *cur = value;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FelParams {
    pub preset: AxonPreset,
    /// Overrides the ion density derived from the preset, m⁻³.
    pub rho: Option<f64>,
}


/// Phase diagram over reduced coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseParams {
    pub quasi_particle: Option<QuasiParticleSpec>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self { quasi_particle: None, rho_min: 0.0, rho_max: 10.0, t_min: 0.0, t_max: 3.0, nx: 200, ny: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Vacuum,
    Stationary {
        v_amp: f64,
        theta0: f64,
    },
    /// Stationary state at `fraction` of the saturating amplitude.
    StationaryFraction {
        fraction: f64,
        theta0: f64,
    },
    Explicit {
        q: Vec<[f64; 2]>,
        p: Vec<[f64; 2]>,
        spins: Vec<Vec3>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsParams {
    /// Element positions, m; default spreads 5 elements along z over l_c/10.
    pub positions: Option<Vec<Vec3>>,
    /// Transition dipoles, C·m; one per element or a single shared one.
    pub dipoles: Option<Vec<Vec3>>,
    /// Dimensionless coupling `λ/Ω` used when no dipoles are given (dipole along x).
    pub coupling: f64,
    /// Quantization volume, m³; default `l_c³`.
    pub volume: Option<f64>,
    /// Modes; default one ±k pair along z polarized along x.
    pub modes: Option<Vec<Mode>>,
    pub initial: InitialState,
    /// `dt·Ω`.
    pub dt_omega: f64,
    pub steps: usize,
    /// Write every `stride`-th state.
    pub stride: usize,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            positions: None,
            dipoles: None,
            coupling: 0.6,
            volume: None,
            modes: None,
            initial: InitialState::StationaryFraction { fraction: 0.5, theta0: 0.3 },
            dt_omega: 0.01,
            steps: 10_000,
            stride: 10,
        }
    }
}

impl From<VevAnsatz> for InitialState {
    fn from(a: VevAnsatz) -> Self {
        InitialState::Stationary { v_amp: a.v_amp, theta0: a.theta0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceParams {
    pub stack: SensoryStack,
    pub stimulus: Stimulus,
    #[serde(default)]
    pub window: WindowShape,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Outcome amplitudes `[re, im]`; default equal weights.
    #[serde(default)]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureParams {
    pub scheme: Scheme,
    /// `[re, im]` per branch.
    pub amplitudes: Vec<[f64; 2]>,
    pub samples: u64,
    pub temperature: f64,
    /// Type I: one initial pattern; type II: one memory pattern per branch.
    pub patterns: Vec<String>,
    pub feedback: Option<Feedback>,
    /// Uniform coherence factor of the non-selective step; default 0.
    pub damping: Option<f64>,
}

impl Default for MeasureParams {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            scheme: Scheme::TypeI,
            amplitudes: vec![[h, 0.0], [h, 0.0]],
            samples: 100_000,
            temperature: BODY_TEMPERATURE,
            patterns: Vec::new(),
            feedback: None,
            damping: None,
        }
    }
}

impl MeasureParams {
    pub fn parsed_patterns(&self) -> Result<Vec<Pattern>> {
        self.patterns.iter().map(|s| Pattern::parse(s)).collect()
    }
}

/// Either an analytic preset or explicit sampled grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub preset: Option<FieldPreset>,
    #[serde(default)]
    pub rho: Option<ScalarGrid>,
    #[serde(default)]
    pub temperature: Option<ScalarGrid>,
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub perturbed: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeParams {
    pub extents: Vec3,
    /// Domain edge, m; default the coherence length of the gap.
    pub l_c: Option<f64>,
    pub quasi_particle: Option<QuasiParticleSpec>,
    pub samples_per_domain: usize,
    pub field: FieldSpec,
    /// Fields applied in order after the initial coding.
    pub rewrites: Vec<FieldSpec>,
    pub latch: bool,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self {
            extents: [4e-3; 3],
            l_c: None,
            quasi_particle: None,
            samples_per_domain: 2,
            field: FieldSpec {
                preset: Some(FieldPreset::GaussianBlob {
                    centre: [0.5; 3],
                    sigma: 1e-3,
                    peak_r: 4.0,
                    background_r: 0.2,
                    tau: 0.3,
                }),
                rho: None,
                temperature: None,
                t: 0.0,
                perturbed: None,
            },
            rewrites: Vec::new(),
            latch: false,
        }
    }
}
