//! Type-I and type-II selective measurement pipelines.
//!
//! Type I (neuronal): the stimulus superposition is dephased by the sensory
//! organ, the firing pattern is correlated with the stimulus by quantum
//! feedback, and an external reader selects one event at a cost of `k_B T`.
//!
//! Type II (coherence domains): the boundary condition, memory pattern and
//! extended-object state form entangled triples. After dephasing, retrieval
//! excites each written pattern to an energetically distinct flag `Ψ_n`, and
//! reading is performed by the domains themselves at zero cost.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{BasisLabel, DensityMatrix, FactorMatrix, Pattern};
use crate::error::{Error, Result};
use crate::numeric::exact_sum;

/// Body temperature, K.
pub const BODY_TEMPERATURE: f64 = 310.0;

/// Largest off-diagonal modulus accepted by event reading.
pub const READING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" | "i" => Ok(Scheme::TypeI),
            "II" | "2" | "ii" => Ok(Scheme::TypeII),
            other => Err(Error::invalid(format!("unknown scheme `{other}` (expected I or II)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::TypeI => "I",
            Scheme::TypeII => "II",
        })
    }
}

/// Binary code of `n` on `width` bits, most significant first.
pub fn binary_pattern(n: usize, width: usize) -> Pattern {
    Pattern((0..width).rev().map(|b| (n >> b) & 1 == 1).collect())
}

/// Bits needed to give `n` sectors distinct binary codes.
pub fn code_width(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

/// Pure superposition `Σ cₙ |n⟩` over the scheme's registers.
///
/// Type I takes one common initial firing pattern. Type II takes one memory
/// pattern per branch; an empty list selects the binary codes of `n`.
pub fn init_scheme(amplitudes: &[Complex64], scheme: Scheme, patterns: &[Pattern]) -> Result<DensityMatrix> {
    if amplitudes.is_empty() {
        return Err(Error::invalid("at least one amplitude is required"));
    }
    let norm2: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("amplitudes are not normalized: sum |c|^2 = {norm2}")));
    }
    let n = amplitudes.len();
    let labels = match scheme {
        Scheme::TypeI => {
            let initial = match patterns {
                [p] => p.clone(),
                [] => Pattern::zeros(code_width(n)),
                _ => return Err(Error::invalid("type I uses a single common initial firing pattern")),
            };
            (0..n).map(|k| BasisLabel::TypeI { stimulus: k, pattern: initial.clone() }).collect()
        }
        Scheme::TypeII => {
            let memories: Vec<Pattern> = if patterns.is_empty() {
                (0..n).map(|k| binary_pattern(k, code_width(n))).collect()
            } else if patterns.len() == n {
                patterns.to_vec()
            } else {
                return Err(Error::invalid(format!(
                    "type II needs one memory pattern per branch ({} given for {n})",
                    patterns.len()
                )));
            };
            memories
                .into_iter()
                .enumerate()
                .map(|(k, memory)| BasisLabel::TypeII { boundary: k, memory, domains: k, excitation: 0 })
                .collect()
        }
    };
    DensityMatrix::pure(labels, amplitudes)
}

/// Non-selective measurement: coherences between distinct branches are
/// multiplied by `factors`, or removed entirely when none are supplied.
pub fn nonselective_step(rho: &DensityMatrix, factors: Option<&FactorMatrix>) -> Result<DensityMatrix> {
    rho.validate()?;
    let n = rho.sector_count();
    let ideal;
    let factors = match factors {
        Some(f) => f,
        None => {
            ideal = FactorMatrix::uniform(n, 0.0);
            &ideal
        }
    };
    let out = rho.dephase(factors)?;
    out.validate()?;
    Ok(out)
}

/// Branch-conditioned targets of the feedback step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// Firing pattern `{ℱ}ₙ` per stimulus branch.
    TypeI(Vec<Pattern>),
    /// Excitation flag `Ψₙ` per boundary branch.
    TypeII(Vec<usize>),
}

impl Feedback {
    /// Binary codes for type I, flags `n + 1` for type II.
    pub fn default_for(scheme: Scheme, n: usize) -> Self {
        match scheme {
            Scheme::TypeI => Feedback::TypeI((0..n).map(|k| binary_pattern(k, code_width(n))).collect()),
            Scheme::TypeII => Feedback::TypeII((1..=n).collect()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Feedback::TypeI(v) => v.len(),
            Feedback::TypeII(v) => v.len(),
        }
    }
}

/// Conditional relabelling `{ℱ}₀ → {ℱ}ₙ` or `|0;{ℳ}ₙ⟩ → |Ψₙ;{ℳ}ₙ⟩`.
///
/// Acts as a unitary on the span of the basis, so matrix entries, trace and
/// spectrum are unchanged; only labels move. Rejects mappings that would
/// merge two basis states and, for type II, repeated flags on occupied
/// branches.
pub fn feedback_step(rho: &DensityMatrix, mapping: &Feedback) -> Result<DensityMatrix> {
    rho.validate()?;
    let sectors = rho.sector_count();
    if mapping.len() < sectors {
        return Err(Error::invalid(format!(
            "feedback maps {} branches, state has {sectors}",
            mapping.len()
        )));
    }
    let labels: Vec<BasisLabel> = rho
        .labels
        .iter()
        .map(|l| match (l, mapping) {
            (BasisLabel::TypeI { stimulus, .. }, Feedback::TypeI(targets)) => {
                Ok(BasisLabel::TypeI { stimulus: *stimulus, pattern: targets[*stimulus].clone() })
            }
            (BasisLabel::TypeII { boundary, memory, domains, .. }, Feedback::TypeII(flags)) => {
                Ok(BasisLabel::TypeII {
                    boundary: *boundary,
                    memory: memory.clone(),
                    domains: *domains,
                    excitation: flags[*boundary],
                })
            }
            _ => Err(Error::invalid(format!("feedback mapping does not match register `{l}`"))),
        })
        .collect::<Result<_>>()?;
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::invalid(format!("feedback is not injective: two states map to `{l}`")));
        }
    }
    if let Feedback::TypeII(flags) = mapping {
        let weights = rho.weights();
        let mut occupied: Vec<usize> = Vec::new();
        for (l, w) in rho.labels.iter().zip(&weights) {
            if *w > 0.0 && !occupied.contains(&l.sector()) {
                occupied.push(l.sector());
            }
        }
        for (i, a) in occupied.iter().enumerate() {
            if let Some(b) = occupied[..i].iter().find(|&&b| flags[b] == flags[*a]) {
                return Err(Error::invalid(format!(
                    "branches {b} and {a} share excitation flag {}; retrieval states must be distinct in energy",
                    flags[*a]
                )));
            }
        }
    }
    DensityMatrix::new(labels, rho.entries.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub event: u64,
    /// J.
    pub cost: f64,
}

/// Energy spent on event readings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    /// K.
    pub temperature: f64,
    pub entries: Vec<LedgerEntry>,
}

impl EnergyLedger {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::domain(format!("temperature must be non-negative, got {temperature}")));
        }
        Ok(Self { temperature, entries: Vec::new() })
    }

    /// Correctly rounded sum of all costs.
    pub fn total(&self) -> f64 {
        exact_sum(self.entries.iter().map(|e| e.cost))
    }

    pub fn readings(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub index: usize,
    pub label: BasisLabel,
    pub probability: f64,
    /// Projector onto the selected basis state.
    pub collapsed: DensityMatrix,
}

fn check_readable(rho: &DensityMatrix) -> Result<WeightedIndex<f64>> {
    rho.validate()?;
    let off = rho.max_off_diagonal();
    if off > READING_TOL {
        return Err(Error::invalid(format!(
            "state is not diagonal in the reading basis (max coherence {off:.3e}); dephase before reading"
        )));
    }
    let weights: Vec<f64> = rho.weights().into_iter().map(|w| w.max(0.0)).collect();
    WeightedIndex::new(&weights).map_err(|e| Error::numerical(format!("invalid reading weights: {e}")))
}

/// Seeded event reader carrying its own energy ledger.
#[derive(Debug, Clone)]
pub struct EventReader {
    rng: ChaCha8Rng,
    pub ledger: EnergyLedger,
    /// Index of the most recent event.
    pub last_index: Option<usize>,
    k_b: f64,
}

impl EventReader {
    pub fn new(seed: u64, temperature: f64, k_b: f64) -> Result<Self> {
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(seed), ledger: EnergyLedger::new(temperature)?, last_index: None, k_b })
    }

    /// Reading cost per event: `k_B T` for type I, zero for type II.
    pub fn cost(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::TypeI => self.k_b * self.ledger.temperature,
            Scheme::TypeII => 0.0,
        }
    }

    pub fn read(&mut self, rho: &DensityMatrix, scheme: Scheme) -> Result<MeasurementOutcome> {
        let dist = check_readable(rho)?;
        let index = dist.sample(&mut self.rng);
        self.record(scheme, index);
        outcome(rho, index)
    }

    /// Reads `n` events from the same state, returning the histogram.
    pub fn read_many(&mut self, rho: &DensityMatrix, scheme: Scheme, n: u64) -> Result<Vec<u64>> {
        let dist = check_readable(rho)?;
        let mut hist = vec![0u64; rho.dim()];
        for _ in 0..n {
            let index = dist.sample(&mut self.rng);
            hist[index] += 1;
            self.record(scheme, index);
        }
        Ok(hist)
    }

    fn record(&mut self, scheme: Scheme, index: usize) {
        self.last_index = Some(index);
        let event = self.ledger.entries.len() as u64;
        let cost = self.cost(scheme);
        self.ledger.entries.push(LedgerEntry { event, cost });
    }
}

fn outcome(rho: &DensityMatrix, index: usize) -> Result<MeasurementOutcome> {
    let n = rho.dim();
    let mut amps = vec![Complex64::new(0.0, 0.0); n];
    amps[index] = Complex64::new(1.0, 0.0);
    Ok(MeasurementOutcome {
        index,
        label: rho.labels[index].clone(),
        probability: rho.entries[(index, index)].re,
        collapsed: DensityMatrix::pure(rho.labels.clone(), &amps)?,
    })
}

/// Single seeded reading with a caller-owned ledger.
pub fn event_read(
    rho: &DensityMatrix,
    scheme: Scheme,
    seed: u64,
    ledger: &mut EnergyLedger,
    k_b: f64,
) -> Result<MeasurementOutcome> {
    let mut reader =
        EventReader { rng: ChaCha8Rng::seed_from_u64(seed), ledger: ledger.clone(), last_index: None, k_b };
    let out = reader.read(rho, scheme)?;
    *ledger = reader.ledger;
    Ok(out)
}

/// Histogram of `n_samples` seeded Born-rule draws from a diagonal state.
pub fn born_stats(rho: &DensityMatrix, n_samples: u64, seed: u64) -> Result<Vec<u64>> {
    let dist = check_readable(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = vec![0u64; rho.dim()];
    for _ in 0..n_samples {
        hist[dist.sample(&mut rng)] += 1;
    }
    Ok(hist)
}

/// Everything produced by one full pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub scheme: Scheme,
    pub seed: u64,
    pub samples: u64,
    pub labels: Vec<String>,
    /// Diagonal of the state handed to the reader.
    pub final_diagonal: Vec<f64>,
    pub histogram: Vec<u64>,
    /// Label of the last event read.
    pub last_event: Option<String>,
    pub ledger: LedgerSummary,
    /// Smallest eigenvalue and trace after each step.
    pub checks: Vec<StepCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerSummary {
    pub temperature: f64,
    pub readings: usize,
    pub cost_per_reading: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCheck {
    pub step: String,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl StepCheck {
    fn of(step: &str, rho: &DensityMatrix) -> Self {
        Self { step: step.to_string(), trace: rho.trace(), min_eigenvalue: rho.min_eigenvalue() }
    }
}

/// Runs initialization, non-selective measurement, feedback and `samples`
/// readings (type I has three steps, type II four, counting initialization).
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    amplitudes: &[Complex64],
    scheme: Scheme,
    patterns: &[Pattern],
    feedback: Option<&Feedback>,
    factors: Option<&FactorMatrix>,
    samples: u64,
    seed: u64,
    temperature: f64,
    k_b: f64,
) -> Result<PipelineReport> {
    let rho0 = init_scheme(amplitudes, scheme, patterns)?;
    let rho1 = nonselective_step(&rho0, factors)?;
    let default_map;
    let mapping = match feedback {
        Some(f) => f,
        None => {
            default_map = Feedback::default_for(scheme, amplitudes.len());
            &default_map
        }
    };
    let rho2 = feedback_step(&rho1, mapping)?;
    let mut reader = EventReader::new(seed, temperature, k_b)?;
    let histogram = if samples > 0 { reader.read_many(&rho2, scheme, samples)? } else { vec![0; rho2.dim()] };
    let last_event = reader.last_index.map(|i| rho2.labels[i].to_string());
    Ok(PipelineReport {
        scheme,
        seed,
        samples,
        labels: rho2.labels.iter().map(ToString::to_string).collect(),
        final_diagonal: rho2.weights(),
        histogram,
        last_event,
        ledger: LedgerSummary {
            temperature,
            readings: reader.ledger.readings(),
            cost_per_reading: reader.cost(scheme),
            total: reader.ledger.total(),
        },
        checks: vec![
            StepCheck::of("init", &rho0),
            StepCheck::of("nonselective", &rho1),
            StepCheck::of("feedback", &rho2),
        ],
    })
}
