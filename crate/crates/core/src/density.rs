//! Labelled density matrices and sector-wise dephasing.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Classical bit string, one bit per neuron or per optical domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern(pub Vec<bool>);

impl Pattern {
    pub fn zeros(n: usize) -> Self {
        Pattern(vec![false; n])
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("pattern `{s}` contains `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Pattern)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Composite basis label of a measurement register.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisLabel {
    /// Bare outcome index.
    Outcome { n: usize },
    /// Stimulus eigenvalue index and neural firing pattern; the apparatus
    /// state is fixed and left implicit.
    TypeI { stimulus: usize, pattern: Pattern },
    /// Boundary condition, memory pattern, extended-object state and
    /// excitation flag (`0` = not excited).
    TypeII { boundary: usize, memory: Pattern, domains: usize, excitation: usize },
}

impl BasisLabel {
    /// Index `n` of the superposition branch the label belongs to.
    pub fn sector(&self) -> usize {
        match self {
            BasisLabel::Outcome { n } => *n,
            BasisLabel::TypeI { stimulus, .. } => *stimulus,
            BasisLabel::TypeII { boundary, .. } => *boundary,
        }
    }
}

impl std::fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisLabel::Outcome { n } => write!(f, "{n}"),
            BasisLabel::TypeI { stimulus, pattern } => write!(f, "O{stimulus};A0;F{pattern}"),
            BasisLabel::TypeII { boundary, memory, domains, excitation } => {
                write!(f, "B{boundary};M{memory};D{domains};Psi{excitation}")
            }
        }
    }
}

/// Symmetric table of dephasing factors between sectors, unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMatrix {
    pub n: usize,
    values: Vec<f64>,
}

impl FactorMatrix {
    pub fn identity(n: usize) -> Self {
        Self { n, values: vec![1.0; n * n] }
    }

    /// Same factor `f` between every pair of distinct sectors.
    pub fn uniform(n: usize, f: f64) -> Self {
        let mut m = Self::identity(n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m.values[a * n + b] = f;
                }
            }
        }
        m
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    pub fn set(&mut self, a: usize, b: usize, f: f64) {
        self.values[a * self.n + b] = f;
        self.values[b * self.n + a] = f;
    }

    /// Entrywise product, the composition of two dephasing channels.
    pub fn compose(&self, other: &FactorMatrix) -> Result<FactorMatrix> {
        if self.n != other.n {
            return Err(Error::invalid(format!("factor tables of size {} and {}", self.n, other.n)));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(FactorMatrix { n: self.n, values })
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..self.n {
            if self.get(a, a) != 1.0 {
                return Err(Error::numerical(format!("factor table diagonal ({a},{a}) is not 1")));
            }
            for b in 0..self.n {
                let f = self.get(a, b);
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::numerical(format!("damping factor ({a},{b}) = {f} outside [0, 1]")));
                }
                if f != self.get(b, a) {
                    return Err(Error::numerical(format!("factor table is not symmetric at ({a},{b})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub labels: Vec<BasisLabel>,
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(labels: Vec<BasisLabel>, entries: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self { labels, entries };
        rho.validate()?;
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` for `ψ = Σ cₙ |labelₙ⟩`.
    pub fn pure(labels: Vec<BasisLabel>, amplitudes: &[Complex64]) -> Result<Self> {
        if labels.len() != amplitudes.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} amplitudes",
                labels.len(),
                amplitudes.len()
            )));
        }
        let n = labels.len();
        let entries = DMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Self::new(labels, entries)
    }

    /// Diagonal state with the given weights.
    pub fn diagonal_state(labels: Vec<BasisLabel>, weights: &[f64]) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(Error::invalid("one weight per label is required"));
        }
        let n = labels.len();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(weights[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(labels, entries)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::invalid("density matrix must have at least one basis state"));
        }
        if self.entries.nrows() != n || self.entries.ncols() != n {
            return Err(Error::invalid(format!(
                "{} labels for a {}x{} matrix",
                n,
                self.entries.nrows(),
                self.entries.ncols()
            )));
        }
        for (i, l) in self.labels.iter().enumerate() {
            if self.labels[..i].contains(l) {
                return Err(Error::invalid(format!("duplicate basis label `{l}`")));
            }
        }
        if self.entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::numerical("density matrix has non-finite entries"));
        }
        let herm = self.hermiticity_defect();
        if herm > HERMITIAN_TOL {
            return Err(Error::numerical(format!("density matrix is not Hermitian (defect {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::numerical(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::numerical(format!("density matrix is not positive (min eigenvalue {min:.3e})")));
        }
        Ok(())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.entries.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.entries[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn sector_count(&self) -> usize {
        self.labels.iter().map(BasisLabel::sector).max().map_or(0, |m| m + 1)
    }

    /// Largest modulus of any element coupling two different sectors.
    pub fn max_cross_sector(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if self.labels[i].sector() != self.labels[j].sector() {
                    worst = worst.max(self.entries[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// Multiplies every element between sectors `a ≠ b` by `factors(a, b)`.
    /// Diagonal blocks, and hence the trace, are untouched.
    pub fn dephase(&self, factors: &FactorMatrix) -> Result<DensityMatrix> {
        factors.validate()?;
        if factors.n < self.sector_count() {
            return Err(Error::invalid(format!(
                "factor table covers {} sectors, state has {}",
                factors.n,
                self.sector_count()
            )));
        }
        let mut out = self.clone();
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (self.labels[i].sector(), self.labels[j].sector());
                if a != b {
                    out.entries[(i, j)] *= factors.get(a, b);
                }
            }
        }
        Ok(out)
    }
}
