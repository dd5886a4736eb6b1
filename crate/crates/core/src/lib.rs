//! Desk-scale numerics for coherent-QED models of measurement in neural and
//! sensory tissue.
//!
//! The first model treats the propagation of action potentials as an FEL-like
//! coherence mechanism in ion-solvated water and couples it to sensory-organ
//! decoherence through a continuous superselection rule. The second model is
//! an assembly of Dicke–Preparata coherence domains whose superradiant ground
//! states store memory patterns.
//!
//! Module map:
//!
//! | module | contents |
//! |---|---|
//! | [`constants`] | SI constants, energy-spin matrices, rotor Hamiltonians |
//! | [`fel`] | steady-state field amplitude and gain time of the axon model |
//! | [`phase`] | critical density, critical temperature, phase diagram |
//! | [`mean_field`] | mean-field spin–boson dynamics with global U(1) symmetry |
//! | [`decoherence`] | sensory transduction and superselection damping |
//! | [`density`] | labelled density matrices shared by both pipelines |
//! | [`measurement`] | type-I and type-II selective measurement pipelines |
//! | [`lattice`] | bit coding of elementary optical domains |
//! | [`cli`] | config ingestion, subcommands, sweeps, CSV/JSON output |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constants;
pub mod decoherence;
pub mod density;
pub mod error;
pub mod fel;
pub mod grid;
pub mod lattice;
pub mod mean_field;
pub mod measurement;
pub mod numeric;
pub mod phase;

pub use error::{Error, Result};
