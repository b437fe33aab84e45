//! Simulation and spectral-analysis toolkit for mean-field random-conductance
//! Markov chains and the random walk on their Poisson weighted infinite tree
//! (PWIT) scaling limit.
//!
//! The crate is organised around the pipeline:
//!
//! * [`levy`] — Lévy measures of driftless subordinators and exact-at-the-tail
//!   sampling of Poisson arrivals and ID(Π) sums,
//! * [`graph`] — finite-n conductance matrices on the complete graph, the
//!   derived Markov kernel and its symmetrization,
//! * [`spectrum`] — a Jacobi eigensolver plus empirical-spectral-distribution
//!   analytics,
//! * [`pwit`] — lazily generated, deterministically seeded PWIT environments,
//! * [`walk`] — quenched walk simulation and path statistics (hitting times,
//!   regenerations, traps, escape probabilities),
//! * [`experiments`] — experiment orchestration, CSV/JSON emission and the
//!   built-in validation suite behind the `pwit-lab` binary.

pub mod error;
mod quad;
pub mod seeding;

pub mod levy;

pub mod graph;
pub mod spectrum;

pub mod pwit;
pub mod walk;

pub mod experiments;

pub use error::{Error, Result};
