//! Numerical laboratory for adiabatic evolution of small quantum systems.
//!
//! The crate propagates time-dependent Hamiltonians exactly, tracks their
//! instantaneous eigenstates under explicit gauge conventions, and keeps the
//! dynamical and geometric (Berry) phases in separate ledgers so that the
//! different ways of bookkeeping them can be compared against the exact
//! evolution.
//!
//! Module map:
//!
//! * [`schedule`]: Hamiltonian families `H(t)` and their JSON descriptor.
//! * [`propagator`]: exact `U(t, 0)` and the closed-form spin oracle.
//! * [`eigenflow`]: continuously tracked eigenvectors, raw/parallel/periodic gauges.
//! * [`phases`]: dynamical phase, open-path geometric phase, cyclic Berry phase.
//! * [`adiabatic`]: adiabatic approximant, the standard adiabatic condition, τ-scaling.
//! * [`consistency`]: the unitarily related dual system and phase-consistency checks.
//! * [`cli`]: experiment configuration, orchestration and report emission.

pub mod adiabatic;
pub mod cli;
pub mod consistency;
pub mod eigenflow;
pub mod error;
pub mod linalg;
pub mod phases;
pub mod propagator;
pub mod schedule;

pub use error::{Error, Result};
