//! Desk-scale workbench for digital quantum simulation of the 1D Fermi-Hubbard
//! model.
//!
//! The pipeline mirrors a hardware experiment end to end, entirely in
//! software: map the fermionic Hamiltonian to qubits ([`model`]), synthesise
//! mirrored Trotter circuits over an fSWAP network ([`circuit`]), lower them
//! to a heavy-hex native gate set and twirl them ([`compiler`]), pick a chain
//! embedding on a synthetic device graph ([`layout`]), execute exactly or
//! under synthetic noise ([`statevector`]), post-process the shots
//! ([`mitigation`]), run a sparse Heisenberg-picture classical baseline
//! ([`ppp`]), and extract spin/charge wavefront velocities ([`analysis`]).
//!
//! Everything is cross-checked against an exact-evolution oracle; see the
//! per-module docs for the conventions (qubit bit order, gate phase
//! conventions, mode ordering) that the whole crate shares.

pub mod analysis;
pub mod circuit;
pub mod compiler;
pub mod error;
pub mod layout;
pub mod mat;
pub mod mitigation;
pub mod model;
pub mod ppp;
pub mod statevector;

pub use error::{Error, Result};
