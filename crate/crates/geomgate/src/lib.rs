//! Simulation of driven geometric phase gates for two trapped-ion qubits
//! coupled to two radial phonon modes.
//!
//! The library covers three layers:
//! - exact propagation of the driven single-sideband Hamiltonian in its
//!   time-independent frame, and of the doubly-driven gate in the double
//!   dressed interaction picture ([`evolve`]),
//! - the analytic second-order Magnus propagator with all effective
//!   couplings ([`magnus`]),
//! - Monte-Carlo gate-error studies under thermal, dephasing, laser-phase
//!   and microwave-intensity noise ([`noise`], [`evolve`], [`analysis`]).
//!
//! Entry points for reproducing the individual experiments live in
//! [`runner`]; the `geomgate` binary drives them from flat key=value
//! config files.

pub mod analysis;
pub mod config;
pub mod error;
pub mod evolve;
pub mod hamiltonian;
pub mod linalg;
pub mod magnus;
pub mod noise;
pub mod params;
pub mod qcore;
pub mod runner;

pub use error::GateError;
