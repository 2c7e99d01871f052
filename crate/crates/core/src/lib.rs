//! Worst-case weighted sum-rate beamforming for multi-cell MISO downlinks
//! under bounded channel uncertainty.
//!
//! The robust max-min problem is relaxed to a single-level problem whose
//! coupling constraint `||Δ - φ(V)||^2 <= ε` is handled by cutting planes.
//! [`lower_solver`] computes the worst-case error `φ(V)`, [`blrbf`] is the
//! centralised solver and [`bladrbf`] simulates the asynchronous distributed
//! variant in logical time.

pub mod bladrbf;
pub mod blrbf;
pub mod cutting_planes;
pub mod error;
pub mod evaluator;
pub mod experiment;
pub mod lower_solver;
pub mod model;

pub use blrbf::{run_blrbf, SolveResult, SolverConfig};
pub use error::{Error, Result};
pub use model::{BeamformerVec, ChannelSet, ErrorVec, NetworkConfig, PackingLayout};
