//! Metastability analysis for the diffusion generated by `L = εΔ − ∇H·∇`.
//!
//! The crate locates and classifies the critical points of a potential `H`,
//! evaluates the Eyring–Kramers predictions for the Poincaré and logarithmic
//! Sobolev constants of the Gibbs measure `μ ∝ e^{−H/ε}`, and provides
//! independent numerical oracles (finite-difference spectral gaps, 1D
//! Hardy-type functionals, transport costs, Lyapunov drift checks) to test
//! those predictions at finite ε.

pub mod discrete;
pub mod ek;
pub mod error;
pub mod expr;
pub mod grid;
pub mod landscape;
pub mod linalg;
pub mod lyapunov;
pub mod means;
pub mod measures;
pub mod oracle1d;
pub mod transport;

pub use error::{Error, Result};
pub use expr::{eval_jet2, parse_potential, Jet2, Potential};
