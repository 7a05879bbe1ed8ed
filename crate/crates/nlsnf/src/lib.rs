//! Normal forms and long-time numerics for the non-local cubic Schrödinger
//! equation on the circle.
//!
//! The crate covers the resonant and rational Birkhoff normal forms of the
//! mode-truncated Hamiltonian, a split-step integrator for the truncated
//! system, Monte Carlo estimates of the near-resonant set, and the
//! Lambert-W parameter balances that turn smallness bounds into stability
//! times.

pub mod ball;
pub mod cli;
pub mod config;
pub mod kernel;
pub mod lattice;
pub mod measure;
pub mod ode;
pub mod poly;
pub mod rational_nf;
pub mod resonant_nf;
pub mod simulator;
pub mod state;
pub mod timeplan;

pub use kernel::{KernelSpec, NonResonanceParams};
pub use lattice::{Index, MultiIndex, NormParams, Sign, WeightFunction};
pub use state::FourierState;
