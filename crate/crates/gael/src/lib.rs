//! Adiabatic elimination of Gaussian bosonic transducers from continuously
//! monitored quantum dynamics, plus the trajectory machinery needed to
//! validate the reduction against full-model simulations.
//!
//! The crate is organized around the reduction pipeline:
//!
//! - [`moments`]: drift/diffusion matrices of the transducer and its
//!   steady-state covariances (Lyapunov and Riccati).
//! - [`eliminate`]: construction of the effective system-only stochastic
//!   master equation, Lindblad diagonalization, and positivity certification.
//! - [`hilbert`]: dense operator algebra on truncated tensor-product spaces.
//! - [`sde`]: Euler-Maruyama integration of stochastic master equations,
//!   measurement records, and record-driven filtering.
//! - [`metrics`]: trace distance, logarithmic negativity, current histograms
//!   and postselection.

pub mod csvmat;
pub mod eliminate;
pub mod error;
pub mod hilbert;
pub mod metrics;
pub mod moments;
pub mod sde;

pub use error::GaelError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, GaelError>;
