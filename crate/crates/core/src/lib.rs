//! Numerical laboratory for phase-noise-to-intensity-noise conversion in a
//! three-level Lambda medium.
//!
//! Two classically noisy laser beams share one stochastic carrier frequency,
//! drive a Lambda system held in its steady state, and propagate through an
//! optically thick cell. The crate reproduces the switching between
//! correlated and anti-correlated intensity fluctuations as a function of the
//! two-photon (Zeeman) detuning, along with the supporting machinery:
//! EIT transmission sweeps, normalized cross-correlation estimation, spectral
//! analysis, and Adler-type phase-locking diagnostics.

pub mod cli;
pub mod lambda_medium;
pub mod laser_noise;
pub mod phase_lock;
pub mod propagation;
pub mod scenarios;
pub mod signal_analysis;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
