//! Stationary scattering of a neutron off a harmonically bound particle with a
//! zero-range interaction.
//!
//! The crate builds the boundary operators of the interaction on the
//! coincidence hyperplane in a truncated Hermite basis, solves the charge
//! equation for on-shell channels, evaluates amplitudes and Born-level cross
//! sections, and ships numerical checks of the limiting-absorption identities.
//!
//! Units: ħ = 1, both masses 1/2, so the oscillator Hamiltonian on each axis is
//! `-d²/du² + ω²u²/4 - ω/2` with eigenvalues `ωm`.

pub mod charge_kernel;
pub mod cli_io;
pub mod error;
pub(crate) mod heat;
pub mod greens;
pub mod lap_checks;
pub mod momentum;
pub mod oscillator;
pub mod quadrature;
pub mod scattering;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Version string embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
