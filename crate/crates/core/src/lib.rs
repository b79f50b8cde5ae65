//! Linearly ramped transverse-field XY chain, solved through its free-fermion
//! modes, with two-spin quantum Fisher information and Wigner-Yanase skew
//! information (local quantum coherence) of the evolved state.
//!
//! The pipeline runs bottom-up:
//!
//! - [`model`]: chain parameters, antiperiodic momentum grid, per-mode
//!   Hamiltonians and instantaneous eigenstates.
//! - [`evolve`]: per-mode density-matrix integration through the ramp, with
//!   optional white-noise dephasing.
//! - [`fermion_corr`]: Majorana contractions and spin correlators via Wick's
//!   theorem.
//! - [`rdm`]: two-spin X-state reduced density matrices, their spectra and
//!   square roots.
//! - [`measures`]: QFI over the local observable basis and the three LQC
//!   components.
//! - [`oracle`]: small-N exact diagonalization and noisy trajectories used to
//!   validate everything above.
//! - [`sweep`]: field and ramp-time sweeps, peak location and scaling fits.

pub mod error;
pub mod evolve;
pub mod fermion_corr;
pub mod measures;
pub mod model;
pub mod oracle;
pub mod rdm;
pub mod sweep;

mod integrator;
mod par;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
