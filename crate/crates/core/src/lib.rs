//! Simulation and analysis of polarization-entangled photon pairs from a
//! Sagnac down-conversion source.
//!
//! The crate is organised bottom-up:
//!
//! - [`qstate`]: two-qubit density matrices in the fixed `(HH, HV, VH, VV)`
//!   basis, Bell-phase and X-state families, concurrence, fidelity, phase.
//! - [`polarimetry`]: analyzer angles, waveplates, and the 16-setting
//!   tomography table.
//! - [`source`]: pump spatial profiles, wavefront-distortion maps and the
//!   resulting spatial mixture, plus multimode-fiber mode counts.
//! - [`counting`]: Born probabilities to coincidence rates, Poisson shot
//!   noise and accidental-coincidence subtraction.
//! - [`analysis`]: fringe fitting, CHSH, tomography (linear and
//!   maximum-likelihood) and bootstrap uncertainties.

// `!(x > 0.0)` is used on purpose so NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod counting;
mod error;
pub mod linalg;
pub mod polarimetry;
pub mod qstate;
pub mod source;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
