//! Simulation engine for back-action evading (BAE) measurements of a
//! mechanical quadrature in a cavity optomechanical system driven by
//! multi-tone fields.
//!
//! The crate is split by subsystem:
//!
//! - [`model`]: physical parameters, unit conversion and validation.
//! - [`drive`]: drive tones, intracavity envelopes, energy harmonics and the
//!   harmonic-cancelling multitone family.
//! - [`stability`]: Floquet analysis of the energy-induced mechanical
//!   frequency modulation.
//! - [`filter`]: reduced Gaussian conditional-moment filter for the
//!   continuously measured quadrature.
//! - [`sme`]: truncated Hilbert space stochastic master equation for the
//!   full cavity plus mechanics system.
//! - [`acceptance`]: the end-to-end verification criteria, shared by the
//!   test suite and the CLI.
//!
//! All dynamics run in dimensionless units where the mechanical frequency is
//! one, so time is measured in units of `1/Ω_m`.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod drive;
pub mod error;
pub mod filter;
pub mod model;
pub mod ode;
pub mod rng;
pub mod sme;
pub mod stability;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
