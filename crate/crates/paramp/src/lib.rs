//! Two-arm microwave interferometer with a parametric amplifier in each arm.
//!
//! The crate covers truncated Fock-space algebra ([`fock`]), unitary and
//! Lindblad propagation ([`dynamics`]), the full and reduced interferometer
//! pipelines ([`interferometer`]), the lossy-amplifier fit ([`lossmodel`]),
//! mid-amplifier collapse models ([`collapse`]) and closed-form oracles
//! ([`analytic`]).

pub mod analytic;
pub mod collapse;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod interferometer;
pub mod lossmodel;
pub mod quadrature;
pub mod special;

pub use error::{Error, ErrorCategory, Result};
pub use num_complex::Complex64 as C64;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
