//! Forward simulation and inverse reconstruction for THz-streaking-assisted
//! photoionization spectroscopy.
//!
//! The crate is organised along the processing chain:
//!
//! * [`units`] and [`fields`]: atomic-unit conversions and the XUV / THz probe
//!   waveforms, with the THz vector potential locked to zero at the XUV center.
//! * [`system`] and [`dynamics`]: the bound multilevel system, deterministic and
//!   quantum-jump propagation of its amplitudes, and a Lindblad oracle.
//! * [`sfa`]: strong-field-approximation amplitudes and ensemble spectrograms
//!   w(p; τ) by direct quadrature.
//! * [`model`]: the closed-form Gaussian-peak description of the streaked
//!   spectrum.
//! * [`reconstruction`]: recovery of ρ_ij(τ) from a THz-off / THz-on pair of
//!   spectrograms, and single-delay phase readout.
//!
//! All internal quantities are Hartree atomic units.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beat;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod model;
pub mod reconstruction;
pub mod sfa;
pub mod spectrogram;
pub mod system;
pub mod units;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
