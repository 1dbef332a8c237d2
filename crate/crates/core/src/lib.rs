//! Simulation and calibration toolkit for multi-frequency control of
//! multi-level superconducting circuits.
//!
//! Everything inside the crate works in natural units of the cubic
//! oscillator: energies in `ħω₀`, angular frequencies in `ω₀` and times in
//! `1/ω₀`. Conversions to GHz and ns happen at the boundary through
//! [`units::NaturalUnits`].
//!
//! The modules follow the physics pipeline:
//!
//! * [`model`] builds level energies and drive matrix elements, either from
//!   the Rayleigh–Schrödinger series or from a truncated-basis
//!   diagonalization used as an independent oracle.
//! * [`pulses`] describes square and Gaussian multi-tone control fields.
//! * [`dynamics`] integrates the lab-frame Schrödinger equation.
//! * [`floquet`] assembles and diagonalizes single- and two-mode Floquet
//!   Hamiltonians, including the small reduced models.
//! * [`analytics`] holds the closed-form perturbative predictions.
//! * [`optimizer`] calibrates pulse parameters by golden-section coordinate
//!   descent and drives parameter sweeps.

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod pulses;
pub mod quadrature;
pub mod units;

pub use error::{Error, Result};
pub use model::{CubicModel, JunctionParams, MatrixSource, SystemMatrices};
pub use pulses::{Envelope, EnvelopeKind, Pulse, Tone};

/// Crate version, recorded in emitted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
