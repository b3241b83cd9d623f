//! Linear, unconditionally energy-stable SAV-GL time integrators for
//! gradient flows on periodic square domains.
//!
//! * [`tableau`] holds general linear time discretizations and their
//!   stability and order verifiers.
//! * [`models`] describes the gradient flows: Allen–Cahn, Cahn–Hilliard and
//!   phase-field crystal.
//! * [`spectral`] is the Fourier pseudo-spectral layer.
//! * [`stepper`] advances the fully discrete SAV-GL scheme.

pub mod error;
pub mod linalg;
pub mod models;
pub mod spectral;
pub mod stepper;
pub mod tableau;

pub use error::{Error, Result};
