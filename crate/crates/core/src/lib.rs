//! Diffusion in channels of varying cross-section.
//!
//! The Fick-Jacobs equation `∂C/∂t = ∂/∂x [D A ∂/∂x (C/A)]` is solved three
//! independent ways:
//!
//! * [`analytic`]: closed forms for conical, throat-like, sinusoidal and
//!   Gaussian-area channels, obtained by conjugating the generator to a
//!   Schrödinger operator `P² + V`;
//! * [`spectral`]: an eigenfunction expansion of that Schrödinger operator on a
//!   truncated interval, for arbitrary geometry and diffusion models;
//! * [`fdsolver`]: a flux-conservative Crank–Nicolson scheme in the original
//!   variable that never touches the mapping, used as the reference.
//!
//! [`mapping`] holds the change of variable `y = ∫ dz/√D`, the drift
//! function `f`, the transformed potential and the partner-potential
//! construction; [`scenario`] drives the `fickjacobs` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analytic;
pub mod error;
pub mod fdsolver;
pub mod field;
pub mod geometry;
pub mod interp;
pub mod mapping;
pub mod quadrature;
pub mod scenario;
pub mod spectral;
pub mod tridiag;

pub use error::{Error, Result};
pub use field::{error_norms, total_mass, ConcentrationField, ErrorNorms};
pub use geometry::{ChannelProfile, DiffusionModel, Domain, Family};
pub use mapping::SchrodingerMap;
pub use spectral::SpectralBasis;
