//! Photon emission/absorption correlations across a one-dimensional tunnel
//! barrier in the Wigner-Weisskopf approximation, in natural units `c = hbar = 1`.
//!
//! The pieces build on each other: [`scattering`] gives transmission and
//! reflection of piecewise-constant barriers, [`amplitude`] the field kernel and
//! transition amplitudes, [`spectral`] the sampled numeric field, and
//! [`correlation`] the joint detection probability, its density and the delta line.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod amplitude;
pub mod cli;
pub mod config;
pub mod correlation;
pub mod error;
pub mod output;
pub mod quadrature;
pub mod scattering;
pub mod spectral;
pub mod validate;

pub use amplitude::{AmplitudeMode, Geometry, Model, SourceParams};
pub use config::RunConfig;
pub use correlation::{fill_grid, Axis, CorrelationGrid, DeltaLine};
pub use error::{Error, Result};
pub use quadrature::{IntegralResult, QuadratureConfig};
pub use scattering::{BarrierProfile, ScatteringCoefficients, Segment, TransferMatrix};
