//! Numerical toolkit for quantum arrival, crossing and dwell times.
//!
//! The crate is organised around a set of cross-validating routes to the same
//! physical quantities: closed-form propagators and their compositions
//! ([`propagators`]), pulsed-measurement amplitudes and their continuous
//! absorbing-potential counterpart ([`pulsed`]), arrival-time distributions
//! ([`arrival`]), class operators and decoherence functionals ([`histories`]),
//! open-system phase-space evolution ([`opensys`]), model clocks ([`clocks`]),
//! and a brute-force spectral grid engine ([`engine`]) that serves as the
//! independent oracle for all of them.
//!
//! Units are natural (`hbar = 1`) throughout except where a [`phys::PhysParams`]
//! carries an explicit `hbar` for the open-system formulas.

pub mod acceptance;
pub mod arrival;
pub mod clocks;
pub mod engine;
pub mod histories;
pub mod opensys;
pub mod phase_space;
pub mod phys;
pub mod propagators;
pub mod pulsed;
pub mod quad;
pub mod special;

pub use phys::{GaussianPacket, PhysParams, TimeGrid};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature did not converge: estimated error {estimate:e} above {tolerance:e}")]
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },
    #[error("grid resolution insufficient: {0}")]
    GridResolution(String),
    #[error("spatial domain too small: truncated tail mass {tail_mass:e}")]
    DomainTooSmall { tail_mass: f64 },
    #[error("smearing matrix not positive semidefinite for s = {s}; admissible range [{s_min}, {s_max}]")]
    NotPositiveSemidefinite { s: f64, s_min: f64, s_max: f64 },
    #[error("operator not Hermitian after symmetrization: residual {0:e}")]
    NotHermitian(f64),
    #[error("sub-stepping too coarse: {0}")]
    StepTooCoarse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
