use thiserror::Error;

/// Errors raised by the cross-section library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kinematically forbidden: scattered energy {e_q} keV exceeds beam energy {k} keV")]
    KinematicallyForbidden { e_q: f64, k: f64 },

    /// The delta-constraint Jacobian vanished at a root (tangent meridian).
    #[error("degenerate root at u = {u} (|g'|/P = {slope:e})")]
    DegenerateRoot { u: f64, slope: f64 },

    #[error("quadrature failed to reach tolerance {tol:e} within {max_subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure {
        tol: f64,
        max_subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("spectrum grid too coarse: step {step} keV vs node spacing {spacing} keV")]
    InsufficientResolution { step: f64, spacing: f64 },

    #[error("regularised integral did not converge: relative change {relative_change:e} under width halving")]
    OracleUnconverged { relative_change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
