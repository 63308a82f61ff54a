//! Error type shared across the library.

use thiserror::Error;

/// Library-wide error enumeration.
#[derive(Debug, Error)]
pub enum CatsimError {
    /// Parameter validation failed (negative rates, non-finite input, ...).
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// An operation required a finite single-photon loss rate but the
    /// parameter set is lossless (γ₁ = 0), or vice versa.
    #[error("time-convention error: {0}")]
    TimeConvention(String),

    /// Two objects that must share a Fock cutoff do not.
    #[error("cutoff mismatch: expected {expected}, got {got}")]
    CutoffMismatch { expected: usize, got: usize },

    /// A runtime invariant monitor (trace, Hermiticity, tail occupancy)
    /// exceeded its tolerance during propagation.
    #[error(
        "monitor breach at t = {time:.6e}: {monitor} = {value:.3e} exceeds tolerance {tol:.3e}{advice}"
    )]
    MonitorBreach {
        monitor: &'static str,
        time: f64,
        value: f64,
        tol: f64,
        advice: String,
    },

    /// Requested evaluation point lies outside the certified numerical
    /// stability envelope of an algorithm.
    #[error("stability envelope exceeded: {0}")]
    StabilityEnvelope(String),

    /// A computation produced NaN or infinity where a finite value is
    /// required.
    #[error("non-finite result: {0}")]
    NonFinite(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk data (snapshot files, manifests).
    #[error("format error: {0}")]
    Format(String),
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, CatsimError>;
