//! Simulation library for cat-state generation in a degenerate parametric
//! oscillator with two-photon driving and two-photon dissipation.
//!
//! The library propagates the Lindblad master equation for the signal mode in
//! a truncated Fock (number-state) basis and computes the phase-space and
//! quadrature signatures used to certify Schrödinger-cat states:
//!
//! * [`params`] — physical rates, dimensionless parameter groups
//!   (λ, g, χ′, χ, Δ), the steady-state amplitude α₀, and the three
//!   dimensionless time conventions (τ, T, 𝒯).
//! * [`fock`] — density matrices over the truncated number basis, reference
//!   states (vacuum, Fock, coherent), and self-check diagnostics.
//! * [`liouvillian`] — the master-equation superoperator as an explicit
//!   sparse coefficient table plus an equivalent matrix-free fast path.
//! * [`propagator`] — fixed-step RK4 evolution with trace/tail/Hermiticity
//!   monitors, snapshot scheduling, and a two-cutoff convergence audit.
//! * [`persist`] — binary snapshot files (text header plus little-endian
//!   records) with sidecar offset manifests.
//! * [`orthopoly`] — numerically stable kernels: weighted Hermite functions,
//!   Clenshaw summation for Hermite and associated Laguerre series, Horner
//!   power series, and log-scaled magnitudes.
//! * [`signatures`] — rotated quadrature distributions, photon statistics,
//!   purity, Husimi Q, two independent Wigner evaluators, and Wigner
//!   negativity under two quadrature schemes.
//! * [`analytic`] — closed-form references: ideal even/odd cats, coherent
//!   mixtures, their Wigner/quadrature/purity formulas, and the steady-state
//!   mixture of the driven-dissipative model.
//! * [`metrics`] — cat formation time, lifetime, fringe visibility, peak
//!   separation, and the combined cat verdict.

pub mod analytic;
pub mod error;
pub mod fock;
pub mod liouvillian;
pub mod metrics;
pub mod orthopoly;
pub mod params;
pub mod persist;
pub mod propagator;
pub mod signatures;
pub mod util;

pub use error::{CatsimError, Result};
pub use fock::FockDensityMatrix;
pub use params::{PhysicalParams, ScaledParams, TimeScaling, TimeUnit};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
