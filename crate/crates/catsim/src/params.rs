//! Parameter algebra: laboratory-frame rates, dimensionless groups, the
//! steady-state coherent amplitude, and the three time conventions.
//!
//! Laboratory rates are stored as angular frequencies (rad/s). With pump
//! amplitude ε, two-photon coupling ḡ, Kerr strength χ̄, detuning Δ̄, signal
//! loss γ₁ and pump loss γ₂, the dimensionless groups are
//!
//! ```text
//! λ  = |ḡ ε| / (γ₁ γ₂)      pump relative to the oscillation threshold
//! g² = ḡ² / (2 γ₁ γ₂)       two-photon dissipation relative to signal loss
//! χ′ = χ̄ / γ₁               Kerr relative to signal loss
//! χ  = χ′ / g² = χ̄ / G²     Kerr relative to two-photon dissipation
//! Δ  = Δ̄ / γ₁               detuning relative to signal loss
//! ```
//!
//! together with the laboratory-rate combinations Λ = |ḡε|/γ₂ and
//! G² = ḡ²/(2γ₂). The steady-state coherent amplitude is the principal
//! square root α₀ = √(λ / (g²(1 + iχ))), so |α₀|² = λ/(g²√(1+χ²)) and
//! arg α₀ = −arctan(χ)/2.
//!
//! Three dimensionless time conventions are supported: τ = γ₁t,
//! T = G²t = g²τ, and 𝒯 = √(G⁴+χ̄²)·t = T√(1+χ²). The τ convention is
//! undefined for a lossless signal mode (γ₁ = 0); such parameter sets are
//! constructed through the dedicated lossless constructors and reject τ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CatsimError, Result};
use crate::util::ln_factorial;

/// Laboratory-frame rates, all angular frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Two-photon (nondegenerate three-wave) coupling ḡ.
    pub g_bar: f64,
    /// Pump drive amplitude ε.
    pub epsilon: f64,
    /// Single signal-photon damping rate γ₁.
    pub gamma1: f64,
    /// Single pump-photon damping rate γ₂.
    pub gamma2: f64,
    /// Self-Kerr strength χ̄ of the signal mode.
    pub chi_bar: f64,
    /// Signal detuning Δ̄ (may be negative).
    pub delta_bar: f64,
    /// Mean thermal occupation N of the signal reservoir.
    pub n_thermal: f64,
}

impl PhysicalParams {
    /// Validate rate signs and finiteness. `gamma1 = 0` is allowed and marks
    /// the lossless-signal path; `gamma2` must be strictly positive because
    /// the model adiabatically eliminates a decaying pump.
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("g_bar", self.g_bar),
            ("epsilon", self.epsilon),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("n_thermal", self.n_thermal),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(CatsimError::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !self.delta_bar.is_finite() {
            return Err(CatsimError::InvalidParams(format!(
                "delta_bar must be finite, got {}",
                self.delta_bar
            )));
        }
        if self.gamma2 == 0.0 {
            return Err(CatsimError::InvalidParams(
                "gamma2 must be strictly positive (adiabatic pump elimination)".into(),
            ));
        }
        Ok(())
    }

    /// Λ = |ḡ ε| / γ₂ in rad/s.
    pub fn big_lambda(&self) -> f64 {
        (self.g_bar * self.epsilon).abs() / self.gamma2
    }

    /// G² = ḡ² / (2 γ₂) in rad/s.
    pub fn big_g_squared(&self) -> f64 {
        self.g_bar * self.g_bar / (2.0 * self.gamma2)
    }

    /// Dimensionless parameter set for a lossy signal mode (γ₁ > 0).
    pub fn scaled(&self) -> Result<ScaledParams> {
        self.validate()?;
        if self.gamma1 == 0.0 {
            return Err(CatsimError::TimeConvention(
                "lossless scaling requires T or script-T time convention; \
                 use scaled_lossless()"
                    .into(),
            ));
        }
        ScaledParams::new(
            self.big_lambda() / self.gamma1,
            (self.big_g_squared() / self.gamma1).sqrt(),
            self.chi_bar / self.gamma1,
            self.delta_bar / self.gamma1,
            self.n_thermal,
        )
    }

    /// Dimensionless parameter set on the lossless-signal path (γ₁ = 0 is
    /// permitted; a positive γ₁ is simply ignored here). Only the T and 𝒯
    /// time conventions are valid for the result.
    pub fn scaled_lossless(&self) -> Result<ScaledParams> {
        self.validate()?;
        let g2 = self.big_g_squared();
        if g2 == 0.0 {
            return Err(CatsimError::InvalidParams(
                "lossless scaling requires g_bar > 0".into(),
            ));
        }
        ScaledParams::lossless(
            self.big_lambda() / g2,
            self.chi_bar / g2,
            self.delta_bar / g2,
            self.n_thermal,
        )
    }

    /// Conversion factor between one dimensionless time unit and seconds.
    pub fn time_scaling(&self, unit: TimeUnit) -> Result<TimeScaling> {
        self.validate()?;
        let g2 = self.big_g_squared();
        let rate = match unit {
            TimeUnit::Tau => {
                if self.gamma1 == 0.0 {
                    return Err(CatsimError::TimeConvention(
                        "tau = gamma1 * t is undefined for gamma1 = 0".into(),
                    ));
                }
                self.gamma1
            }
            TimeUnit::BigT => g2,
            TimeUnit::ScriptT => (g2 * g2 + self.chi_bar * self.chi_bar).sqrt(),
        };
        if rate <= 0.0 || !rate.is_finite() {
            return Err(CatsimError::InvalidParams(format!(
                "time unit {unit:?} has non-positive rate {rate}"
            )));
        }
        Ok(TimeScaling {
            unit,
            seconds_per_unit: 1.0 / rate,
        })
    }
}

/// The three dimensionless time conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeUnit {
    /// τ = γ₁ t (signal-loss units; undefined when γ₁ = 0).
    #[serde(rename = "tau")]
    Tau,
    /// T = G² t (two-photon-dissipation units).
    #[serde(rename = "T")]
    BigT,
    /// 𝒯 = √(G⁴ + χ̄²) t = T·√(1+χ²) (Kerr-corrected units).
    #[serde(rename = "script-T")]
    ScriptT,
}

impl std::fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TimeUnit::Tau => "tau",
            TimeUnit::BigT => "T",
            TimeUnit::ScriptT => "script-T",
        };
        f.write_str(s)
    }
}

/// A time convention together with its conversion factor to seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeScaling {
    /// Which convention this is.
    pub unit: TimeUnit,
    /// Seconds corresponding to one dimensionless time unit.
    pub seconds_per_unit: f64,
}

impl TimeScaling {
    /// Dimensionless time -> seconds.
    pub fn to_seconds(&self, value: f64) -> f64 {
        value * self.seconds_per_unit
    }

    /// Seconds -> dimensionless time.
    pub fn from_seconds(&self, seconds: f64) -> f64 {
        seconds / self.seconds_per_unit
    }
}

/// Dimensionless parameter set of the master equation.
///
/// Canonical storage keeps only quantities that stay finite on the lossless
/// path: the T-convention pump λ/g², the Kerr ratio χ, the T-convention
/// detuning Δ/g², the thermal occupation N, plus λ and g themselves for the
/// lossy case (`g` is `f64::INFINITY` on the lossless path, where λ, χ′ and
/// Δ are not individually meaningful).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledParams {
    lambda: f64,
    g: f64,
    pump_t: f64,
    chi: f64,
    delta_t: f64,
    n_thermal: f64,
}

impl ScaledParams {
    /// Lossy constructor from (λ, g, χ′, Δ, N), all relative to γ₁.
    pub fn new(lambda: f64, g: f64, chi_prime: f64, delta: f64, n_thermal: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("g", g), ("n_thermal", n_thermal)] {
            if !v.is_finite() || v < 0.0 {
                return Err(CatsimError::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if g == 0.0 {
            return Err(CatsimError::InvalidParams(
                "g must be strictly positive".into(),
            ));
        }
        if !chi_prime.is_finite() || !delta.is_finite() {
            return Err(CatsimError::InvalidParams(
                "chi_prime and delta must be finite".into(),
            ));
        }
        let g2 = g * g;
        Ok(Self {
            lambda,
            g,
            pump_t: lambda / g2,
            chi: chi_prime / g2,
            delta_t: delta / g2,
            n_thermal,
        })
    }

    /// Lossy constructor pinned to a target steady amplitude: given g, χ and
    /// |α₀|, sets λ = |α₀|²·g²·√(1+χ²).
    pub fn from_g_alpha0(
        g: f64,
        alpha0_abs: f64,
        chi: f64,
        delta: f64,
        n_thermal: f64,
    ) -> Result<Self> {
        if !alpha0_abs.is_finite() || alpha0_abs < 0.0 {
            return Err(CatsimError::InvalidParams(format!(
                "alpha0_abs must be finite and non-negative, got {alpha0_abs}"
            )));
        }
        if !g.is_finite() || g <= 0.0 {
            return Err(CatsimError::InvalidParams(format!(
                "g must be finite and strictly positive, got {g}"
            )));
        }
        let g2 = g * g;
        let lambda = alpha0_abs * alpha0_abs * g2 * (1.0 + chi * chi).sqrt();
        Self::new(lambda, g, chi * g2, delta, n_thermal)
    }

    /// Lossless constructor (γ₁ = 0). Arguments are the T-convention pump
    /// Λ/G², the Kerr ratio χ = χ̄/G², and the T-convention detuning Δ̄/G².
    pub fn lossless(pump_t: f64, chi: f64, delta_t: f64, n_thermal: f64) -> Result<Self> {
        for (name, v) in [("pump_t", pump_t), ("n_thermal", n_thermal)] {
            if !v.is_finite() || v < 0.0 {
                return Err(CatsimError::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !chi.is_finite() || !delta_t.is_finite() {
            return Err(CatsimError::InvalidParams(
                "chi and delta_t must be finite".into(),
            ));
        }
        Ok(Self {
            lambda: if pump_t > 0.0 { f64::INFINITY } else { 0.0 },
            g: f64::INFINITY,
            pump_t,
            chi,
            delta_t,
            n_thermal,
        })
    }

    /// Lossless constructor pinned to a target steady amplitude |α₀| with
    /// Kerr ratio χ: pump_t = |α₀|²·√(1+χ²).
    pub fn lossless_from_alpha0(
        alpha0_abs: f64,
        chi: f64,
        delta_t: f64,
        n_thermal: f64,
    ) -> Result<Self> {
        if !alpha0_abs.is_finite() || alpha0_abs < 0.0 {
            return Err(CatsimError::InvalidParams(format!(
                "alpha0_abs must be finite and non-negative, got {alpha0_abs}"
            )));
        }
        Self::lossless(
            alpha0_abs * alpha0_abs * (1.0 + chi * chi).sqrt(),
            chi,
            delta_t,
            n_thermal,
        )
    }

    /// Whether this parameter set lives on the lossless-signal path.
    pub fn is_lossless(&self) -> bool {
        !self.g.is_finite()
    }

    /// Dimensionless pump λ (infinite on the lossless path when pumped).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Dimensionless two-photon rate g (infinite on the lossless path).
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Kerr-to-two-photon ratio χ = χ′/g², finite on both paths.
    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Dimensionless Kerr χ′ = χ·g² (infinite on the lossless path if χ≠0).
    pub fn chi_prime(&self) -> f64 {
        if self.is_lossless() {
            if self.chi == 0.0 {
                0.0
            } else {
                f64::INFINITY * self.chi.signum()
            }
        } else {
            self.chi * self.g * self.g
        }
    }

    /// Dimensionless detuning Δ (infinite on the lossless path if Δ_T≠0).
    pub fn delta(&self) -> f64 {
        if self.is_lossless() {
            if self.delta_t == 0.0 {
                0.0
            } else {
                f64::INFINITY * self.delta_t.signum()
            }
        } else {
            self.delta_t * self.g * self.g
        }
    }

    /// T-convention pump λ/g² = Λ/G², finite on both paths.
    pub fn pump_t(&self) -> f64 {
        self.pump_t
    }

    /// T-convention detuning Δ/g² = Δ̄/G², finite on both paths.
    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    /// 1/g², zero on the lossless path; the weight of the single-photon
    /// thermal terms in the T convention.
    pub fn inv_g_squared(&self) -> f64 {
        if self.is_lossless() {
            0.0
        } else {
            1.0 / (self.g * self.g)
        }
    }

    /// Mean thermal occupation N of the signal reservoir.
    pub fn n_thermal(&self) -> f64 {
        self.n_thermal
    }

    /// Steady-state coherent amplitude α₀ = √(λ/(g²(1+iχ))), principal root:
    /// |α₀|² = λ/(g²√(1+χ²)), arg α₀ = −arctan(χ)/2.
    pub fn alpha0(&self) -> Complex64 {
        let magnitude = (self.pump_t / (1.0 + self.chi * self.chi).sqrt()).sqrt();
        let phase = -0.5 * self.chi.atan();
        Complex64::from_polar(magnitude, phase)
    }

    /// Above the oscillation threshold λ > 1. On the lossless path any
    /// non-zero pump is above threshold.
    pub fn above_threshold(&self) -> bool {
        self.lambda > 1.0
    }
}

/// Convert a dimensionless time between conventions. The T convention is
/// used as the hub, so conversions between T and 𝒯 stay valid on the
/// lossless path; any conversion touching τ requires a lossy parameter set.
pub fn convert_time(value: f64, from: TimeUnit, to: TimeUnit, p: &ScaledParams) -> Result<f64> {
    if from == to {
        return Ok(value);
    }
    let reject_tau = |unit: TimeUnit| -> Result<()> {
        if unit == TimeUnit::Tau && p.is_lossless() {
            return Err(CatsimError::TimeConvention(
                "tau is undefined for a lossless parameter set".into(),
            ));
        }
        Ok(())
    };
    reject_tau(from)?;
    reject_tau(to)?;
    let root = (1.0 + p.chi() * p.chi()).sqrt();
    let in_big_t = match from {
        TimeUnit::Tau => value * p.g() * p.g(),
        TimeUnit::BigT => value,
        TimeUnit::ScriptT => value / root,
    };
    Ok(match to {
        TimeUnit::Tau => in_big_t / (p.g() * p.g()),
        TimeUnit::BigT => in_big_t,
        TimeUnit::ScriptT => in_big_t * root,
    })
}

/// Suggest a Fock cutoff for a run whose state stays near coherent
/// amplitudes of modulus |α₀|: the smallest N_c such that a coherent state
/// of that amplitude keeps Poisson tail mass Σ_{n≥N_c} below `tail_tol`,
/// floored at 8 and at ⌈|α₀|²+|α₀|⌉.
pub fn suggest_cutoff_with_tail(alpha0: Complex64, tail_tol: f64) -> usize {
    let a = alpha0.norm();
    assert!(
        a.is_finite() && a <= 55.0,
        "suggest_cutoff: |alpha0| = {a} outside supported range [0, 55]"
    );
    assert!(
        tail_tol > 0.0 && tail_tol < 1.0,
        "suggest_cutoff: tail_tol must lie in (0, 1)"
    );
    let mu = a * a;
    let floor = 8usize.max((mu + a).ceil() as usize);
    if mu == 0.0 {
        return floor;
    }
    let mut n = floor.max(mu.ceil() as usize);
    while poisson_tail(mu, n) >= tail_tol {
        n += 1;
    }
    n.max(floor)
}

/// [`suggest_cutoff_with_tail`] at the default tail tolerance 1e-10.
pub fn suggest_cutoff(alpha0: Complex64) -> usize {
    suggest_cutoff_with_tail(alpha0, 1e-10)
}

/// Poisson upper tail P(X ≥ n) for X ~ Poisson(mu), by direct log-space
/// summation; accurate to ~1e-15 relative for the ranges used here.
pub fn poisson_tail(mu: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if mu == 0.0 {
        return 0.0;
    }
    let ln_mu = mu.ln();
    let mut sum = 0.0f64;
    let mut k = n;
    loop {
        let term = (k as f64 * ln_mu - mu - ln_factorial(k)).exp();
        sum += term;
        // Terms decay geometrically once k > mu; stop when they no longer
        // contribute at f64 resolution.
        if k as f64 > mu && term < sum * 1e-18 + 1e-320 {
            break;
        }
        k += 1;
    }
    sum.min(1.0)
}
