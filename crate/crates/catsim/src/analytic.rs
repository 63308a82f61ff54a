//! Closed-form reference states and observables: ideal even/odd cat
//! states, coherent-state mixtures, their Wigner and quadrature formulas,
//! and the approximate steady state of the driven dissipative oscillator.
//!
//! Everything here is an independent reference path: no propagation, no
//! series evaluation beyond coherent-state expansions, so these values
//! cross-check the numerical signature evaluators.

use num_complex::Complex64;

use crate::error::{CatsimError, Result};
use crate::fock::{coherent_vector, FockDensityMatrix};
use crate::params::ScaledParams;

/// Photon-number parity of a cat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Specification of an ideal coherent-state superposition
/// 𝒩_±(|α₀⟩ ± |−α₀⟩).
#[derive(Debug, Clone, Copy)]
pub struct IdealCatSpec {
    pub alpha0: Complex64,
    pub parity: Parity,
}

impl IdealCatSpec {
    pub fn even(alpha0: Complex64) -> Self {
        Self {
            alpha0,
            parity: Parity::Even,
        }
    }

    pub fn odd(alpha0: Complex64) -> Self {
        Self {
            alpha0,
            parity: Parity::Odd,
        }
    }

    /// Normalization 𝒩_± = [2(1 ± e^{−2|α₀|²})]^{−1/2}.
    pub fn normalization(&self) -> f64 {
        let e = (-2.0 * self.alpha0.norm_sqr()).exp();
        match self.parity {
            Parity::Even => 1.0 / (2.0 * (1.0 + e)).sqrt(),
            Parity::Odd => 1.0 / (2.0 * (1.0 - e)).sqrt(),
        }
    }
}

/// Density matrix of the ideal cat state in a truncated basis. The trace
/// falls short of 1 only by the Poisson tail beyond the cutoff.
pub fn cat_density(spec: &IdealCatSpec, cutoff: usize) -> Result<FockDensityMatrix> {
    if spec.parity == Parity::Odd && spec.alpha0.norm() < 1e-12 {
        return Err(CatsimError::InvalidParams(
            "odd cat state is undefined at alpha0 = 0".into(),
        ));
    }
    let n = spec.normalization();
    let plus = coherent_vector(cutoff, spec.alpha0)?;
    let minus = coherent_vector(cutoff, -spec.alpha0)?;
    let sign = match spec.parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let psi: Vec<Complex64> = plus
        .iter()
        .zip(minus.iter())
        .map(|(a, b)| n * (a + sign * b))
        .collect();
    density_from_state(&psi)
}

/// P₊|α₀⟩⟨α₀| + (1−P₊)|−α₀⟩⟨−α₀| in a truncated basis.
pub fn mixture_density(
    alpha0: Complex64,
    p_plus: f64,
    cutoff: usize,
) -> Result<FockDensityMatrix> {
    if !(0.0..=1.0).contains(&p_plus) {
        return Err(CatsimError::InvalidParams(format!(
            "mixture weight p_plus = {p_plus} must lie in [0, 1]"
        )));
    }
    let plus = coherent_vector(cutoff, alpha0)?;
    let minus = coherent_vector(cutoff, -alpha0)?;
    let mut data = ndarray::Array2::<Complex64>::zeros((cutoff, cutoff));
    for i in 0..cutoff {
        for j in 0..cutoff {
            data[[i, j]] = p_plus * plus[i] * plus[j].conj()
                + (1.0 - p_plus) * minus[i] * minus[j].conj();
        }
    }
    let mut rho = FockDensityMatrix::from_matrix(data)?;
    rho.normalize()?;
    Ok(rho)
}

fn density_from_state(psi: &[Complex64]) -> Result<FockDensityMatrix> {
    let n = psi.len();
    let mut data = ndarray::Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            data[[i, j]] = psi[i] * psi[j].conj();
        }
    }
    FockDensityMatrix::from_matrix(data)
}

/// Closed-form Wigner function of the ideal cat state at a phase-space
/// point: two coherent Gaussians plus the interference fringe term,
///
/// ```text
/// W_±(α) = (2/π) 𝒩_±² [e^{−2|α−α₀|²} + e^{−2|α+α₀|²}
///                       ± 2 e^{−2|α|²} cos(4 a Im(e^{−iφ}α))]
/// ```
///
/// with α₀ = a e^{iφ}; the general complex case is the real-amplitude
/// formula evaluated in the frame rotated by φ.
pub fn ideal_cat_wigner(spec: &IdealCatSpec, alpha: Complex64) -> f64 {
    let a = spec.alpha0.norm();
    let phi = if a > 0.0 { spec.alpha0.arg() } else { 0.0 };
    let z = alpha * Complex64::from_polar(1.0, -phi);
    let n2 = spec.normalization().powi(2);
    let g_plus = (-2.0 * ((z.re - a).powi(2) + z.im * z.im)).exp();
    let g_minus = (-2.0 * ((z.re + a).powi(2) + z.im * z.im)).exp();
    let fringe = 2.0 * (-2.0 * z.norm_sqr()).exp() * (4.0 * a * z.im).cos();
    let sign = match spec.parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    (2.0 / std::f64::consts::PI) * n2 * (g_plus + g_minus + sign * fringe)
}

/// Closed-form quadrature distribution of the ideal cat state along the
/// fringe direction (the quadrature rotated by arg(α₀) + π/2):
///
/// ```text
/// P_±(p) = (2 𝒩_±² / √π) e^{−p²} (1 ± cos(2√2 p a)),   a = |α₀|.
/// ```
pub fn ideal_cat_pquad(spec: &IdealCatSpec, p: f64) -> f64 {
    let a = spec.alpha0.norm();
    let n2 = spec.normalization().powi(2);
    let sign = match spec.parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    (2.0 * n2 / std::f64::consts::PI.sqrt())
        * (-p * p).exp()
        * (1.0 + sign * (2.0 * std::f64::consts::SQRT_2 * p * a).cos())
}

/// Weight of the even-cat component in the approximate steady state,
/// P_ss = (1 + e^{−2|α₀|²}) / (e^{2|α₀|²} + e^{−2|α₀|²}).
pub fn steady_state_cat_weight(alpha0_abs: f64) -> f64 {
    let s = 2.0 * alpha0_abs * alpha0_abs;
    (1.0 + (-s).exp()) / (s.exp() + (-s).exp())
}

/// Approximate steady state of the dissipative oscillator above
/// threshold: an even-cat component of weight P_ss on top of the balanced
/// coherent mixture. Valid in the low single-photon-loss regime; the
/// formula is stated for pump strengths g > 1.
pub fn steady_state(params: &ScaledParams, cutoff: usize) -> Result<FockDensityMatrix> {
    let g = params.g();
    if !(g > 1.0) {
        return Err(CatsimError::InvalidParams(format!(
            "steady-state formula applies to pump amplitudes g > 1, got g = {g}"
        )));
    }
    let alpha0 = params.alpha0();
    let p_cat = steady_state_cat_weight(alpha0.norm());
    let cat = cat_density(&IdealCatSpec::even(alpha0), cutoff)?;
    let mix = mixture_density(alpha0, 0.5, cutoff)?;
    let mut data = cat.into_inner();
    let mix_data = mix.data();
    for i in 0..cutoff {
        for j in 0..cutoff {
            data[[i, j]] = p_cat * data[[i, j]] + (1.0 - p_cat) * mix_data[[i, j]];
        }
    }
    FockDensityMatrix::from_matrix(data)
}
