//! Numerically stable kernels for phase-space and quadrature signatures:
//! weighted Hermite functions, Clenshaw-summed Hermite and associated
//! Laguerre series, and Horner power series.
//!
//! The weighted Hermite functions
//!
//! ```text
//! h_n(x) = H_n(x) e^{−x²/2} / √(2ⁿ n! √π)
//! ```
//!
//! are the position representation ⟨x|n⟩ of the number states. They obey
//! h_{n+1} = x√(2/(n+1))·h_n − √(n/(n+1))·h_{n−1} with O(1) values in the
//! oscillatory region, which makes the three-term recurrence and its
//! Clenshaw adjoint stable once intermediate magnitudes are guarded by a
//! power-of-two shift ledger (see [`LogScaledValue`] for the scalar form).
//!
//! The scaled associated Laguerre functions
//!
//! ```text
//! E_n^l(z) = √(n!/(n+l)!) L_n^l(z) z^{l/2} e^{−z/2}
//! ```
//!
//! are displacement-operator matrix-element magnitudes, hence |E| ≤ 1
//! everywhere; series in them evaluate Wigner functions far beyond where
//! raw Laguerre polynomials overflow.

use num_complex::Complex64;

use crate::error::{CatsimError, Result};
use crate::util::ln_factorial;

/// Largest Hermite index the recurrences are certified for.
pub const HERMITE_MAX_N: usize = 600;

/// Magnitude threshold that triggers a rescale of Clenshaw accumulators.
const RESCALE_LIMIT: f64 = 1e250;
const RESCALE_FACTOR: f64 = 1e-250;
const LN_RESCALE: f64 = 575.6462732485115; // ln(1e250)

/// A real value carried as sign · exp(log_magnitude), for quantities whose
/// dynamic range exceeds f64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaledValue {
    sign: i8,
    log_magnitude: f64,
}

impl LogScaledValue {
    /// Zero.
    pub fn zero() -> Self {
        Self {
            sign: 0,
            log_magnitude: f64::NEG_INFINITY,
        }
    }

    /// From sign and natural-log magnitude.
    pub fn from_sign_ln(sign: i8, log_magnitude: f64) -> Self {
        if sign == 0 {
            Self::zero()
        } else {
            Self {
                sign: sign.signum(),
                log_magnitude,
            }
        }
    }

    /// From an ordinary finite value.
    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self::zero()
        } else {
            Self {
                sign: if v > 0.0 { 1 } else { -1 },
                log_magnitude: v.abs().ln(),
            }
        }
    }

    /// Sign in {−1, 0, +1}.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Natural log of |value| (−∞ for zero).
    pub fn log_magnitude(&self) -> f64 {
        self.log_magnitude
    }

    /// Collapse to f64 (0 on underflow, ±∞ on overflow).
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.log_magnitude.exp()
    }

    /// Product.
    pub fn mul(&self, other: &Self) -> Self {
        if self.sign == 0 || other.sign == 0 {
            Self::zero()
        } else {
            Self {
                sign: self.sign * other.sign,
                log_magnitude: self.log_magnitude + other.log_magnitude,
            }
        }
    }

    /// Multiply by an ordinary value.
    pub fn mul_value(&self, v: f64) -> Self {
        self.mul(&Self::from_value(v))
    }
}

/// Weighted Hermite function h_n(x) = ⟨x|n⟩ with the Gaussian weight
/// folded in. Stable for n ≤ 600 and |x| ≤ 40; deep-tail values that fall
/// below f64 range return 0, never Inf/NaN.
pub fn hermite_weighted(n: usize, x: f64) -> Result<f64> {
    if n > HERMITE_MAX_N {
        return Err(CatsimError::StabilityEnvelope(format!(
            "hermite_weighted: n = {n} exceeds supported maximum {HERMITE_MAX_N}"
        )));
    }
    if !x.is_finite() {
        return Err(CatsimError::InvalidParams(format!(
            "hermite_weighted: x = {x} is not finite"
        )));
    }
    // Run the bounded recurrence on v_n = h_n(x)·e^{shift}: the seed
    // Gaussian may underflow, so it starts as v_0 = pi^{-1/4}, shift
    // = -x^2/2, and the ledger keeps |v| inside f64 range throughout.
    let mut shift = -0.5 * x * x;
    let mut prev = std::f64::consts::PI.powf(-0.25);
    if n == 0 {
        return Ok(sign_exp(prev, shift));
    }
    let mut curr = x * std::f64::consts::SQRT_2 * prev;
    for k in 1..n {
        let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * curr
            - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = curr;
        curr = next;
        let mag = prev.abs().max(curr.abs());
        if mag > RESCALE_LIMIT {
            prev *= RESCALE_FACTOR;
            curr *= RESCALE_FACTOR;
            shift += LN_RESCALE;
        } else if mag > 0.0 && mag < RESCALE_FACTOR {
            prev /= RESCALE_FACTOR;
            curr /= RESCALE_FACTOR;
            shift -= LN_RESCALE;
        }
    }
    Ok(sign_exp(curr, shift))
}

/// v·e^{shift} without transient overflow: underflows to 0, and the
/// envelope guarantees the true magnitude fits in f64.
fn sign_exp(v: f64, shift: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let m = v.abs().ln() + shift;
    if m < -745.0 {
        0.0
    } else {
        v.signum() * m.exp()
    }
}

/// Σ_n c_n e^{−iθn} h_n(x) by the Clenshaw algorithm on the weighted
/// Hermite recurrence. The rotation phase is folded into the recurrence
/// coefficients, and accumulator rescaling keeps the backward sweep finite
/// even deep in the Gaussian tail where h_0(x) underflows.
pub fn clenshaw_hermite_sum(coeffs: &[Complex64], x: f64, theta: f64) -> Complex64 {
    if coeffs.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    // phi_n = e^{−iθn} h_n obeys phi_{n+1} = A_n phi_n + B_n phi_{n−1}
    // with A_n = x√(2/(n+1)) e^{−iθ} and B_n = −√(n/(n+1)) e^{−2iθ}.
    let rot = Complex64::from_polar(1.0, -theta);
    let rot2 = rot * rot;
    let n_top = coeffs.len() - 1;
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    let mut shift = 0.0f64;
    for k in (1..=n_top).rev() {
        let a_k = rot * (x * (2.0 / (k as f64 + 1.0)).sqrt());
        let b_k1 = -rot2 * ((k as f64 + 1.0) / (k as f64 + 2.0)).sqrt();
        let b = coeffs[k] * (-shift).exp() + a_k * b1 + b_k1 * b2;
        b2 = b1;
        b1 = b;
        let mag = b1.norm_sqr().max(b2.norm_sqr());
        if mag > RESCALE_LIMIT * RESCALE_LIMIT {
            b1 *= RESCALE_FACTOR;
            b2 *= RESCALE_FACTOR;
            shift += LN_RESCALE;
        }
    }
    // S = b_0 · h_0(x) · e^{shift} with b_0 = c_0·e^{−shift} + A_0 b1 + B_1 b2.
    let a_0 = rot * (x * std::f64::consts::SQRT_2);
    let b_1 = -rot2 * (1.0 / 2.0f64).sqrt();
    let b0 = coeffs[0] * (-shift).exp() + a_0 * b1 + b_1 * b2;
    let ln_h0 = -0.5 * x * x - 0.25 * std::f64::consts::PI.ln();
    let mag = b0.norm();
    if mag == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = mag.ln() + shift + ln_h0;
    if m < -745.0 {
        Complex64::new(0.0, 0.0)
    } else {
        (b0 / mag) * m.exp()
    }
}

/// Σ_n w_n L_n^l(z): plain associated-Laguerre series by Clenshaw on the
/// raw recurrence, with accumulator rescaling. Intended for moderate z and
/// order; the scaled variant below is the one with the wide envelope.
pub fn laguerre_clenshaw(l: usize, weights: &[Complex64], z: f64) -> Complex64 {
    assert!(z >= 0.0, "laguerre_clenshaw: z must be non-negative");
    if weights.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let lf = l as f64;
    let n_top = weights.len() - 1;
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    let mut shift = 0.0f64;
    // L_{k+1} = A_k L_k + B_k L_{k−1}: A_k = (2k+l+1−z)/(k+1),
    // B_k = −(k+l)/(k+1).
    for k in (1..=n_top).rev() {
        let kf = k as f64;
        let a_k = (2.0 * kf + lf + 1.0 - z) / (kf + 1.0);
        let b_k1 = -(kf + 1.0 + lf) / (kf + 2.0);
        let b = weights[k] * (-shift).exp() + a_k * b1 + b_k1 * b2;
        b2 = b1;
        b1 = b;
        let mag = b1.norm_sqr().max(b2.norm_sqr());
        if mag > RESCALE_LIMIT * RESCALE_LIMIT {
            b1 *= RESCALE_FACTOR;
            b2 *= RESCALE_FACTOR;
            shift += LN_RESCALE;
        }
    }
    let a_0 = lf + 1.0 - z;
    let b_1 = -(lf + 1.0) / 2.0;
    let b0 = weights[0] * (-shift).exp() + a_0 * b1 + b_1 * b2;
    // L_0 = 1.
    scaled_exit(b0, shift)
}

/// Σ_n w_n E_n^l(z) with E_n^l(z) = √(n!/(n+l)!) L_n^l(z) z^{l/2} e^{−z/2}:
/// the displacement-element form whose basis functions satisfy |E| ≤ 1.
/// Stable across the full Wigner evaluation envelope (z up to ~1200,
/// n up to the cutoff).
pub fn scaled_laguerre_clenshaw(l: usize, weights: &[Complex64], z: f64) -> Complex64 {
    assert!(z >= 0.0, "scaled_laguerre_clenshaw: z must be non-negative");
    if weights.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let lf = l as f64;
    let n_top = weights.len() - 1;
    let r = |k: usize| ((k as f64 + 1.0) / (k as f64 + 1.0 + lf)).sqrt();
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    let mut shift = 0.0f64;
    // E_{k+1} = A_k E_k + B_k E_{k−1}: A_k = (2k+l+1−z)·r_k/(k+1),
    // B_k = −(k+l)·r_k·r_{k−1}/(k+1).
    for k in (1..=n_top).rev() {
        let kf = k as f64;
        let a_k = (2.0 * kf + lf + 1.0 - z) * r(k) / (kf + 1.0);
        let b_k1 = -(kf + 1.0 + lf) * r(k + 1) * r(k) / (kf + 2.0);
        let b = weights[k] * (-shift).exp() + a_k * b1 + b_k1 * b2;
        b2 = b1;
        b1 = b;
        let mag = b1.norm_sqr().max(b2.norm_sqr());
        if mag > RESCALE_LIMIT * RESCALE_LIMIT {
            b1 *= RESCALE_FACTOR;
            b2 *= RESCALE_FACTOR;
            shift += LN_RESCALE;
        }
    }
    let a_0 = (lf + 1.0 - z) * r(0);
    let b_1 = -(lf + 1.0) * r(1) * r(0) / 2.0;
    let b0 = weights[0] * (-shift).exp() + a_0 * b1 + b_1 * b2;
    // E_0 = z^{l/2} e^{−z/2} / √(l!), carried in log form.
    let ln_e0 = if l == 0 {
        -0.5 * z
    } else if z == 0.0 {
        return Complex64::new(0.0, 0.0);
    } else {
        0.5 * (lf * z.ln() - ln_factorial(l)) - 0.5 * z
    };
    scaled_exit(b0, shift + ln_e0)
}

/// b0 · e^{shift} in log space (0 on hard underflow).
fn scaled_exit(b0: Complex64, shift: f64) -> Complex64 {
    let mag = b0.norm();
    if mag == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = mag.ln() + shift;
    if m < -745.0 {
        Complex64::new(0.0, 0.0)
    } else {
        (b0 / mag) * m.exp()
    }
}

/// E_n^l(z) for n = 0..n_max by the forward recurrence. Forward stepping is
/// stable for E (it is the branch that grows toward the oscillatory
/// region), so these values serve as the naive oracle for the Clenshaw path
/// and as displacement-matrix columns.
pub fn scaled_laguerre_sequence(l: usize, z: f64, n_max: usize) -> Vec<f64> {
    assert!(z >= 0.0, "scaled_laguerre_sequence: z must be non-negative");
    let lf = l as f64;
    let mut out = Vec::with_capacity(n_max + 1);
    let ln_e0 = if l == 0 {
        -0.5 * z
    } else if z == 0.0 {
        f64::NEG_INFINITY
    } else {
        0.5 * (lf * z.ln() - ln_factorial(l)) - 0.5 * z
    };
    let e0 = if ln_e0 < -745.0 { 0.0 } else { ln_e0.exp() };
    out.push(e0);
    if n_max == 0 {
        return out;
    }
    let r = |k: usize| ((k as f64 + 1.0) / (k as f64 + 1.0 + lf)).sqrt();
    let mut prev = e0;
    let mut curr = (lf + 1.0 - z) * r(0) * e0;
    out.push(curr);
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + lf + 1.0 - z) * r(k) * curr
            - (kf + lf) * r(k) * r(k - 1) * prev)
            / (kf + 1.0);
        prev = curr;
        curr = next;
        out.push(curr);
    }
    out
}

/// Σ_{l≥1} c_l w^l by Horner, where `coeffs[k]` is the coefficient of
/// w^{k+1}. Used with |w| = 1 phase factors, for which it is
/// unconditionally stable.
pub fn horner_power_series(coeffs: &[Complex64], w: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = (acc + c) * w;
    }
    acc
}
