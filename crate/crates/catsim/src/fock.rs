//! Density matrices over a truncated Fock (number-state) basis.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{CatsimError, Result};
use crate::util::{ln_factorial, KahanSum};

/// Density matrix ρ_{nm} with n, m ∈ [0, N_c).
///
/// The cutoff N_c is the number of retained levels. Invariants maintained by
/// well-behaved evolution and checked by the accessors below: Hermiticity,
/// unit trace, and small tail occupancy on the last three retained levels.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    data: Array2<Complex64>,
}

impl FockDensityMatrix {
    /// Minimum admissible cutoff.
    pub const MIN_CUTOFF: usize = 2;

    /// Vacuum state |0⟩⟨0|.
    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::fock_state(cutoff, 0)
    }

    /// Number state |n⟩⟨n|.
    pub fn fock_state(cutoff: usize, n: usize) -> Result<Self> {
        Self::check_cutoff(cutoff)?;
        if n >= cutoff {
            return Err(CatsimError::InvalidParams(format!(
                "fock_state: level {n} outside cutoff {cutoff}"
            )));
        }
        let mut data = Array2::zeros((cutoff, cutoff));
        data[(n, n)] = Complex64::new(1.0, 0.0);
        Ok(Self { data })
    }

    /// Coherent state |α⟩⟨α| truncated to the cutoff and renormalized to
    /// unit trace within the retained basis. Coefficients are built in log
    /// space, so amplitudes up to |α| ≈ 50 stay overflow-free.
    pub fn coherent(cutoff: usize, alpha: Complex64) -> Result<Self> {
        Self::check_cutoff(cutoff)?;
        let c = coherent_vector(cutoff, alpha)?;
        let mut norm2 = KahanSum::new();
        for v in &c {
            norm2.add(v.norm_sqr());
        }
        let scale = 1.0 / norm2.value().sqrt();
        let mut data = Array2::zeros((cutoff, cutoff));
        for n in 0..cutoff {
            for m in 0..cutoff {
                data[(n, m)] = c[n] * c[m].conj() * (scale * scale);
            }
        }
        Ok(Self { data })
    }

    /// Wrap an existing matrix. Requires a square shape with admissible
    /// cutoff and finite entries; Hermiticity is not enforced here and can
    /// be audited separately via [`Self::hermiticity_defect`].
    pub fn from_matrix(data: Array2<Complex64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(CatsimError::InvalidParams(format!(
                "density matrix must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Self::check_cutoff(data.nrows())?;
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CatsimError::NonFinite(
                "density matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    fn check_cutoff(cutoff: usize) -> Result<()> {
        if cutoff < Self::MIN_CUTOFF {
            return Err(CatsimError::InvalidParams(format!(
                "cutoff must be at least {}, got {cutoff}",
                Self::MIN_CUTOFF
            )));
        }
        Ok(())
    }

    /// Number of retained levels N_c.
    pub fn cutoff(&self) -> usize {
        self.data.nrows()
    }

    /// Matrix view.
    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    /// Mutable matrix view.
    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    /// Consume into the raw matrix.
    pub fn into_inner(self) -> Array2<Complex64> {
        self.data
    }

    /// Tr ρ as a complex number (real for Hermitian ρ).
    pub fn trace(&self) -> Complex64 {
        let mut re = KahanSum::new();
        let mut im = KahanSum::new();
        for n in 0..self.cutoff() {
            let z = self.data[(n, n)];
            re.add(z.re);
            im.add(z.im);
        }
        Complex64::new(re.value(), im.value())
    }

    /// max_{n,m} |ρ_{nm} − conj(ρ_{mn})|.
    pub fn hermiticity_defect(&self) -> f64 {
        let nc = self.cutoff();
        let mut worst = 0.0f64;
        for n in 0..nc {
            for m in n..nc {
                let d = (self.data[(n, m)] - self.data[(m, n)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Σ_{n ≥ N_c−3} Re ρ_{nn}: population of the last three retained
    /// levels, the early-warning signal for cutoff truncation error.
    pub fn tail_occupancy(&self) -> f64 {
        let nc = self.cutoff();
        let start = nc.saturating_sub(3);
        (start..nc).map(|n| self.data[(n, n)].re).sum()
    }

    /// Largest |ρ_{nm}| over index pairs with odd n−m. The master equation
    /// propagated from the vacuum preserves number parity, so this stays at
    /// rounding level for such runs.
    pub fn odd_parity_mass(&self) -> f64 {
        let nc = self.cutoff();
        let mut worst = 0.0f64;
        for n in 0..nc {
            for m in 0..nc {
                if (n + m) % 2 == 1 {
                    worst = worst.max(self.data[(n, m)].norm());
                }
            }
        }
        worst
    }

    /// ⟨a†a⟩ = Σ n Re ρ_{nn}.
    pub fn mean_photon_number(&self) -> f64 {
        let mut acc = KahanSum::new();
        for n in 0..self.cutoff() {
            acc.add(n as f64 * self.data[(n, n)].re);
        }
        acc.value()
    }

    /// Real parts of the diagonal (unnormalized photon-number populations).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.cutoff()).map(|n| self.data[(n, n)].re).collect()
    }

    /// Rescale so Tr ρ = 1. Errors when the trace is non-positive or tiny.
    pub fn normalize(&mut self) -> Result<()> {
        let t = self.trace().re;
        if !t.is_finite() || t < 1e-300 {
            return Err(CatsimError::NonFinite(format!(
                "cannot normalize: trace = {t:.3e}"
            )));
        }
        self.data.mapv_inplace(|z| z / t);
        Ok(())
    }

    /// Replace ρ by (ρ + ρ†)/2, removing accumulated rounding asymmetry.
    pub fn resymmetrize(&mut self) {
        let nc = self.cutoff();
        for n in 0..nc {
            self.data[(n, n)] = Complex64::new(self.data[(n, n)].re, 0.0);
            for m in (n + 1)..nc {
                let avg = 0.5 * (self.data[(n, m)] + self.data[(m, n)].conj());
                self.data[(n, m)] = avg;
                self.data[(m, n)] = avg.conj();
            }
        }
    }

    /// Zero-pad to a larger cutoff.
    pub fn embed(&self, new_cutoff: usize) -> Result<Self> {
        if new_cutoff < self.cutoff() {
            return Err(CatsimError::CutoffMismatch {
                expected: self.cutoff(),
                got: new_cutoff,
            });
        }
        let mut data = Array2::zeros((new_cutoff, new_cutoff));
        data.slice_mut(ndarray::s![..self.cutoff(), ..self.cutoff()])
            .assign(&self.data);
        Ok(Self { data })
    }

    /// Truncate to a smaller cutoff, returning the new matrix together with
    /// the discarded diagonal mass as an audit value.
    pub fn truncate(&self, new_cutoff: usize) -> Result<(Self, f64)> {
        Self::check_cutoff(new_cutoff)?;
        if new_cutoff > self.cutoff() {
            return Err(CatsimError::CutoffMismatch {
                expected: self.cutoff(),
                got: new_cutoff,
            });
        }
        let discarded: f64 = (new_cutoff..self.cutoff())
            .map(|n| self.data[(n, n)].re)
            .sum();
        let data = self
            .data
            .slice(ndarray::s![..new_cutoff, ..new_cutoff])
            .to_owned();
        Ok((Self { data }, discarded))
    }
}

/// Normalized-in-the-limit coherent coefficients c_n = α^n e^{−|α|²/2}/√n!,
/// evaluated in log space.
pub fn coherent_vector(cutoff: usize, alpha: Complex64) -> Result<Vec<Complex64>> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(CatsimError::InvalidParams(
            "coherent amplitude must be finite".into(),
        ));
    }
    let a = alpha.norm();
    if a == 0.0 {
        let mut c = vec![Complex64::new(0.0, 0.0); cutoff];
        c[0] = Complex64::new(1.0, 0.0);
        return Ok(c);
    }
    let ln_a = a.ln();
    let phase = alpha.arg();
    let mut c = Vec::with_capacity(cutoff);
    for n in 0..cutoff {
        // Exponent is (1/2) ln pmf(n) <= 0: never overflows.
        let magnitude = (n as f64 * ln_a - 0.5 * a * a - 0.5 * ln_factorial(n)).exp();
        c.push(Complex64::from_polar(magnitude, phase * n as f64));
    }
    Ok(c)
}
