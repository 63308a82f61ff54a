//! The master-equation superoperator ℒ over the truncated number basis.
//!
//! In signal-loss (τ) units the element-wise action is
//!
//! ```text
//! dρ_nm/dτ = −iΔ(n−m)ρ_nm
//!          + (λ/2)[√(n(n−1))·ρ_{n−2,m} + √(m(m−1))·ρ_{n,m−2}
//!                  − √((n+1)(n+2))·ρ_{n+2,m} − √((m+1)(m+2))·ρ_{n,m+2}]
//!          − i(χ′/2)[n(n−1) − m(m−1)]ρ_nm
//!          + g²√((n+1)(n+2)(m+1)(m+2))·ρ_{n+2,m+2}
//!          − (g²/2)[n(n−1) + m(m−1)]ρ_nm
//!          + (N+1)[2√((n+1)(m+1))·ρ_{n+1,m+1} − (n+m)ρ_nm]
//!          + N[2√(nm)·ρ_{n−1,m−1} − (n+m+2)ρ_nm]
//! ```
//!
//! The T and 𝒯 conventions rescale the six coefficient groups; see
//! [`ScaledCoeffs::for_unit`]. Terms whose source index falls outside the
//! cutoff are dropped (absorbing truncation); the tail-occupancy monitor on
//! the density matrix guards against the resulting error.
//!
//! Two equivalent application paths exist: a matrix-free element loop (the
//! fast path used by the propagator) and an explicit sparse coefficient
//! table built term by term (the auditable path used by tests and the debug
//! dump). A cross-validation test keeps them in agreement.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CatsimError, Result};
use crate::fock::FockDensityMatrix;
use crate::params::{ScaledParams, TimeUnit};

/// Coefficients of the six term groups after choosing a time convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledCoeffs {
    /// Parametric drive weight (λ in τ units).
    pub drive: f64,
    /// Kerr weight (χ′ in τ units).
    pub kerr: f64,
    /// Two-photon dissipation weight (g² in τ units).
    pub twophoton: f64,
    /// Single-photon channel weight (1 in τ units, 1/g² in T units).
    pub single: f64,
    /// Mean thermal occupation N.
    pub n_thermal: f64,
    /// Detuning weight (Δ in τ units).
    pub detuning: f64,
}

impl ScaledCoeffs {
    /// Coefficients for a parameter set in a given time convention.
    ///
    /// * τ: (λ, χ′, g², 1, N, Δ) — rejected on the lossless path.
    /// * T = g²τ: (λ/g², χ, 1, 1/g², N, Δ/g²).
    /// * 𝒯 = T√(1+χ²): the T row divided by √(1+χ²), so the drive weight
    ///   becomes |α₀|².
    pub fn for_unit(params: &ScaledParams, unit: TimeUnit) -> Result<Self> {
        match unit {
            TimeUnit::Tau => {
                if params.is_lossless() {
                    return Err(CatsimError::TimeConvention(
                        "tau-scaled Liouvillian is undefined for a lossless parameter set".into(),
                    ));
                }
                Ok(Self {
                    drive: params.lambda(),
                    kerr: params.chi_prime(),
                    twophoton: params.g() * params.g(),
                    single: 1.0,
                    n_thermal: params.n_thermal(),
                    detuning: params.delta(),
                })
            }
            TimeUnit::BigT => Ok(Self {
                drive: params.pump_t(),
                kerr: params.chi(),
                twophoton: 1.0,
                single: params.inv_g_squared(),
                n_thermal: params.n_thermal(),
                detuning: params.delta_t(),
            }),
            TimeUnit::ScriptT => {
                let root = (1.0 + params.chi() * params.chi()).sqrt();
                Ok(Self {
                    drive: params.pump_t() / root,
                    kerr: params.chi() / root,
                    twophoton: 1.0 / root,
                    single: params.inv_g_squared() / root,
                    n_thermal: params.n_thermal(),
                    detuning: params.delta_t() / root,
                })
            }
        }
    }
}

/// One coefficient of the sparse table: source (i,j) feeds destination (n,m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    /// Destination row index.
    pub n: usize,
    /// Destination column index.
    pub m: usize,
    /// Source row index.
    pub i: usize,
    /// Source column index.
    pub j: usize,
    /// Complex weight.
    pub weight: Complex64,
}

/// Count of term instances dropped by the absorbing truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationReport {
    /// Number of (destination, term) pairs whose source index fell outside
    /// the cutoff.
    pub dropped_terms: usize,
}

/// The assembled superoperator for one parameter set, cutoff, and time
/// convention. Immutable after build; `apply` is pure and thread-safe.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    cutoff: usize,
    unit: TimeUnit,
    params: ScaledParams,
    coeffs: ScaledCoeffs,
    /// up2[k] = √((k+1)(k+2))
    up2: Vec<f64>,
    /// up1[k] = √(k+1)
    up1: Vec<f64>,
    /// sq[k] = √k
    sq: Vec<f64>,
}

/// Row count above which `apply` partitions destination rows across the
/// rayon pool. Row-disjoint writes with a fixed per-element term order keep
/// the result bit-identical for any worker count.
const PARALLEL_CUTOFF: usize = 96;

impl SuperOperator {
    /// Assemble ℒ for `params` at `cutoff` in the convention `unit`.
    pub fn build(params: &ScaledParams, cutoff: usize, unit: TimeUnit) -> Result<Self> {
        if cutoff < FockDensityMatrix::MIN_CUTOFF {
            return Err(CatsimError::InvalidParams(format!(
                "cutoff must be at least {}, got {cutoff}",
                FockDensityMatrix::MIN_CUTOFF
            )));
        }
        let coeffs = ScaledCoeffs::for_unit(params, unit)?;
        Ok(Self {
            cutoff,
            unit,
            params: *params,
            coeffs,
            up2: (0..cutoff)
                .map(|k| (((k + 1) * (k + 2)) as f64).sqrt())
                .collect(),
            up1: (0..cutoff).map(|k| ((k + 1) as f64).sqrt()).collect(),
            sq: (0..cutoff).map(|k| (k as f64).sqrt()).collect(),
        })
    }

    /// Fock cutoff.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Time convention the coefficients are scaled for.
    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    /// Parameter snapshot taken at build time.
    pub fn params(&self) -> &ScaledParams {
        &self.params
    }

    /// The scaled coefficient group.
    pub fn coeffs(&self) -> &ScaledCoeffs {
        &self.coeffs
    }

    /// dρ/d(scaled time) as a fresh matrix.
    pub fn apply(&self, rho: &FockDensityMatrix) -> Result<FockDensityMatrix> {
        if rho.cutoff() != self.cutoff {
            return Err(CatsimError::CutoffMismatch {
                expected: self.cutoff,
                got: rho.cutoff(),
            });
        }
        let mut out = Array2::zeros((self.cutoff, self.cutoff));
        self.apply_into(rho.data(), &mut out);
        FockDensityMatrix::from_matrix(out)
    }

    /// Matrix-free fast path: write dρ into `out`. Panics on shape mismatch
    /// (programming error); the `apply` wrapper performs checked use.
    pub fn apply_into(&self, rho: &Array2<Complex64>, out: &mut Array2<Complex64>) {
        let nc = self.cutoff;
        assert_eq!(rho.dim(), (nc, nc), "apply_into: rho shape mismatch");
        assert_eq!(out.dim(), (nc, nc), "apply_into: out shape mismatch");
        let rho_s = rho.as_slice().expect("rho must be standard layout");
        let out_s = out.as_slice_mut().expect("out must be standard layout");
        if nc >= PARALLEL_CUTOFF {
            out_s
                .par_chunks_mut(nc)
                .enumerate()
                .for_each(|(n, row)| self.apply_row(rho_s, row, n));
        } else {
            for (n, row) in out_s.chunks_mut(nc).enumerate() {
                self.apply_row(rho_s, row, n);
            }
        }
    }

    /// One destination row of the matrix-free path. Term groups that map
    /// into each other under (n,m) swap are accumulated as commutative
    /// pairs, which makes the output exactly Hermitian for Hermitian input.
    fn apply_row(&self, rho: &[Complex64], row: &mut [Complex64], n: usize) {
        let nc = self.cutoff;
        let c = &self.coeffs;
        let half_drive = 0.5 * c.drive;
        let np = c.n_thermal;
        let np1 = np + 1.0;
        let nf = n as f64;
        let dn = nf * (nf - 1.0);
        let at = |i: usize, j: usize| rho[i * nc + j];
        for (m, slot) in row.iter_mut().enumerate() {
            let mf = m as f64;
            let dm = mf * (mf - 1.0);
            let diag = Complex64::new(
                -0.5 * c.twophoton * (dn + dm) - c.single * (np1 * (nf + mf) + np * (nf + mf + 2.0)),
                -(c.detuning * (nf - mf) + 0.5 * c.kerr * (dn - dm)),
            );
            let mut acc = diag * at(n, m);
            let mut pump_in = Complex64::new(0.0, 0.0);
            if n >= 2 {
                pump_in += half_drive * self.up2[n - 2] * at(n - 2, m);
            }
            if m >= 2 {
                pump_in += half_drive * self.up2[m - 2] * at(n, m - 2);
            }
            acc += pump_in;
            let mut pump_out = Complex64::new(0.0, 0.0);
            if n + 2 < nc {
                pump_out += half_drive * self.up2[n] * at(n + 2, m);
            }
            if m + 2 < nc {
                pump_out += half_drive * self.up2[m] * at(n, m + 2);
            }
            acc -= pump_out;
            if n + 2 < nc && m + 2 < nc {
                acc += c.twophoton * self.up2[n] * self.up2[m] * at(n + 2, m + 2);
            }
            if n + 1 < nc && m + 1 < nc {
                acc += 2.0 * c.single * np1 * self.up1[n] * self.up1[m] * at(n + 1, m + 1);
            }
            if np > 0.0 && n >= 1 && m >= 1 {
                acc += 2.0 * c.single * np * self.sq[n] * self.sq[m] * at(n - 1, m - 1);
            }
            *slot = acc;
        }
    }

    /// max_nm |dρ_nm|: zero iff ρ is stationary at this truncation.
    pub fn steady_residual(&self, rho: &FockDensityMatrix) -> Result<f64> {
        let d = self.apply(rho)?;
        Ok(d.data().iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Explicit sparse table mirroring the term-by-term expansion. Built on
    /// demand; intended for audits, dumps, and cross-validation at small
    /// cutoffs (it holds up to 8·N_c² entries).
    pub fn coefficient_table(&self) -> Vec<TableEntry> {
        let mut table = Vec::with_capacity(8 * self.cutoff * self.cutoff);
        for n in 0..self.cutoff {
            for m in 0..self.cutoff {
                self.entries_for(n, m, |i, j, weight| {
                    table.push(TableEntry { n, m, i, j, weight });
                });
            }
        }
        table
    }

    /// Count of boundary-dropped term instances.
    pub fn truncation_report(&self) -> TruncationReport {
        let nc = self.cutoff;
        let mut dropped = 0usize;
        for n in 0..nc {
            for m in 0..nc {
                if n + 2 >= nc {
                    dropped += 1;
                }
                if m + 2 >= nc {
                    dropped += 1;
                }
                if n + 2 >= nc || m + 2 >= nc {
                    dropped += 1;
                }
                if n + 1 >= nc || m + 1 >= nc {
                    dropped += 1;
                }
            }
        }
        TruncationReport {
            dropped_terms: dropped,
        }
    }

    /// Apply through the explicit table (audit path; O(N_c²) memory).
    pub fn apply_via_table(&self, rho: &FockDensityMatrix) -> Result<FockDensityMatrix> {
        if rho.cutoff() != self.cutoff {
            return Err(CatsimError::CutoffMismatch {
                expected: self.cutoff,
                got: rho.cutoff(),
            });
        }
        let mut out = Array2::<Complex64>::zeros((self.cutoff, self.cutoff));
        for e in self.coefficient_table() {
            out[(e.n, e.m)] += e.weight * rho.data()[(e.i, e.j)];
        }
        FockDensityMatrix::from_matrix(out)
    }

    /// Write the table as text lines "n m i j re im".
    pub fn dump_table<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for e in self.coefficient_table() {
            writeln!(
                w,
                "{} {} {} {} {:.17e} {:.17e}",
                e.n, e.m, e.i, e.j, e.weight.re, e.weight.im
            )?;
        }
        Ok(())
    }

    /// Gershgorin-style bound on |eigenvalues| of ℒ: the maximum over
    /// destinations of the absolute column/row weight sum. Used to pick a
    /// stable RK4 step.
    pub fn gershgorin_bound(&self) -> f64 {
        let mut worst = 0.0f64;
        for n in 0..self.cutoff {
            for m in 0..self.cutoff {
                let mut r = 0.0;
                self.entries_for(n, m, |_, _, w| r += w.norm());
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Enumerate the (source, weight) pairs feeding destination (n,m). The
    /// single source of truth for the table path: one closure call per term
    /// instance that survives truncation.
    fn entries_for<F: FnMut(usize, usize, Complex64)>(&self, n: usize, m: usize, mut f: F) {
        let nc = self.cutoff;
        let c = &self.coeffs;
        let half_drive = 0.5 * c.drive;
        let np = c.n_thermal;
        let np1 = np + 1.0;
        let nf = n as f64;
        let mf = m as f64;
        let dn = nf * (nf - 1.0);
        let dm = mf * (mf - 1.0);
        let diag = Complex64::new(
            -0.5 * c.twophoton * (dn + dm) - c.single * (np1 * (nf + mf) + np * (nf + mf + 2.0)),
            -(c.detuning * (nf - mf) + 0.5 * c.kerr * (dn - dm)),
        );
        f(n, m, diag);
        if n >= 2 {
            f(n - 2, m, (half_drive * self.up2[n - 2]).into());
        }
        if m >= 2 {
            f(n, m - 2, (half_drive * self.up2[m - 2]).into());
        }
        if n + 2 < nc {
            f(n + 2, m, (-half_drive * self.up2[n]).into());
        }
        if m + 2 < nc {
            f(n, m + 2, (-half_drive * self.up2[m]).into());
        }
        if n + 2 < nc && m + 2 < nc {
            f(
                n + 2,
                m + 2,
                (c.twophoton * self.up2[n] * self.up2[m]).into(),
            );
        }
        if n + 1 < nc && m + 1 < nc {
            f(
                n + 1,
                m + 1,
                (2.0 * c.single * np1 * self.up1[n] * self.up1[m]).into(),
            );
        }
        if np > 0.0 && n >= 1 && m >= 1 {
            f(
                n - 1,
                m - 1,
                (2.0 * c.single * np * self.sq[n] * self.sq[m]).into(),
            );
        }
    }
}
