//! Observables of a Fock-basis density matrix: rotated quadrature
//! distributions, photon statistics, purity, the Husimi Q function, the
//! Wigner function through two independent evaluators, and Wigner
//! negativity through two independent integrators.
//!
//! The quadrature convention is x̂_θ = (a e^{−iθ} + a† e^{iθ})/√2, so the
//! position representation of |n⟩ along θ is e^{−iθn} h_n(x) with h_n the
//! weighted Hermite functions from [`crate::orthopoly`]. A coherent state
//! |β⟩ is centered at x_0 = √2 Re(β e^{−iθ}).
//!
//! The Wigner evaluators:
//! * `wigner_clenshaw` sums the diagonal-band series
//!   W(α) = (2/π)[c_0(z) + 2 Re Σ_{l≥1} e^{ilφ} c_l(z)],
//!   c_l(z) = Σ_m ρ_{m,m+l} (−1)^m E_m^l(z), z = 4|α|², φ = arg α,
//!   with the scaled Laguerre Clenshaw kernel; the radial coefficients are
//!   shared across all grid points of equal |α| (8-fold dihedral symmetry).
//! * `wigner_displaced_parity` computes (2/π)⟨parity⟩ of the displaced
//!   state using exact displacement-operator matrix elements in an
//!   enlarged embedding basis.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use rayon::prelude::*;

use crate::error::{CatsimError, Result};
use crate::fock::{coherent_vector, FockDensityMatrix};
use crate::orthopoly::{
    clenshaw_hermite_sum, horner_power_series, scaled_laguerre_clenshaw,
    scaled_laguerre_sequence, HERMITE_MAX_N,
};
use crate::util::KahanSum;

/// Roundoff clamp: values above this (negative) threshold are treated as
/// zero; anything more negative is genuine and preserved.
const ROUNDOFF_CLAMP: f64 = -1e-12;

/// Largest half-width accepted by the series Wigner evaluator. Beyond it
/// the corner |α| pushes the Laguerre argument past the certified range.
const WIGNER_SERIES_MAX_HALF_WIDTH: f64 = 17.0;

/// Largest embedding dimension for displaced-parity evaluation (bounded by
/// the factorial table and by cost).
const PARITY_MAX_EMBED: usize = 4000;

/// Largest per-axis point count for the square phase-space evaluators.
const PHASE_GRID_MAX_AXIS: usize = 2401;

fn check_phase_axis(len: usize) -> Result<()> {
    if len > PHASE_GRID_MAX_AXIS {
        return Err(CatsimError::InvalidParams(format!(
            "phase-space grid with {len} points per axis is too large \
             (limit {PHASE_GRID_MAX_AXIS}); coarsen the step"
        )));
    }
    Ok(())
}

/// A symmetric, uniformly spaced grid centered on zero: used both as a 1-D
/// quadrature axis and as the per-axis spec of a square phase-space grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    half_width: f64,
    step: f64,
}

impl GridSpec {
    /// A grid covering [−half_width, half_width] with the given step. The
    /// half-width is rounded to a whole number of steps so that zero is
    /// always a grid point and the axis is exactly sign-symmetric.
    pub fn centered(half_width: f64, step: f64) -> Result<Self> {
        if !half_width.is_finite() || !step.is_finite() || step <= 0.0 || half_width < step {
            return Err(CatsimError::InvalidParams(format!(
                "grid requires 0 < step <= half_width, got step {step}, half width {half_width}"
            )));
        }
        let k = (half_width / step).round();
        if k > 5000.0 {
            return Err(CatsimError::InvalidParams(format!(
                "grid with {k} steps per half-axis is too large; coarsen the step"
            )));
        }
        Ok(Self {
            half_width: k * step,
            step,
        })
    }

    /// Default square phase-space window for states of amplitude |α₀|:
    /// half-width |α₀| + 4 at step 0.05.
    pub fn default_phase_space(alpha0_abs: f64) -> Result<Self> {
        Self::centered(alpha0_abs + 4.0, 0.05)
    }

    /// Default quadrature axis for states of amplitude |α₀|: half-width
    /// √2|α₀| + 5 at step 0.01 (several points per interference fringe).
    pub fn default_quadrature(alpha0_abs: f64) -> Result<Self> {
        Self::centered(std::f64::consts::SQRT_2 * alpha0_abs + 5.0, 0.01)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of points per axis (odd; middle point is exactly 0).
    pub fn len(&self) -> usize {
        2 * self.half_steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn half_steps(&self) -> usize {
        (self.half_width / self.step).round() as usize
    }

    /// The axis values, exactly sign-symmetric around the central zero.
    pub fn axis(&self) -> Vec<f64> {
        let k = self.half_steps() as i64;
        (-k..=k).map(|i| i as f64 * self.step).collect()
    }
}

/// Probability distribution of the rotated quadrature x_θ.
#[derive(Debug, Clone)]
pub struct QuadratureDistribution {
    theta: f64,
    xs: Vec<f64>,
    step: f64,
    values: Vec<f64>,
}

impl QuadratureDistribution {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid integral of the distribution (≈ 1 on adequate grids).
    pub fn integral(&self) -> f64 {
        let mut sum = KahanSum::new();
        let last = self.values.len() - 1;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            sum.add(w * v * self.step);
        }
        sum.value()
    }

    /// Write as CSV rows (x, p) with a header.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# quadrature theta={:.17e} step={:.17e}", self.theta, self.step)?;
        writeln!(w, "x,p")?;
        for (x, v) in self.xs.iter().zip(self.values.iter()) {
            writeln!(w, "{x:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

/// A sampled phase-space function on a square grid: Wigner (real, possibly
/// negative) or Husimi Q (non-negative).
#[derive(Debug, Clone)]
pub struct PhaseSpaceGrid {
    re_axis: Vec<f64>,
    im_axis: Vec<f64>,
    step: f64,
    values: Array2<f64>,
    evaluator: &'static str,
    imag_residual: f64,
}

impl PhaseSpaceGrid {
    pub fn re_axis(&self) -> &[f64] {
        &self.re_axis
    }

    pub fn im_axis(&self) -> &[f64] {
        &self.im_axis
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// values[[i, j]] is the function at α = re_axis[i] + i·im_axis[j].
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Identifier of the evaluator that produced this map.
    pub fn evaluator(&self) -> &'static str {
        self.evaluator
    }

    /// Largest imaginary residual discarded while forming real values (a
    /// Hermiticity diagnostic; exactly 0 for Hermitian input).
    pub fn imag_residual(&self) -> f64 {
        self.imag_residual
    }

    pub fn half_width(&self) -> f64 {
        *self.re_axis.last().unwrap_or(&0.0)
    }

    /// Trapezoid integral ∫ f d²α over the sampled window.
    pub fn integral(&self) -> f64 {
        let n = self.re_axis.len();
        let mut sum = KahanSum::new();
        for i in 0..n {
            let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            for j in 0..n {
                let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                sum.add(wi * wj * self.values[[i, j]]);
            }
        }
        sum.value() * self.step * self.step
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Marginal along the imaginary axis: P(x = √2·re) per unit x,
    /// (1/√2)·Σ_j f(re, im_j)·Δim for each re.
    pub fn x_marginal(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.im_axis.len();
        let xs: Vec<f64> = self
            .re_axis
            .iter()
            .map(|r| std::f64::consts::SQRT_2 * r)
            .collect();
        let ps: Vec<f64> = self
            .values
            .rows()
            .into_iter()
            .map(|row| {
                let mut s = KahanSum::new();
                for (j, v) in row.iter().enumerate() {
                    let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                    s.add(w * v);
                }
                s.value() * self.step / std::f64::consts::SQRT_2
            })
            .collect();
        (xs, ps)
    }

    /// Marginal along the real axis: P(p = √2·im) per unit p.
    pub fn p_marginal(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.re_axis.len();
        let ps_axis: Vec<f64> = self
            .im_axis
            .iter()
            .map(|r| std::f64::consts::SQRT_2 * r)
            .collect();
        let ps: Vec<f64> = self
            .values
            .columns()
            .into_iter()
            .map(|col| {
                let mut s = KahanSum::new();
                for (i, v) in col.iter().enumerate() {
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    s.add(w * v);
                }
                s.value() * self.step / std::f64::consts::SQRT_2
            })
            .collect();
        (ps_axis, ps)
    }

    /// Write as CSV rows (re, im, value) with an evaluator header.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# evaluator={} half_width={:.17e} step={:.17e}",
            self.evaluator,
            self.half_width(),
            self.step
        )?;
        writeln!(w, "re,im,value")?;
        for (i, re) in self.re_axis.iter().enumerate() {
            for (j, im) in self.im_axis.iter().enumerate() {
                writeln!(w, "{re:.17e},{im:.17e},{:.17e}", self.values[[i, j]])?;
            }
        }
        Ok(())
    }
}

/// Scheme used to integrate the Wigner negativity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativityMethod {
    /// Tensor-product trapezoid rule on the sampled grid.
    Trapezoid,
    /// Composite 8-point Gauss-Lobatto panels of width 0.4 with recursive
    /// bisection of sign-mixed panels, sampling a bicubic interpolant.
    GaussLobatto,
}

impl NegativityMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            NegativityMethod::Trapezoid => "trapezoid",
            NegativityMethod::GaussLobatto => "gauss-lobatto",
        }
    }
}

/// Wigner negativity δ = ½∫(|W| − W) d²α together with its provenance.
#[derive(Debug, Clone, Copy)]
pub struct NegativityResult {
    pub delta: f64,
    pub method: NegativityMethod,
    pub half_width: f64,
    pub step: f64,
}

/// P(x_θ) on the given axis. Evaluated per grid point as the bilinear form
/// v†ρv with v_n = e^{−iθn} h_n(x), each contraction running through the
/// Clenshaw Hermite kernel so deep-tail points stay accurate.
pub fn quadrature_distribution(
    rho: &FockDensityMatrix,
    theta: f64,
    grid: &GridSpec,
) -> Result<QuadratureDistribution> {
    let nc = rho.cutoff();
    if nc > HERMITE_MAX_N {
        return Err(CatsimError::StabilityEnvelope(format!(
            "quadrature evaluation supports cutoffs up to {HERMITE_MAX_N}, got {nc}"
        )));
    }
    if !theta.is_finite() {
        return Err(CatsimError::InvalidParams(format!(
            "theta = {theta} is not finite"
        )));
    }
    let xs = grid.axis();
    let rows: Vec<Vec<Complex64>> = (0..nc).map(|m| rho.data().row(m).to_vec()).collect();
    let values: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            // t_m = Σ_n ρ_{mn} e^{+iθn} h_n(x), then P = Σ_m t_m e^{−iθm} h_m(x),
            // which is ⟨x_θ|ρ|x_θ⟩ with ⟨x_θ|n⟩ = e^{−iθn} h_n(x).
            let mut t = Vec::with_capacity(nc);
            for row in &rows {
                t.push(clenshaw_hermite_sum(row, x, -theta));
            }
            let p = clenshaw_hermite_sum(&t, x, theta).re;
            if p < 0.0 && p > ROUNDOFF_CLAMP {
                0.0
            } else {
                p
            }
        })
        .collect();
    Ok(QuadratureDistribution {
        theta,
        xs,
        step: grid.step(),
        values,
    })
}

/// Photon-number distribution P(n) = ρ_nn with roundoff clamping.
pub fn photon_number_distribution(rho: &FockDensityMatrix) -> Vec<f64> {
    rho.diagonal()
        .into_iter()
        .map(|p| if p < 0.0 && p > ROUNDOFF_CLAMP { 0.0 } else { p })
        .collect()
}

/// Purity Tr(ρ²) = Σ_{nm} |ρ_{nm}|².
pub fn purity(rho: &FockDensityMatrix) -> f64 {
    let mut sum = KahanSum::new();
    for v in rho.data().iter() {
        sum.add(v.norm_sqr());
    }
    sum.value()
}

/// Husimi Q(α) = ⟨α|ρ|α⟩/π on a square grid.
pub fn q_function(rho: &FockDensityMatrix, grid: &GridSpec) -> Result<PhaseSpaceGrid> {
    let nc = rho.cutoff();
    let axis = grid.axis();
    let n = axis.len();
    check_phase_axis(n)?;
    let data = rho.data();
    let rows: Vec<Vec<f64>> = axis
        .par_iter()
        .map(|&re| {
            let mut row_vals = Vec::with_capacity(n);
            for &im in &axis {
                let alpha = Complex64::new(re, im);
                let v = coherent_vector(nc, alpha).expect("coherent vector in range");
                // Q = v†ρv/π
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..nc {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for k in 0..nc {
                        inner += data[[m, k]] * v[k];
                    }
                    acc += v[m].conj() * inner;
                }
                let q = acc.re / std::f64::consts::PI;
                row_vals.push(if q < 0.0 && q > ROUNDOFF_CLAMP { 0.0 } else { q });
            }
            row_vals
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Ok(PhaseSpaceGrid {
        re_axis: axis.clone(),
        im_axis: axis,
        step: grid.step(),
        values,
        evaluator: "q-function",
        imag_residual: 0.0,
    })
}

/// Wigner function on a square grid via the diagonal-band Laguerre series
/// with Clenshaw summation. Radial coefficients are computed once per
/// unique |α| and shared across the eight symmetric grid partners.
pub fn wigner_clenshaw(rho: &FockDensityMatrix, grid: &GridSpec) -> Result<PhaseSpaceGrid> {
    if grid.half_width() > WIGNER_SERIES_MAX_HALF_WIDTH {
        return Err(CatsimError::StabilityEnvelope(format!(
            "series Wigner evaluator certified for half-widths up to \
             {WIGNER_SERIES_MAX_HALF_WIDTH}, got {}; use the displaced-parity \
             evaluator for points this far out",
            grid.half_width()
        )));
    }
    let nc = rho.cutoff();
    let data = rho.data();
    // Band weights w_l[m] = ρ_{m,m+l}·(−1)^m·(2/π), shared by every point.
    let two_over_pi = 2.0 / std::f64::consts::PI;
    let bands: Vec<Vec<Complex64>> = (0..nc)
        .map(|l| {
            (0..nc - l)
                .map(|m| {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    data[[m, m + l]] * (sign * two_over_pi)
                })
                .collect()
        })
        .collect();
    let band_scale: Vec<f64> = bands
        .iter()
        .map(|b| b.iter().map(|v| v.norm()).fold(0.0, f64::max))
        .collect();
    let axis = grid.axis();
    let n = axis.len();
    check_phase_axis(n)?;
    let k = (n - 1) / 2;
    let step = grid.step();
    // Octant keys (p, q) with p >= q cover all radii once.
    let mut keys = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for p in 0..=k {
        for q in 0..=p {
            keys.push((p, q));
        }
    }
    let chunks: Vec<((usize, usize), Vec<(usize, usize, f64)>, f64)> = keys
        .par_iter()
        .map(|&(p, q)| {
            let z = 4.0 * step * step * ((p * p + q * q) as f64);
            // c_l at this radius (skip numerically empty bands).
            let mut c = Vec::with_capacity(nc);
            for l in 0..nc {
                if band_scale[l] < 1e-300 {
                    c.push(Complex64::new(0.0, 0.0));
                } else {
                    c.push(scaled_laguerre_clenshaw(l, &bands[l], z));
                }
            }
            let imag = c[0].im.abs();
            // Eight dihedral partners of (p, q) as signed index offsets.
            let mut out = Vec::with_capacity(8);
            let mut seen = [(0i64, 0i64); 8];
            let mut count = 0;
            let pi = p as i64;
            let qi = q as i64;
            for &(di, dj) in &[
                (pi, qi),
                (pi, -qi),
                (-pi, qi),
                (-pi, -qi),
                (qi, pi),
                (qi, -pi),
                (-qi, pi),
                (-qi, -pi),
            ] {
                if seen[..count].contains(&(di, dj)) {
                    continue;
                }
                seen[count] = (di, dj);
                count += 1;
                let re = di as f64 * step;
                let im = dj as f64 * step;
                let w = if di == 0 && dj == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, im.atan2(re))
                };
                let series = horner_power_series(&c[1..], w);
                let value = c[0].re + 2.0 * series.re;
                out.push((
                    (di + k as i64) as usize,
                    (dj + k as i64) as usize,
                    value,
                ));
            }
            ((p, q), out, imag)
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    let mut imag_residual = 0.0f64;
    for (_, points, imag) in chunks {
        imag_residual = imag_residual.max(imag);
        for (i, j, v) in points {
            values[[i, j]] = v;
        }
    }
    Ok(PhaseSpaceGrid {
        re_axis: axis.clone(),
        im_axis: axis,
        step,
        values,
        evaluator: "wigner-clenshaw",
        imag_residual,
    })
}

/// Wigner values at arbitrary points via displaced photon-number parity:
/// W(α) = (2/π) Σ_n (−1)^n [D(−α) ρ D(α)]_{nn}, with the displacement
/// matrix built from exact elements in an enlarged embedding basis.
pub fn wigner_displaced_parity(
    rho: &FockDensityMatrix,
    points: &[Complex64],
) -> Result<Vec<f64>> {
    let nc = rho.cutoff();
    let max_abs = points.iter().map(|a| a.norm()).fold(0.0f64, f64::max);
    if !max_abs.is_finite() {
        return Err(CatsimError::InvalidParams(
            "displacement points must be finite".into(),
        ));
    }
    // The displaced state is centered near (√nc + |α|)² with a number
    // spread of order |α|√nc, so the margin scales with both.
    let root_nc = (nc as f64).sqrt();
    let side = root_nc + max_abs;
    let embed = (side * side + 5.0 * max_abs * root_nc).ceil() as usize + 16;
    if embed > PARITY_MAX_EMBED {
        return Err(CatsimError::StabilityEnvelope(format!(
            "displaced-parity embedding would need {embed} levels \
             (cutoff {nc}, max |alpha| {max_abs:.2}); exceeds {PARITY_MAX_EMBED}"
        )));
    }
    let data = rho.data();
    points
        .par_iter()
        .map(|&alpha| {
            let beta = -alpha;
            let z = beta.norm_sqr();
            let theta = if z > 0.0 { beta.arg() } else { 0.0 };
            // D[m][n] = ⟨m|D(β)|n⟩, built diagonal band by diagonal band.
            // Only the first `nc` columns are ever contracted with ρ.
            let mut d = Array2::<Complex64>::zeros((embed, nc));
            for l in 0..embed {
                let reach = nc.min(embed - l);
                let seq = scaled_laguerre_sequence(l, z, reach - 1);
                let phase_up = Complex64::from_polar(1.0, theta * l as f64);
                let lower_sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                let phase_down = Complex64::from_polar(1.0, -theta * l as f64) * lower_sign;
                for (kidx, &e) in seq.iter().enumerate() {
                    d[[kidx + l, kidx]] = phase_up * e;
                    if l > 0 && kidx + l < nc {
                        d[[kidx, kidx + l]] = phase_down * e;
                    }
                }
            }
            // Row-wise: (DρD†)_nn = Σ_{j,k≤nc} D_nj ρ_jk conj(D_nk).
            let mut diag_sum = KahanSum::new();
            let mut tail = 0.0;
            for nrow in 0..embed {
                let mut b = vec![Complex64::new(0.0, 0.0); nc];
                for j in 0..nc {
                    let dnj = d[[nrow, j]];
                    if dnj.norm_sqr() == 0.0 {
                        continue;
                    }
                    for kcol in 0..nc {
                        b[kcol] += dnj * data[[j, kcol]];
                    }
                }
                let mut dn = Complex64::new(0.0, 0.0);
                for kcol in 0..nc {
                    dn += b[kcol] * d[[nrow, kcol]].conj();
                }
                let parity = if nrow % 2 == 0 { 1.0 } else { -1.0 };
                diag_sum.add(parity * dn.re);
                if nrow + 3 >= embed {
                    tail += dn.re.abs();
                }
            }
            if tail > 1e-8 {
                return Err(CatsimError::StabilityEnvelope(format!(
                    "displaced state leaks {tail:.2e} probability into the top \
                     of the embedding basis at alpha = {alpha}; increase the cutoff"
                )));
            }
            Ok((2.0 / std::f64::consts::PI) * diag_sum.value())
        })
        .collect()
}

/// Frozen 8-point Gauss-Lobatto nodes on [−1, 1].
const LOBATTO_NODES: [f64; 8] = [
    -1.0,
    -0.871740148509606615337445761221,
    -0.591700181433142302144510731398,
    -0.209299217902478868768657260345,
    0.209299217902478868768657260345,
    0.591700181433142302144510731398,
    0.871740148509606615337445761221,
    1.0,
];

/// Matching weights (sum 2).
const LOBATTO_WEIGHTS: [f64; 8] = [
    0.035714285714285714285714285714,
    0.210704227143506039382992065776,
    0.341122692483504364764240677108,
    0.412458794658703881567052971402,
    0.412458794658703881567052971402,
    0.341122692483504364764240677108,
    0.210704227143506039382992065776,
    0.035714285714285714285714285714,
];

const LOBATTO_PANEL: f64 = 0.4;
const LOBATTO_MAX_DEPTH: usize = 6;

/// Wigner negativity δ = ½∫(|W| − W) d²α = ∫ max(−W, 0) d²α.
pub fn wigner_negativity(map: &PhaseSpaceGrid, method: NegativityMethod) -> NegativityResult {
    let delta = match method {
        NegativityMethod::Trapezoid => negativity_trapezoid(map),
        NegativityMethod::GaussLobatto => negativity_lobatto(map),
    };
    NegativityResult {
        delta,
        method,
        half_width: map.half_width(),
        step: map.step,
    }
}

fn negativity_trapezoid(map: &PhaseSpaceGrid) -> f64 {
    let n = map.re_axis.len();
    let mut sum = KahanSum::new();
    for i in 0..n {
        let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        for j in 0..n {
            let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let v = map.values[[i, j]];
            if v < 0.0 {
                sum.add(-wi * wj * v);
            }
        }
    }
    sum.value() * map.step * map.step
}

/// Catmull-Rom cubic through p at parameter t in [0, 1] between p[1], p[2].
fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    0.5 * (2.0 * p[1]
        + (-p[0] + p[2]) * t
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
        + (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * t * t * t)
}

/// Bicubic sample of the map at (x, y), clamping outside the window to the
/// edge values (the maps decay to ~0 there).
fn bicubic(map: &PhaseSpaceGrid, x: f64, y: f64) -> f64 {
    let n = map.re_axis.len() as i64;
    let origin = map.re_axis[0];
    let inv = 1.0 / map.step;
    let fx = (x - origin) * inv;
    let fy = (y - origin) * inv;
    let ix = fx.floor();
    let iy = fy.floor();
    let tx = fx - ix;
    let ty = fy - iy;
    let ix = ix as i64;
    let iy = iy as i64;
    let clamp = |v: i64| v.clamp(0, n - 1) as usize;
    let mut col = [0.0; 4];
    for (a, ci) in [-1i64, 0, 1, 2].into_iter().enumerate() {
        let i = clamp(ix + ci);
        let row = [
            map.values[[i, clamp(iy - 1)]],
            map.values[[i, clamp(iy)]],
            map.values[[i, clamp(iy + 1)]],
            map.values[[i, clamp(iy + 2)]],
        ];
        col[a] = catmull_rom(row, ty);
    }
    catmull_rom(col, tx)
}

fn negativity_lobatto(map: &PhaseSpaceGrid) -> f64 {
    let hw = map.half_width();
    let panels = (2.0 * hw / LOBATTO_PANEL - 1e-12).ceil() as usize;
    let lo = -(panels as f64) * LOBATTO_PANEL / 2.0;
    let panel_list: Vec<(f64, f64)> = (0..panels)
        .flat_map(|i| {
            let x0 = lo + i as f64 * LOBATTO_PANEL;
            (0..panels).map(move |j| (x0, lo + j as f64 * LOBATTO_PANEL))
        })
        .collect();
    let totals: Vec<f64> = panel_list
        .par_iter()
        .map(|&(x0, y0)| {
            let mut total = 0.0;
            let mut stack = vec![(x0, y0, LOBATTO_PANEL, 0usize)];
            while let Some((px, py, w, depth)) = stack.pop() {
                let hp = 0.5 * w;
                let cx = px + hp;
                let cy = py + hp;
                let mut vals = [[0.0f64; 8]; 8];
                let mut any_neg = false;
                let mut any_pos = false;
                for (a, xi) in LOBATTO_NODES.iter().enumerate() {
                    let x = cx + hp * xi;
                    for (b, yi) in LOBATTO_NODES.iter().enumerate() {
                        let v = bicubic(map, x, cy + hp * yi);
                        vals[a][b] = v;
                        if v < 0.0 {
                            any_neg = true;
                        } else {
                            any_pos = true;
                        }
                    }
                }
                if !any_neg {
                    continue;
                }
                if !any_pos || depth >= LOBATTO_MAX_DEPTH {
                    let mut acc = 0.0;
                    for a in 0..8 {
                        for b in 0..8 {
                            let v = vals[a][b];
                            if v < 0.0 {
                                acc += LOBATTO_WEIGHTS[a] * LOBATTO_WEIGHTS[b] * (-v);
                            }
                        }
                    }
                    total += acc * hp * hp;
                } else {
                    let nh = 0.5 * w;
                    stack.push((px, py, nh, depth + 1));
                    stack.push((px + nh, py, nh, depth + 1));
                    stack.push((px, py + nh, nh, depth + 1));
                    stack.push((px + nh, py + nh, nh, depth + 1));
                }
            }
            total
        })
        .collect();
    let mut sum = KahanSum::new();
    for t in totals {
        sum.add(t);
    }
    sum.value()
}
