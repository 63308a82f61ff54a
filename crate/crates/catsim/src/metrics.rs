//! Cat-state detection from evolution snapshots: formation time against the
//! ideal-cat negativity, lifetime from the negativity maximum to a decay
//! threshold, fringe visibility, peak separation, and a combined verdict.
//!
//! The verdict follows the two-signature methodology: Wigner negativity
//! alone is not conclusive, so a state only counts as a cat when the
//! quadrature distribution along the lobe axis shows two well-separated
//! peaks, the orthogonal quadrature shows high-visibility fringes, and the
//! negativity sits close to the ideal-cat value for the measured lobe
//! amplitude.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::analytic::{cat_density, IdealCatSpec};
use crate::error::{CatsimError, Result};
use crate::params::{suggest_cutoff, TimeUnit};
use crate::signatures::{
    wigner_clenshaw, wigner_negativity, GridSpec, NegativityMethod, PhaseSpaceGrid,
    QuadratureDistribution,
};

/// Relative agreement with the ideal negativity that counts as formation
/// (four significant figures).
pub const FORMATION_REL_TOL: f64 = 5e-4;

/// Negativity threshold below which a cat is considered decayed.
pub const DEFAULT_LIFETIME_THRESHOLD: f64 = 0.05;

/// Extra Fock levels added to the suggested cutoff when building the ideal
/// reference cat; keeps far-field Wigner values truncation-clean.
const IDEAL_REFERENCE_MARGIN: usize = 12;

/// Tunable thresholds of the combined cat verdict. The defaults encode the
/// certification rule: trough below 1% of the smaller peak, peaks within
/// 10% of ±√2|α₀|, fringe visibility above 0.5, and negativity within 20%
/// of the ideal-cat value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictConfig {
    /// Peak-separation requirement: trough < trough_frac · smaller peak.
    pub trough_frac: f64,
    /// Allowed relative deviation of peak positions from ±√2|α₀|.
    pub position_tol: f64,
    /// Minimum fringe visibility in the orthogonal quadrature.
    pub visibility_min: f64,
    /// Allowed relative deviation of δ from the ideal-cat value.
    pub delta_window: f64,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            trough_frac: 0.01,
            position_tol: 0.1,
            visibility_min: 0.5,
            delta_window: 0.2,
        }
    }
}

/// Outcome of the two-peak analysis of a lobe-axis quadrature distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSeparation {
    /// Both peaks found near ±√2|α₀| with a deep trough between them.
    pub separated: bool,
    /// Trough height relative to the smaller peak (1.0 when undefined).
    pub trough_ratio: f64,
    /// Interpolated positions of the two dominant maxima, lower first.
    pub peak_positions: Option<(f64, f64)>,
    /// Lobe amplitude |α| inferred from the peak positions.
    pub peak_amplitude: Option<f64>,
}

impl PeakSeparation {
    fn not_found() -> Self {
        Self {
            separated: false,
            trough_ratio: 1.0,
            peak_positions: None,
            peak_amplitude: None,
        }
    }
}

/// Combined cat verdict with per-criterion explanations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatVerdict {
    pub is_cat: bool,
    pub reasons: Vec<String>,
}

/// One analyzed snapshot of an evolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineEntry {
    pub time: f64,
    pub delta: f64,
    pub purity: f64,
    pub visibility: f64,
    pub separation: PeakSeparation,
    pub verdict: CatVerdict,
}

/// Time-ordered series of analyzed snapshots in one time convention.
#[derive(Debug, Clone, Serialize)]
pub struct CatTimeline {
    unit: TimeUnit,
    entries: Vec<TimelineEntry>,
}

impl CatTimeline {
    /// Requires at least one entry and strictly increasing times.
    pub fn new(unit: TimeUnit, entries: Vec<TimelineEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(CatsimError::InvalidParams(
                "timeline requires at least one entry".into(),
            ));
        }
        for e in &entries {
            if !e.time.is_finite() || !e.delta.is_finite() {
                return Err(CatsimError::InvalidParams(format!(
                    "timeline entry at t = {} has non-finite fields",
                    e.time
                )));
            }
        }
        for w in entries.windows(2) {
            if w[1].time <= w[0].time {
                return Err(CatsimError::InvalidParams(format!(
                    "timeline times must increase strictly, got {} then {}",
                    w[0].time, w[1].time
                )));
            }
        }
        Ok(Self { unit, entries })
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn entries(&self) -> &[TimelineEntry] {
        &self.entries
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.time).collect()
    }

    pub fn delta_series(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.delta).collect()
    }

    /// CSV rows (time, delta, purity, visibility, separated, is_cat) under
    /// a comment header naming the time unit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# timeline unit={}", self.unit)?;
        writeln!(w, "time,delta,purity,visibility,separated,is_cat")?;
        for e in &self.entries {
            writeln!(
                w,
                "{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
                e.time, e.delta, e.purity, e.visibility, e.separation.separated, e.verdict.is_cat
            )?;
        }
        Ok(())
    }
}

/// Vertex of the parabola through three equidistant samples centered on
/// `x0`. Falls back to the center sample when the points are collinear.
fn quadratic_vertex(x0: f64, dx: f64, y_prev: f64, y0: f64, y_next: f64) -> (f64, f64) {
    let denom = y_prev - 2.0 * y0 + y_next;
    if denom.abs() < 1e-300 {
        return (x0, y0);
    }
    let shift = (0.5 * (y_prev - y_next) / denom).clamp(-1.0, 1.0);
    let y = y0 - 0.125 * (y_prev - y_next) * (y_prev - y_next) / denom;
    (x0 + shift * dx, y)
}

/// First time the negativity agrees with the ideal-cat value to four
/// significant figures (relative difference below [`FORMATION_REL_TOL`]).
/// The ideal value must come from the same grid and integration scheme as
/// the timeline's δ series, so truncation bias cancels in the comparison.
pub fn formation_time(timeline: &CatTimeline, ideal_delta: f64) -> Option<f64> {
    if !(ideal_delta.is_finite() && ideal_delta > 0.0) {
        return None;
    }
    timeline
        .entries
        .iter()
        .find(|e| ((e.delta - ideal_delta) / ideal_delta).abs() < FORMATION_REL_TOL)
        .map(|e| e.time)
}

/// Time from the negativity maximum (parabola-interpolated) to the first
/// crossing below `threshold` (linearly interpolated). Returns None when δ
/// never exceeds the threshold, or never drops back below it within the
/// timeline; table conventions report those cases as lifetime 0.
pub fn lifetime(timeline: &CatTimeline, threshold: f64) -> Option<f64> {
    let n = timeline.entries.len();
    let (i_max, peak) = timeline
        .entries
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.delta.partial_cmp(&b.1.delta).expect("finite delta"))
        .map(|(i, e)| (i, e.delta))?;
    if peak <= threshold {
        return None;
    }
    let t_max = if i_max == 0 || i_max + 1 == n {
        timeline.entries[i_max].time
    } else {
        let e = &timeline.entries;
        // Interpolation assumes near-uniform spacing around the maximum.
        let dx = 0.5 * (e[i_max + 1].time - e[i_max - 1].time);
        quadratic_vertex(
            e[i_max].time,
            dx,
            e[i_max - 1].delta,
            e[i_max].delta,
            e[i_max + 1].delta,
        )
        .0
    };
    for i in (i_max + 1)..n {
        let (prev, cur) = (&timeline.entries[i - 1], &timeline.entries[i]);
        if cur.delta <= threshold {
            let frac = if prev.delta > cur.delta {
                ((prev.delta - threshold) / (prev.delta - cur.delta)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let t_cross = prev.time + frac * (cur.time - prev.time);
            return Some((t_cross - t_max).max(0.0));
        }
    }
    None
}

/// Indices of the samples with |x| strictly below `bound`.
fn central_indices(xs: &[f64], bound: f64) -> (usize, usize) {
    let lo = xs.partition_point(|&x| x <= -bound);
    let hi = xs.partition_point(|&x| x < bound);
    (lo, hi)
}

/// Fringe visibility (P_max − P_min)/(P_max + P_min) over the central
/// fringe region |p| < π/(√2|α₀|), from parabola-interpolated local
/// extrema. A distribution with no interior local minimum in the region
/// (a plain Gaussian) scores 0.
pub fn fringe_visibility(dist: &QuadratureDistribution, alpha0_abs: f64) -> f64 {
    if !(alpha0_abs.is_finite() && alpha0_abs > 0.0) {
        return 0.0;
    }
    let xs = dist.xs();
    let ys = dist.values();
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let bound = std::f64::consts::PI / (std::f64::consts::SQRT_2 * alpha0_abs);
    let (lo, hi) = central_indices(xs, bound);
    let mut p_max = f64::NEG_INFINITY;
    let mut p_min = f64::INFINITY;
    for i in lo.max(1)..hi.min(n - 1) {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        if b >= a && b >= c {
            let (_, y) = quadratic_vertex(xs[i], dist.step(), a, b, c);
            p_max = p_max.max(y);
        }
        if b <= a && b <= c {
            let (_, y) = quadratic_vertex(xs[i], dist.step(), a, b, c);
            p_min = p_min.min(y.max(0.0));
        }
    }
    if !(p_max.is_finite() && p_min.is_finite()) || p_max + p_min <= 0.0 {
        return 0.0;
    }
    ((p_max - p_min) / (p_max + p_min)).clamp(0.0, 1.0)
}

/// Two-peak analysis of the lobe-axis quadrature distribution: the two
/// dominant interior maxima are parabola-interpolated, the trough is the
/// lowest sample between them, and separation requires the trough below
/// `trough_frac` of the smaller peak with both peaks within
/// `position_tol` of ±√2|α₀|.
pub fn peak_separation(
    dist: &QuadratureDistribution,
    alpha0_abs: f64,
    config: &VerdictConfig,
) -> PeakSeparation {
    let xs = dist.xs();
    let ys = dist.values();
    let n = xs.len();
    if n < 3 {
        return PeakSeparation::not_found();
    }
    let mut maxima: Vec<(f64, f64, usize)> = Vec::new();
    for i in 1..(n - 1) {
        if ys[i] >= ys[i - 1] && ys[i] >= ys[i + 1] && (ys[i] > ys[i - 1] || ys[i] > ys[i + 1]) {
            let (x, y) = quadratic_vertex(xs[i], dist.step(), ys[i - 1], ys[i], ys[i + 1]);
            maxima.push((y, x, i));
        }
    }
    if maxima.len() < 2 {
        return PeakSeparation::not_found();
    }
    maxima.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite heights"));
    let (mut first, mut second) = (maxima[0].clone(), maxima[1].clone());
    if first.1 > second.1 {
        std::mem::swap(&mut first, &mut second);
    }
    let (y_lo, x_lo, i_lo) = first;
    let (y_hi, x_hi, i_hi) = second;
    let trough = ys[(i_lo + 1)..i_hi]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let smaller = y_lo.min(y_hi);
    let trough_ratio = if smaller > 0.0 { trough / smaller } else { 1.0 };
    let target = std::f64::consts::SQRT_2 * alpha0_abs;
    let tol = config.position_tol * target;
    let placed = target > 0.0 && (x_lo + target).abs() <= tol && (x_hi - target).abs() <= tol;
    PeakSeparation {
        separated: placed && trough_ratio < config.trough_frac,
        trough_ratio,
        peak_positions: Some((x_lo, x_hi)),
        peak_amplitude: Some((x_lo.abs() + x_hi.abs()) / (2.0 * std::f64::consts::SQRT_2)),
    }
}

/// Combined verdict from one snapshot's signatures: `map` is the Wigner
/// map, `parallel` the quadrature along the lobe axis (θ = φ), and
/// `perpendicular` the orthogonal quadrature (θ = φ + π/2). The ideal-cat
/// negativity reference is evaluated on the same grid as `map` at the lobe
/// amplitude measured from the peak positions.
pub fn cat_verdict(
    map: &PhaseSpaceGrid,
    parallel: &QuadratureDistribution,
    perpendicular: &QuadratureDistribution,
    alpha0_abs: f64,
    config: &VerdictConfig,
) -> Result<CatVerdict> {
    let separation = peak_separation(parallel, alpha0_abs, config);
    let visibility = fringe_visibility(perpendicular, alpha0_abs);
    let delta = wigner_negativity(map, NegativityMethod::Trapezoid).delta;

    let amplitude = separation.peak_amplitude.unwrap_or(alpha0_abs);
    let ideal_delta = ideal_reference_delta(amplitude, map.half_width(), map.step())?;
    Ok(verdict_from_parts(
        &separation,
        visibility,
        delta,
        ideal_delta,
        amplitude,
        config,
    ))
}

/// Trapezoid negativity of the ideal even cat at the given lobe amplitude,
/// evaluated through the same truncated-basis pipeline and on the same grid
/// geometry as the measured map, so grid and truncation biases cancel in
/// the verdict's ratio test.
pub fn ideal_reference_delta(amplitude: f64, half_width: f64, step: f64) -> Result<f64> {
    let spec = IdealCatSpec::even(Complex64::new(amplitude, 0.0));
    let cutoff = suggest_cutoff(spec.alpha0) + IDEAL_REFERENCE_MARGIN;
    let ideal = cat_density(&spec, cutoff)?;
    let grid = GridSpec::centered(half_width, step)?;
    let ideal_map = wigner_clenshaw(&ideal, &grid)?;
    Ok(wigner_negativity(&ideal_map, NegativityMethod::Trapezoid).delta)
}

/// Assemble the three-rule verdict from precomputed ingredients. Used by
/// [`cat_verdict`] and by batch drivers that cache the ideal reference
/// across snapshots.
pub fn verdict_from_parts(
    separation: &PeakSeparation,
    visibility: f64,
    delta: f64,
    ideal_delta: f64,
    amplitude: f64,
    config: &VerdictConfig,
) -> CatVerdict {
    let mut reasons = Vec::with_capacity(3);
    let sep_ok = separation.separated;
    reasons.push(if sep_ok {
        format!(
            "peaks separated: trough ratio {:.2e} below {:.2e}",
            separation.trough_ratio, config.trough_frac
        )
    } else {
        format!(
            "peaks not separated: trough ratio {:.2e}, positions {:?}",
            separation.trough_ratio, separation.peak_positions
        )
    });
    let vis_ok = visibility > config.visibility_min;
    reasons.push(format!(
        "fringe visibility {:.4} {} threshold {:.2}",
        visibility,
        if vis_ok { "above" } else { "not above" },
        config.visibility_min
    ));
    let delta_ok = ideal_delta > 0.0
        && ((delta - ideal_delta) / ideal_delta).abs() <= config.delta_window;
    reasons.push(format!(
        "negativity {:.6} {} {:.0}% of ideal {:.6} at amplitude {:.3}",
        delta,
        if delta_ok { "within" } else { "outside" },
        config.delta_window * 100.0,
        ideal_delta,
        amplitude
    ));
    CatVerdict {
        is_cat: sep_ok && vis_ok && delta_ok,
        reasons,
    }
}
