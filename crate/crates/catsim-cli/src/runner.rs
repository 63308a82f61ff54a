//! Executes a resolved [`RunSpec`]: propagation from vacuum, per-snapshot
//! signature analysis, timeline metrics, conservation audits, and artifact
//! output.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use catsim::analytic::{cat_density, IdealCatSpec};
use catsim::fock::FockDensityMatrix;
use catsim::liouvillian::SuperOperator;
use catsim::metrics::{
    self, fringe_visibility, peak_separation, verdict_from_parts, CatTimeline, PeakSeparation,
    TimelineEntry, VerdictConfig, DEFAULT_LIFETIME_THRESHOLD,
};
use catsim::params::{suggest_cutoff, ScaledParams, TimeUnit};
use catsim::persist::SnapshotWriter;
use catsim::propagator::{evolve, suggest_dt, EvolutionPlan, MonitorReport, Snapshot};
use catsim::signatures::{
    photon_number_distribution, purity, q_function, quadrature_distribution, wigner_clenshaw,
    wigner_negativity, GridSpec, NegativityMethod, PhaseSpaceGrid,
};
use catsim::util::ln_factorial;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunSpec, SignatureOptions, SnapshotSpec};
use crate::{CliError, Result};

/// Extra Fock levels on top of the suggested cutoff when building ideal
/// reference cats, keeping far-field Wigner values truncation-clean.
const IDEAL_MARGIN: usize = 12;

/// Amplitude bin width of the cached ideal-negativity table used by the
/// per-snapshot verdicts; the reference varies slowly on this scale, so
/// linear interpolation between bins stays far inside the 20% verdict
/// window.
const IDEAL_TABLE_BIN: f64 = 0.25;

/// Number of geometrically spaced early snapshots added by `log_early`.
const EARLY_SNAPSHOTS: usize = 12;

/// Relative tolerance on the dual-integrator certification entries.
pub const CERTIFICATION_REL_TOL: f64 = 5e-4;

/// Smallest negativity for which a relative integrator comparison is
/// meaningful; below this both integrators sit in quadrature noise.
pub const CERTIFICATION_DELTA_FLOOR: f64 = 1e-3;

/// Execution options supplied by the CLI layer.
#[derive(Debug, Clone, Default)]
pub struct ExecuteOptions {
    /// Omit volatile fields (wall time) from the manifest.
    pub deterministic: bool,
    /// Output directory override; None falls back to the spec and, failing
    /// that, produces no artifacts.
    pub out_dir: Option<PathBuf>,
}

/// One analyzed snapshot in the per-run series table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesRow {
    pub index: usize,
    pub time: f64,
    pub nbar: f64,
    pub purity: f64,
    pub odd_parity: f64,
    pub trace_deviation: f64,
    pub hermiticity_defect: f64,
    pub delta_trap: Option<f64>,
    pub delta_gl: Option<f64>,
    pub visibility: Option<f64>,
    pub separated: Option<bool>,
    pub trough_ratio: Option<f64>,
    pub is_cat: Option<bool>,
}

/// Conservation and consistency audit over a completed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConservationSummary {
    pub max_trace_deviation: f64,
    pub max_hermiticity_defect: f64,
    pub max_tail_occupancy: f64,
    /// Largest odd-parity mass over the run; present only in the
    /// parity-conserving configuration (lossless signal, N = 0).
    pub parity_drift: Option<f64>,
    /// Sup-norm mismatch between Wigner marginals and directly computed
    /// quadrature distributions at the audit snapshot.
    pub marginal_max_diff: Option<f64>,
    /// Relative negativity mass outside the tracking window, measured on a
    /// full-support map at the audit snapshot.
    pub negativity_outside_window: Option<f64>,
    /// Snapshot time the audit map was evaluated at.
    pub audit_time: Option<f64>,
}

/// Dual-integrator agreement at one certification snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificationEntry {
    pub label: String,
    pub index: usize,
    pub time: f64,
    pub half_width: f64,
    pub step: f64,
    pub delta_trapezoid: f64,
    pub delta_gauss_lobatto: f64,
    /// |trap − gl| / max(|trap|, |gl|).
    pub rel_diff: f64,
    /// Whether both integrators sit above the comparison floor.
    pub comparable: bool,
}

/// Lifetime extraction result following the table conventions: a peak that
/// never exceeds the threshold reports zero, and a decay that has not
/// crossed the threshold by the end of the horizon is censored rather than
/// guessed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LifetimeOutcome {
    NotComputed,
    Zero,
    Value { lifetime: f64 },
    Censored { last_time: f64, last_delta: f64 },
}

impl LifetimeOutcome {
    /// Numeric value when the convention defines one (Zero -> 0.0).
    pub fn numeric(&self) -> Option<f64> {
        match self {
            LifetimeOutcome::Zero => Some(0.0),
            LifetimeOutcome::Value { lifetime } => Some(*lifetime),
            _ => None,
        }
    }
}

/// Photon-number statistics of one snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhotonStats {
    pub time: f64,
    pub mean: f64,
    pub argmax: usize,
    /// Total variation distance to a Poisson distribution with the same
    /// mean (Poisson mass beyond the cutoff counts as discrepancy).
    pub poisson_tv: f64,
    /// Probability mass on even photon numbers.
    pub even_weight: f64,
}

/// Headline quantities extracted from the timeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measurements {
    pub alpha0_abs: f64,
    pub theta_parallel: f64,
    /// Ideal-cat negativity at the predicted (complex) amplitude on the
    /// run's measurement grid; the formation reference.
    pub ideal_delta: Option<f64>,
    pub formation_time: Option<f64>,
    pub peak_delta: Option<f64>,
    pub peak_time: Option<f64>,
    pub lifetime: LifetimeOutcome,
    pub lifetime_threshold: f64,
    pub ever_separated: bool,
    pub ever_cat: bool,
    pub final_nbar: f64,
    pub final_purity: f64,
    pub photon_stats: Option<PhotonStats>,
}

/// Grids and step sizes the runner actually used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedPlan {
    pub cutoff: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub snapshot_count: usize,
    pub delta_half_width: Option<f64>,
    pub delta_step: Option<f64>,
    pub quadrature_half_width: Option<f64>,
    pub quadrature_step: Option<f64>,
}

/// Top-level run record written to `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub catsim_version: String,
    pub cli_version: String,
    pub spec: RunSpec,
    pub resolved: ResolvedPlan,
    pub monitor: MonitorReport,
    pub conservation: ConservationSummary,
    pub certification: Vec<CertificationEntry>,
    pub measurements: Measurements,
    /// Absent in deterministic mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

/// Everything a caller needs from one completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub timeline: Option<CatTimeline>,
    pub rows: Vec<SeriesRow>,
    pub out_dir: Option<PathBuf>,
}

/// Lazily filled table of ideal-cat negativities on the run grid, binned
/// by lobe amplitude and linearly interpolated between bins.
struct IdealDeltaTable {
    half_width: f64,
    step: f64,
    bins: Mutex<HashMap<i64, f64>>,
}

impl IdealDeltaTable {
    fn new(grid: &GridSpec) -> Self {
        Self {
            half_width: grid.half_width(),
            step: grid.step(),
            bins: Mutex::new(HashMap::new()),
        }
    }

    fn bin_value(&self, k: i64) -> Result<f64> {
        if let Some(v) = self.bins.lock().expect("table lock").get(&k) {
            return Ok(*v);
        }
        let v = metrics::ideal_reference_delta(k as f64 * IDEAL_TABLE_BIN, self.half_width, self.step)?;
        self.bins.lock().expect("table lock").insert(k, v);
        Ok(v)
    }

    fn lookup(&self, amplitude: f64) -> Result<f64> {
        let a = amplitude.max(IDEAL_TABLE_BIN);
        let k = (a / IDEAL_TABLE_BIN).floor() as i64;
        let frac = a / IDEAL_TABLE_BIN - k as f64;
        let d0 = self.bin_value(k)?;
        let d1 = self.bin_value(k + 1)?;
        Ok(d0 + frac * (d1 - d0))
    }
}

/// Ideal-cat trapezoid negativity at a complex amplitude on a given grid,
/// through the same truncated pipeline as the measured maps.
pub fn ideal_delta_at(alpha0: Complex64, grid: &GridSpec) -> Result<f64> {
    let spec = IdealCatSpec::even(alpha0);
    let cutoff = suggest_cutoff(alpha0) + IDEAL_MARGIN;
    let map = wigner_clenshaw(&cat_density(&spec, cutoff)?, grid)?;
    Ok(wigner_negativity(&map, NegativityMethod::Trapezoid).delta)
}

/// Default Wigner window for negativity tracking: full support for small
/// amplitudes, a fixed central window for large ones (the interference
/// region carries all the negativity; the audit map checks the remainder).
fn default_delta_half_width(alpha0_abs: f64) -> f64 {
    if alpha0_abs <= 3.0 {
        alpha0_abs + 4.0
    } else {
        4.5
    }
}

/// Fringe-resolving certification step: 32 samples per interference
/// wavelength pi/(2 alpha0), capped at the measurement default.
pub fn certification_step(alpha0_abs: f64) -> f64 {
    if alpha0_abs <= 0.0 {
        0.02
    } else {
        (PI / (64.0 * alpha0_abs)).min(0.02)
    }
}

fn delta_grid(opts: &SignatureOptions, alpha0_abs: f64) -> Result<GridSpec> {
    let hw = opts
        .delta_half_width
        .unwrap_or_else(|| default_delta_half_width(alpha0_abs));
    let step = opts.delta_step.unwrap_or(0.02);
    Ok(GridSpec::centered(hw, step)?)
}

fn quad_grid(opts: &SignatureOptions, alpha0_abs: f64) -> Result<GridSpec> {
    let hw = opts
        .quadrature_half_width
        .unwrap_or(std::f64::consts::SQRT_2 * alpha0_abs + 5.0);
    let step = opts.quadrature_step.unwrap_or(0.01);
    Ok(GridSpec::centered(hw, step)?)
}

/// Snapshot schedule for a plan: either the explicit list or `n` evenly
/// spaced times, optionally with a geometric early burst.
fn schedule(snapshots: &SnapshotSpec, t_end: f64, dt: f64) -> Vec<f64> {
    match snapshots {
        SnapshotSpec::Times { times } => times.clone(),
        SnapshotSpec::Count { n, log_early } => {
            let n = (*n).max(1);
            let mut ts: Vec<f64> = (1..=n).map(|k| t_end * k as f64 / n as f64).collect();
            if *log_early && n > 1 {
                let first = t_end / n as f64;
                let t0 = (2.0 * dt).max(1e-4 * t_end);
                if t0 < 0.95 * first {
                    let ratio = (first / t0).powf(1.0 / EARLY_SNAPSHOTS as f64);
                    let mut t = t0;
                    for _ in 0..EARLY_SNAPSHOTS {
                        ts.push(t);
                        t *= ratio;
                    }
                }
            }
            ts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
            ts
        }
    }
}

/// Parabola-interpolated maximum of a sampled series. Falls back to the
/// raw sample at the edges.
fn interpolated_peak(times: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let i = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite series"))
        .map(|(i, _)| i)?;
    if i == 0 || i + 1 == n {
        return Some((times[i], values[i]));
    }
    let (tm, t0, tp) = (times[i - 1], times[i], times[i + 1]);
    let (ym, y0, yp) = (values[i - 1], values[i], values[i + 1]);
    let dx = 0.5 * (tp - tm);
    let denom = ym - 2.0 * y0 + yp;
    if denom >= 0.0 || !denom.is_finite() {
        return Some((t0, y0));
    }
    let shift = 0.5 * (ym - yp) / denom;
    let t_peak = t0 + shift.clamp(-1.0, 1.0) * dx;
    let y_peak = y0 - 0.25 * (ym - yp) * shift.clamp(-1.0, 1.0);
    Some((t_peak, y_peak.max(y0)))
}

fn poisson_pmf(mu: f64, n: usize) -> f64 {
    if mu <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mu.ln() - mu - ln_factorial(n)).exp()
}

fn photon_stats(time: f64, dist: &[f64], mean: f64) -> PhotonStats {
    let argmax = dist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite distribution"))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut acc = 0.0;
    let mut poisson_mass = 0.0;
    for (n, &p) in dist.iter().enumerate() {
        let q = poisson_pmf(mean, n);
        poisson_mass += q;
        acc += (p - q).abs();
    }
    let tv = 0.5 * (acc + (1.0 - poisson_mass).max(0.0));
    let even_weight = dist.iter().step_by(2).sum::<f64>();
    PhotonStats {
        time,
        mean,
        argmax,
        poisson_tv: tv,
        even_weight,
    }
}

/// Scalar analysis of one snapshot (maps are not retained).
struct SnapScalars {
    row: SeriesRow,
    separation: Option<PeakSeparation>,
    verdict: Option<metrics::CatVerdict>,
}

#[allow(clippy::too_many_arguments)]
fn analyze_snapshot(
    index: usize,
    snap: &Snapshot,
    opts: &SignatureOptions,
    dgrid: &GridSpec,
    qgrid: &GridSpec,
    theta_par: f64,
    alpha0_abs: f64,
    table: &IdealDeltaTable,
    verdict_config: &VerdictConfig,
) -> Result<SnapScalars> {
    let rho = &snap.rho;
    let mut row = SeriesRow {
        index,
        time: snap.time,
        nbar: rho.mean_photon_number(),
        purity: purity(rho),
        odd_parity: rho.odd_parity_mass(),
        trace_deviation: snap.monitors.trace_deviation,
        hermiticity_defect: snap.monitors.hermiticity_defect,
        delta_trap: None,
        delta_gl: None,
        visibility: None,
        separated: None,
        trough_ratio: None,
        is_cat: None,
    };

    if opts.wigner {
        let map = wigner_clenshaw(rho, dgrid)?;
        row.delta_trap = Some(wigner_negativity(&map, NegativityMethod::Trapezoid).delta);
        row.delta_gl = Some(wigner_negativity(&map, NegativityMethod::GaussLobatto).delta);
    }

    let mut separation = None;
    if opts.quadratures {
        let par = quadrature_distribution(rho, theta_par, qgrid)?;
        let perp = quadrature_distribution(rho, theta_par + PI / 2.0, qgrid)?;
        let sep = peak_separation(&par, alpha0_abs, verdict_config);
        let vis = fringe_visibility(&perp, alpha0_abs);
        row.visibility = Some(vis);
        row.separated = Some(sep.separated);
        row.trough_ratio = Some(sep.trough_ratio);
        separation = Some(sep);
    }

    let mut verdict = None;
    if opts.verdicts {
        let sep = separation.clone().expect("verdicts require quadratures");
        let vis = row.visibility.expect("verdicts require quadratures");
        let delta = row.delta_trap.expect("verdicts require wigner");
        let amplitude = sep.peak_amplitude.unwrap_or(alpha0_abs);
        let ideal = table.lookup(amplitude)?;
        let v = verdict_from_parts(&sep, vis, delta, ideal, amplitude, verdict_config);
        row.is_cat = Some(v.is_cat);
        verdict = Some(v);
    }

    Ok(SnapScalars {
        row,
        separation,
        verdict,
    })
}

/// Execute a run and (optionally) write its artifact directory.
pub fn execute(spec: &RunSpec, opts: &ExecuteOptions) -> Result<RunOutcome> {
    let started = Instant::now();
    let sig = &spec.signatures;
    if sig.verdicts && !(sig.wigner && sig.quadratures) {
        return Err(CliError::Validation(
            "signatures.verdicts requires both wigner and quadratures".into(),
        ));
    }
    if sig.certify && !sig.wigner {
        return Err(CliError::Validation(
            "signatures.certify requires wigner".into(),
        ));
    }

    let params: ScaledParams = spec.params.to_scaled()?;
    let alpha0 = params.alpha0();
    let alpha0_abs = alpha0.norm();
    let theta_par = sig.theta_parallel.unwrap_or_else(|| {
        if alpha0_abs > 0.0 {
            alpha0.arg()
        } else {
            0.0
        }
    });

    let cutoff = match spec.cutoff {
        Some(c) => c,
        None => suggest_cutoff(alpha0),
    };
    let op = SuperOperator::build(&params, cutoff, spec.unit)?;

    let dt = match spec.dt {
        Some(d) => {
            if !(d.is_finite() && d > 0.0) {
                return Err(CliError::Validation(format!(
                    "dt must be finite and positive, got {d}"
                )));
            }
            d.min(spec.t_end)
        }
        None => {
            let d = suggest_dt(&op);
            spec.t_end / (spec.t_end / d).ceil().max(1.0)
        }
    };

    let times = schedule(&spec.snapshots, spec.t_end, dt);
    let plan = EvolutionPlan::new(spec.t_end, dt)?
        .with_snapshots(&times)?
        .with_monitors(spec.monitors.tolerances());
    let n_steps = plan.n_steps();

    let rho0 = FockDensityMatrix::vacuum(cutoff)?;
    let result = evolve(&op, &rho0, &plan)?;
    let snapshots = &result.snapshots;

    let dgrid = if sig.wigner {
        Some(delta_grid(sig, alpha0_abs)?)
    } else {
        None
    };
    let qgrid = if sig.quadratures || sig.wigner {
        Some(quad_grid(sig, alpha0_abs)?)
    } else {
        None
    };
    let verdict_config = VerdictConfig::default();

    // Per-snapshot scalar analysis, parallel across snapshots.
    let table = dgrid.as_ref().map(IdealDeltaTable::new);
    let scalars: Vec<SnapScalars> = if let (Some(dg), Some(qg)) = (dgrid.as_ref(), qgrid.as_ref()) {
        snapshots
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                analyze_snapshot(
                    i,
                    s,
                    sig,
                    dg,
                    qg,
                    theta_par,
                    alpha0_abs,
                    table.as_ref().expect("table built with grid"),
                    &verdict_config,
                )
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        // No Wigner window: quadrature/photon-only analysis.
        snapshots
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut row = SeriesRow {
                    index: i,
                    time: s.time,
                    nbar: s.rho.mean_photon_number(),
                    purity: purity(&s.rho),
                    odd_parity: s.rho.odd_parity_mass(),
                    trace_deviation: s.monitors.trace_deviation,
                    hermiticity_defect: s.monitors.hermiticity_defect,
                    delta_trap: None,
                    delta_gl: None,
                    visibility: None,
                    separated: None,
                    trough_ratio: None,
                    is_cat: None,
                };
                let mut separation = None;
                if sig.quadratures {
                    let qg = quad_grid(sig, alpha0_abs)?;
                    let par = quadrature_distribution(&s.rho, theta_par, &qg)?;
                    let perp = quadrature_distribution(&s.rho, theta_par + PI / 2.0, &qg)?;
                    let sep = peak_separation(&par, alpha0_abs, &verdict_config);
                    row.visibility = Some(fringe_visibility(&perp, alpha0_abs));
                    row.separated = Some(sep.separated);
                    row.trough_ratio = Some(sep.trough_ratio);
                    separation = Some(sep);
                }
                Ok(SnapScalars {
                    row,
                    separation,
                    verdict: None,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };

    let rows: Vec<SeriesRow> = scalars.iter().map(|s| s.row.clone()).collect();

    // Timeline (requires the full verdict pipeline).
    let timeline = if sig.verdicts {
        let entries: Vec<TimelineEntry> = scalars
            .iter()
            .map(|s| TimelineEntry {
                time: s.row.time,
                delta: s.row.delta_trap.expect("wigner on"),
                purity: s.row.purity,
                visibility: s.row.visibility.expect("quadratures on"),
                separation: s.separation.clone().expect("quadratures on"),
                verdict: s.verdict.clone().expect("verdicts on"),
            })
            .collect();
        Some(CatTimeline::new(spec.unit, entries)?)
    } else {
        None
    };

    // Headline measurements.
    let ideal_delta = match (&dgrid, alpha0_abs > 0.0) {
        (Some(dg), true) => Some(ideal_delta_at(alpha0, dg)?),
        _ => None,
    };
    let delta_series: Vec<f64> = rows.iter().filter_map(|r| r.delta_trap).collect();
    let time_series: Vec<f64> = rows
        .iter()
        .filter(|r| r.delta_trap.is_some())
        .map(|r| r.time)
        .collect();
    let peak = interpolated_peak(&time_series, &delta_series);
    let peak_index = delta_series
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite delta"))
        .map(|(i, _)| i);

    let formation_time = match (&timeline, ideal_delta) {
        (Some(tl), Some(ideal)) => metrics::formation_time(tl, ideal),
        _ => None,
    };
    let lifetime = match &timeline {
        None => LifetimeOutcome::NotComputed,
        Some(tl) => {
            // The threshold convention compares raw samples, so the
            // zero/censored split must too; the interpolated peak can sit
            // above the threshold while every sample is below it.
            let sample_peak = tl
                .entries()
                .iter()
                .map(|e| e.delta)
                .fold(f64::NEG_INFINITY, f64::max);
            if sample_peak > DEFAULT_LIFETIME_THRESHOLD {
                match metrics::lifetime(tl, DEFAULT_LIFETIME_THRESHOLD) {
                    Some(v) => LifetimeOutcome::Value { lifetime: v },
                    None => {
                        let last = tl.entries().last().expect("nonempty timeline");
                        LifetimeOutcome::Censored {
                            last_time: last.time,
                            last_delta: last.delta,
                        }
                    }
                }
            } else {
                LifetimeOutcome::Zero
            }
        }
    };

    let final_row = rows.last().ok_or_else(|| {
        CliError::Validation("run produced no snapshots; check the schedule".into())
    })?;
    let stats = if sig.photon {
        let last = snapshots.last().expect("snapshots nonempty");
        let dist = photon_number_distribution(&last.rho);
        Some(photon_stats(last.time, &dist, last.rho.mean_photon_number()))
    } else {
        None
    };

    let measurements = Measurements {
        alpha0_abs,
        theta_parallel: theta_par,
        ideal_delta,
        formation_time,
        peak_delta: peak.map(|(_, d)| d),
        peak_time: peak.map(|(t, _)| t),
        lifetime,
        lifetime_threshold: DEFAULT_LIFETIME_THRESHOLD,
        ever_separated: rows.iter().any(|r| r.separated == Some(true)),
        ever_cat: rows.iter().any(|r| r.is_cat == Some(true)),
        final_nbar: final_row.nbar,
        final_purity: final_row.purity,
        photon_stats: stats,
    };

    // Certification: dual integrators on fringe-resolving grids at the
    // peak, formation-crossing, and final snapshots.
    let mut certification = Vec::new();
    if sig.certify {
        let dg = dgrid.as_ref().expect("certify requires wigner");
        let cert_step = certification_step(alpha0_abs);
        let meas_is_cert = dg.step() <= cert_step * (1.0 + 1e-9);
        let mut targets: Vec<(&str, usize)> = Vec::new();
        if let Some(i) = peak_index {
            targets.push(("peak", i));
        }
        if let (Some(ft), Some(_)) = (formation_time, &timeline) {
            if let Some(i) = rows.iter().position(|r| r.time >= ft) {
                targets.push(("formation", i));
            }
        }
        targets.push(("final", rows.len() - 1));
        let mut seen = Vec::new();
        for (label, idx) in targets {
            if seen.contains(&idx) {
                continue;
            }
            seen.push(idx);
            let entry = if meas_is_cert {
                let r = &rows[idx];
                certification_entry(
                    label,
                    idx,
                    r.time,
                    dg.half_width(),
                    dg.step(),
                    r.delta_trap.expect("wigner on"),
                    r.delta_gl.expect("wigner on"),
                )
            } else {
                let grid = GridSpec::centered(dg.half_width(), cert_step)?;
                let map = wigner_clenshaw(&snapshots[idx].rho, &grid)?;
                let dt_ = wigner_negativity(&map, NegativityMethod::Trapezoid).delta;
                let dg_ = wigner_negativity(&map, NegativityMethod::GaussLobatto).delta;
                certification_entry(
                    label,
                    idx,
                    rows[idx].time,
                    grid.half_width(),
                    cert_step,
                    dt_,
                    dg_,
                )
            };
            certification.push(entry);
        }
    }

    // Window audit and marginal consistency at the peak snapshot.
    let mut conservation = ConservationSummary {
        max_trace_deviation: result.report.max_trace_deviation,
        max_hermiticity_defect: result.report.max_hermiticity_defect,
        max_tail_occupancy: result.report.max_tail_occupancy,
        parity_drift: if params.is_lossless() && params.n_thermal() == 0.0 {
            Some(
                rows.iter()
                    .map(|r| r.odd_parity)
                    .fold(0.0_f64, |a, b| a.max(b.abs())),
            )
        } else {
            None
        },
        marginal_max_diff: None,
        negativity_outside_window: None,
        audit_time: None,
    };
    if sig.window_audit && sig.wigner {
        let dg = dgrid.as_ref().expect("wigner on");
        let idx = peak_index.unwrap_or(rows.len() - 1);
        let rho = &snapshots[idx].rho;
        let full_hw = (alpha0_abs + 4.0).max(dg.half_width());
        let full_grid = GridSpec::centered(full_hw, dg.step())?;
        let full_map = wigner_clenshaw(rho, &full_grid)?;
        let delta_full = wigner_negativity(&full_map, NegativityMethod::Trapezoid).delta;
        let delta_win = rows[idx].delta_trap.expect("wigner on");
        conservation.negativity_outside_window =
            Some((delta_full - delta_win).abs() / delta_full.max(1e-6));
        conservation.marginal_max_diff = Some(marginal_consistency(rho, &full_map)?);
        conservation.audit_time = Some(rows[idx].time);
    }

    let resolved = ResolvedPlan {
        cutoff,
        dt,
        n_steps,
        snapshot_count: snapshots.len(),
        delta_half_width: dgrid.as_ref().map(|g| g.half_width()),
        delta_step: dgrid.as_ref().map(|g| g.step()),
        quadrature_half_width: qgrid.as_ref().map(|g| g.half_width()),
        quadrature_step: qgrid.as_ref().map(|g| g.step()),
    };

    let manifest = RunManifest {
        format_version: 1,
        catsim_version: catsim_version(),
        cli_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        resolved,
        monitor: result.report,
        conservation,
        certification,
        measurements,
        wall_seconds: if opts.deterministic {
            None
        } else {
            Some(started.elapsed().as_secs_f64())
        },
    };

    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| spec.output.directory.clone());
    if let Some(dir) = &out_dir {
        write_artifacts(
            dir,
            spec,
            &params,
            cutoff,
            spec.unit,
            &manifest,
            &timeline,
            &rows,
            snapshots,
            peak_index,
            theta_par,
            alpha0_abs,
        )?;
    }

    Ok(RunOutcome {
        manifest,
        timeline,
        rows,
        out_dir,
    })
}

fn catsim_version() -> String {
    // The library crate shares the workspace version.
    env!("CARGO_PKG_VERSION").to_string()
}

fn certification_entry(
    label: &str,
    index: usize,
    time: f64,
    half_width: f64,
    step: f64,
    delta_trapezoid: f64,
    delta_gauss_lobatto: f64,
) -> CertificationEntry {
    let scale = delta_trapezoid.abs().max(delta_gauss_lobatto.abs());
    let rel_diff = if scale > 0.0 {
        (delta_trapezoid - delta_gauss_lobatto).abs() / scale
    } else {
        0.0
    };
    CertificationEntry {
        label: label.to_string(),
        index,
        time,
        half_width,
        step,
        delta_trapezoid,
        delta_gauss_lobatto,
        rel_diff,
        comparable: scale >= CERTIFICATION_DELTA_FLOOR,
    }
}

/// Sup-norm difference between the Wigner map marginals and directly
/// computed quadrature distributions at theta = 0 and theta = pi/2.
fn marginal_consistency(rho: &FockDensityMatrix, map: &PhaseSpaceGrid) -> Result<f64> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let qgrid = GridSpec::centered(map.half_width() * sqrt2, map.step() * sqrt2)?;
    let axis = qgrid.axis();
    let mut worst = 0.0_f64;
    for (theta, marginal) in [(0.0, map.x_marginal()), (PI / 2.0, map.p_marginal())] {
        let dist = quadrature_distribution(rho, theta, &qgrid)?;
        let (xs, ps) = marginal;
        for (x, p) in xs.iter().zip(ps.iter()) {
            let j = ((x - axis[0]) / qgrid.step()).round() as i64;
            if j < 0 || j as usize >= axis.len() {
                continue;
            }
            let diff = (p - dist.values()[j as usize]).abs();
            worst = worst.max(diff);
        }
    }
    Ok(worst)
}

#[allow(clippy::too_many_arguments)]
fn write_artifacts(
    dir: &Path,
    spec: &RunSpec,
    params: &ScaledParams,
    cutoff: usize,
    unit: TimeUnit,
    manifest: &RunManifest,
    timeline: &Option<CatTimeline>,
    rows: &[SeriesRow],
    snapshots: &[Snapshot],
    peak_index: Option<usize>,
    theta_par: f64,
    alpha0_abs: f64,
) -> Result<()> {
    fs::create_dir_all(dir)?;

    let manifest_json =
        serde_json::to_string_pretty(manifest).map_err(|e| CliError::Format(e.to_string()))?;
    fs::write(dir.join("manifest.json"), manifest_json + "\n")?;

    write_series_csv(&dir.join("series.csv"), rows)?;

    if let Some(tl) = timeline {
        let mut buf = Vec::new();
        tl.write_csv(&mut buf)?;
        fs::write(dir.join("timeline.csv"), buf)?;
        let json =
            serde_json::to_string_pretty(tl).map_err(|e| CliError::Format(e.to_string()))?;
        fs::write(dir.join("timeline.json"), json + "\n")?;
    }

    // Full per-snapshot bundles for the chosen report snapshots.
    let mut report_indices = spec
        .output
        .report_snapshots
        .clone()
        .unwrap_or_else(|| {
            let mut v = Vec::new();
            if let Some(p) = peak_index {
                v.push(p);
            }
            v.push(rows.len().saturating_sub(1));
            v
        });
    report_indices.sort_unstable();
    report_indices.dedup();
    for idx in report_indices {
        if idx >= snapshots.len() {
            return Err(CliError::Validation(format!(
                "report snapshot index {idx} out of range ({} snapshots)",
                snapshots.len()
            )));
        }
        write_report_bundle(
            &dir.join(format!("report-{idx:04}")),
            &snapshots[idx],
            &spec.signatures,
            theta_par,
            alpha0_abs,
        )?;
    }

    if spec.output.write_states {
        let mut writer = SnapshotWriter::create(&dir.join("states.bin"), params, cutoff, unit)?;
        for snap in snapshots {
            writer.append(snap)?;
        }
        writer.finish()?;
    }

    Ok(())
}

fn write_series_csv(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "index,time,nbar,purity,odd_parity,trace_deviation,hermiticity_defect,\
         delta_trap,delta_gl,visibility,separated,trough_ratio,is_cat\n",
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let optb = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            r.time,
            r.nbar,
            r.purity,
            r.odd_parity,
            r.trace_deviation,
            r.hermiticity_defect,
            opt(r.delta_trap),
            opt(r.delta_gl),
            opt(r.visibility),
            optb(r.separated),
            opt(r.trough_ratio),
            optb(r.is_cat),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_report_bundle(
    dir: &Path,
    snap: &Snapshot,
    sig: &SignatureOptions,
    theta_par: f64,
    alpha0_abs: f64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let rho = &snap.rho;

    let mut meta = fs::File::create(dir.join("snapshot.json"))?;
    writeln!(
        meta,
        "{}",
        serde_json::json!({
            "time": snap.time,
            "unit": snap.unit.to_string(),
            "nbar": rho.mean_photon_number(),
            "purity": purity(rho),
            "theta_parallel": theta_par,
        })
    )?;

    if sig.photon {
        let dist = photon_number_distribution(rho);
        let mut out = String::from("n,probability\n");
        for (n, p) in dist.iter().enumerate() {
            out.push_str(&format!("{n},{p}\n"));
        }
        fs::write(dir.join("photon.csv"), out)?;
    }

    if sig.quadratures {
        let qg = quad_grid(sig, alpha0_abs)?;
        for (name, theta) in [
            ("quad-parallel.csv", theta_par),
            ("quad-perpendicular.csv", theta_par + PI / 2.0),
        ] {
            let dist = quadrature_distribution(rho, theta, &qg)?;
            let mut buf = Vec::new();
            dist.write_csv(&mut buf)?;
            fs::write(dir.join(name), buf)?;
        }
    }

    if sig.wigner {
        let dg = delta_grid(sig, alpha0_abs)?;
        let map = wigner_clenshaw(rho, &dg)?;
        let mut buf = Vec::new();
        map.write_csv(&mut buf)?;
        fs::write(dir.join("wigner.csv"), buf)?;
    }

    if sig.husimi {
        let hw = sig.husimi_half_width.unwrap_or(alpha0_abs + 4.0);
        let step = sig.husimi_step.unwrap_or(0.1);
        let grid = GridSpec::centered(hw, step)?;
        let map = q_function(rho, &grid)?;
        let mut buf = Vec::new();
        map.write_csv(&mut buf)?;
        fs::write(dir.join("husimi.csv"), buf)?;
    }

    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use catsim::params::ScaledParams;

    #[test]
    fn schedule_even_count_hits_t_end() {
        let ts = schedule(
            &SnapshotSpec::Count {
                n: 4,
                log_early: false,
            },
            1.0,
            0.01,
        );
        assert_eq!(ts.len(), 4);
        assert!((ts[3] - 1.0).abs() < 1e-15);
        assert!((ts[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn schedule_log_early_prepends_burst() {
        let ts = schedule(
            &SnapshotSpec::Count {
                n: 10,
                log_early: true,
            },
            1.0,
            1e-4,
        );
        assert_eq!(ts.len(), 10 + EARLY_SNAPSHOTS);
        assert!(ts[0] < 0.1);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn interpolated_peak_refines_parabola() {
        // Samples of 1 - (t - 0.31)^2 on a coarse grid.
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| 1.0 - (t - 0.31) * (t - 0.31)).collect();
        let (t, v) = interpolated_peak(&times, &values).unwrap();
        assert!((t - 0.31).abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_stats_flag_poisson_as_close() {
        let mu = 7.3;
        let dist: Vec<f64> = (0..60).map(|n| poisson_pmf(mu, n)).collect();
        let stats = photon_stats(0.0, &dist, mu);
        assert!(stats.poisson_tv < 1e-10);
        assert_eq!(stats.argmax, 7);
    }

    #[test]
    fn minimal_vacuum_run_executes() {
        // No drive: vacuum stays vacuum; one step.
        let p = ScaledParams::new(1e-8, 1e-4, 0.0, 0.0, 0.0).unwrap();
        let mut spec = RunSpec::new("vacuum", &p, TimeUnit::Tau, 1e-3);
        spec.cutoff = Some(4);
        spec.dt = Some(1e-3);
        spec.snapshots = SnapshotSpec::Times { times: vec![1e-3] };
        spec.signatures.wigner = false;
        spec.signatures.verdicts = false;
        spec.signatures.window_audit = false;
        let out = execute(&spec, &ExecuteOptions::default()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].nbar.abs() < 1e-10);
        assert!(out.manifest.monitor.max_trace_deviation < 1e-12);
    }
}
