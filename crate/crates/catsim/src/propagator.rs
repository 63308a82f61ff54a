//! Fixed-step fourth-order Runge-Kutta propagation of the density matrix,
//! with per-step invariant monitors (trace, boundary-tail occupancy,
//! Hermiticity drift), snapshot scheduling on the step grid, and a
//! cutoff-convergence audit that reruns a plan at two cutoffs and compares
//! photon statistics and Wigner negativity.
//!
//! The integrator deliberately stays fixed-step: snapshots land exactly on
//! grid times and runs are bitwise reproducible for a given plan. Each step
//! re-symmetrizes the state, ρ ← (ρ + ρ†)/2, a cheap deviation from
//! textbook RK4 that stops rounding asymmetry from compounding; the
//! pre-symmetrization defect is recorded as the Hermiticity monitor.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use num_complex::Complex64;

use crate::error::{CatsimError, Result};
use crate::fock::FockDensityMatrix;
use crate::liouvillian::SuperOperator;
use crate::params::{ScaledParams, TimeUnit};
use crate::signatures::{
    photon_number_distribution, wigner_clenshaw, wigner_negativity, GridSpec, NegativityMethod,
};

/// Convergence threshold for the two-cutoff audit (photon-distribution
/// total variation and Wigner-negativity difference).
const CONVERGENCE_TOL: f64 = 1e-6;

/// Steps between Hermiticity-defect checks outside snapshot captures.
const HERMITICITY_CHECK_STRIDE: usize = 64;

/// Stability-reach budget for dt·(Gershgorin bound); the classical RK4
/// negative-real-axis limit is 2.785, kept with margin for nonnormality.
const RK4_STABILITY_REACH: f64 = 2.5;

/// Base step fraction of the fastest coefficient timescale.
const DT_BASE: f64 = 1.0 / 400.0;

/// Roundoff floor for the per-step trace-drift budget.
const TRACE_STEP_FLOOR: f64 = 1e-12;

/// Tolerances for the runtime invariant monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorTolerances {
    /// Bound on |Tr ρ − 1| over the whole run.
    pub trace_tol: f64,
    /// Bound on the boundary-tail occupancy (last three levels).
    pub tail_tol: f64,
    /// Bound on the pre-symmetrization Hermiticity defect per step.
    pub hermiticity_tol: f64,
}

impl Default for MonitorTolerances {
    fn default() -> Self {
        Self {
            trace_tol: 1e-8,
            tail_tol: 1e-8,
            hermiticity_tol: 1e-12,
        }
    }
}

/// A propagation request: horizon, step, snapshot times, and monitor
/// tolerances. Times are dimensionless in the unit of the operator the plan
/// is run with.
#[derive(Debug, Clone)]
pub struct EvolutionPlan {
    t_end: f64,
    dt: f64,
    snapshot_times: Vec<f64>,
    monitors: MonitorTolerances,
}

impl EvolutionPlan {
    /// A plan covering [0, t_end] with one snapshot at the end (or at 0 for
    /// a zero-duration plan). Requires 0 < dt ≤ t_end unless t_end = 0.
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        if !t_end.is_finite() || t_end < 0.0 {
            return Err(CatsimError::InvalidParams(format!(
                "t_end = {t_end} must be finite and non-negative"
            )));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(CatsimError::InvalidParams(format!(
                "dt = {dt} must be finite and positive"
            )));
        }
        if t_end > 0.0 && dt > t_end * (1.0 + 1e-12) {
            return Err(CatsimError::InvalidParams(format!(
                "dt = {dt} exceeds t_end = {t_end}"
            )));
        }
        Ok(Self {
            t_end,
            dt,
            snapshot_times: vec![t_end],
            monitors: MonitorTolerances::default(),
        })
    }

    /// Replace the snapshot schedule. Times must lie in [0, t_end]; they
    /// are sorted and deduplicated.
    pub fn with_snapshots(mut self, times: &[f64]) -> Result<Self> {
        if times.is_empty() {
            return Err(CatsimError::InvalidParams(
                "snapshot schedule must contain at least one time".into(),
            ));
        }
        let slack = self.dt * 1e-9;
        for &t in times {
            if !t.is_finite() || t < -slack || t > self.t_end + slack {
                return Err(CatsimError::InvalidParams(format!(
                    "snapshot time {t} lies outside [0, {}]",
                    self.t_end
                )));
            }
        }
        let mut sorted = times.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        sorted.dedup();
        self.snapshot_times = sorted;
        Ok(self)
    }

    /// Replace the monitor tolerances.
    pub fn with_monitors(mut self, monitors: MonitorTolerances) -> Self {
        self.monitors = monitors;
        self
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn snapshot_times(&self) -> &[f64] {
        &self.snapshot_times
    }

    pub fn monitors(&self) -> &MonitorTolerances {
        &self.monitors
    }

    /// Number of RK4 steps the plan takes.
    pub fn n_steps(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }
}

/// Monitor values captured together with a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorReadings {
    /// |Tr ρ − 1| at capture.
    pub trace_deviation: f64,
    /// Occupancy of the last three levels at capture.
    pub tail_occupancy: f64,
    /// Pre-symmetrization Hermiticity defect of the step that produced the
    /// state (0 for the initial snapshot).
    pub hermiticity_defect: f64,
}

/// The state at one scheduled time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Grid time the snapshot was captured at (an exact multiple of dt).
    pub time: f64,
    /// Time convention the generator was built in.
    pub unit: TimeUnit,
    /// Captured state.
    pub rho: FockDensityMatrix,
    /// Monitor readings at capture.
    pub monitors: MonitorReadings,
}

/// Worst monitor readings over a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub max_trace_deviation: f64,
    pub max_tail_occupancy: f64,
    pub max_hermiticity_defect: f64,
    pub steps_taken: usize,
}

/// Snapshots plus the closing monitor report.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub snapshots: Vec<Snapshot>,
    pub report: MonitorReport,
}

/// Reusable RK4 stepper holding the stage buffers for one operator, so long
/// runs allocate nothing per step.
pub struct Stepper<'a> {
    op: &'a SuperOperator,
    k: Array2<Complex64>,
    stage: Array2<Complex64>,
    sum: Array2<Complex64>,
}

impl<'a> Stepper<'a> {
    pub fn new(op: &'a SuperOperator) -> Self {
        let nc = op.cutoff();
        Self {
            op,
            k: Array2::zeros((nc, nc)),
            stage: Array2::zeros((nc, nc)),
            sum: Array2::zeros((nc, nc)),
        }
    }

    pub fn op(&self) -> &SuperOperator {
        self.op
    }

    /// One classical RK4 step from `rho` into `out` (distinct buffers),
    /// followed by re-symmetrization of `out`. Returns the Hermiticity
    /// defect of the raw update, measured before symmetrization.
    pub fn step(&mut self, rho: &Array2<Complex64>, out: &mut Array2<Complex64>, dt: f64) -> f64 {
        let half = 0.5 * dt;
        self.op.apply_into(rho, &mut self.k);
        self.sum.assign(&self.k);
        azip(&mut self.stage, rho, &self.k, |s, r, k| *s = r + half * k);
        self.op.apply_into(&self.stage, &mut self.k);
        self.sum.scaled_add(Complex64::new(2.0, 0.0), &self.k);
        azip(&mut self.stage, rho, &self.k, |s, r, k| *s = r + half * k);
        self.op.apply_into(&self.stage, &mut self.k);
        self.sum.scaled_add(Complex64::new(2.0, 0.0), &self.k);
        azip(&mut self.stage, rho, &self.k, |s, r, k| *s = r + dt * k);
        self.op.apply_into(&self.stage, &mut self.k);
        self.sum.scaled_add(Complex64::new(1.0, 0.0), &self.k);
        let sixth = dt / 6.0;
        azip(out, rho, &self.sum, |o, r, s| *o = r + sixth * s);
        resymmetrize_measuring(out)
    }
}

/// Element-wise ternary loop: dst[i] = f(src_a[i], src_b[i]).
fn azip<F: Fn(&mut Complex64, &Complex64, &Complex64)>(
    dst: &mut Array2<Complex64>,
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
    f: F,
) {
    ndarray::Zip::from(dst).and(a).and(b).for_each(|d, x, y| f(d, x, y));
}

/// Replace `m` by its Hermitian part and return the largest
/// |m_nm − conj(m_mn)| observed while doing so.
fn resymmetrize_measuring(m: &mut Array2<Complex64>) -> f64 {
    let nc = m.nrows();
    let mut worst = 0.0f64;
    for n in 0..nc {
        let d = m[(n, n)].im.abs();
        if d > worst {
            worst = d;
        }
        m[(n, n)] = Complex64::new(m[(n, n)].re, 0.0);
        for j in (n + 1)..nc {
            let a = m[(n, j)];
            let b = m[(j, n)].conj();
            let d = (a - b).norm();
            if d > worst {
                worst = d;
            }
            let avg = 0.5 * (a + b);
            m[(n, j)] = avg;
            m[(j, n)] = avg.conj();
        }
    }
    worst
}

/// One RK4 step as a standalone call. The input state is left untouched;
/// a non-finite update is reported without replacing it.
pub fn rk4_step(
    op: &SuperOperator,
    rho: &FockDensityMatrix,
    dt: f64,
) -> Result<FockDensityMatrix> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(CatsimError::InvalidParams(format!(
            "dt = {dt} must be finite and positive"
        )));
    }
    if rho.cutoff() != op.cutoff() {
        return Err(CatsimError::CutoffMismatch {
            expected: op.cutoff(),
            got: rho.cutoff(),
        });
    }
    let mut stepper = Stepper::new(op);
    let mut out = Array2::zeros((op.cutoff(), op.cutoff()));
    stepper.step(rho.data(), &mut out, dt);
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CatsimError::NonFinite(format!(
            "RK4 step of size {dt} produced non-finite entries; \
             the input state is unchanged (lower dt)"
        )));
    }
    FockDensityMatrix::from_matrix(out)
}

/// Step size suggestion: the smaller of the coefficient-timescale default
/// (DT_BASE of the fastest scaled-coefficient period) and the spectral
/// stability cap RK4_STABILITY_REACH / Gershgorin bound.
pub fn suggest_dt(op: &SuperOperator) -> f64 {
    let c = op.coeffs();
    let cmax = c
        .drive
        .abs()
        .max(c.kerr.abs())
        .max(c.twophoton)
        .max(c.single * (1.0 + 2.0 * c.n_thermal))
        .max(c.detuning.abs())
        .max(1.0);
    let base = DT_BASE / cmax;
    let gersh = op.gershgorin_bound();
    if gersh > 0.0 {
        base.min(RK4_STABILITY_REACH / gersh)
    } else {
        base
    }
}

/// Propagate `rho0` under `op` following `plan`, capturing snapshots at the
/// nearest step-grid points to the requested times.
///
/// Per step the trace is audited against the cumulative tolerance and a
/// per-step drift budget (tolerance divided by the number of steps, floored
/// at roundoff); the boundary-tail occupancy is audited every step, and the
/// Hermiticity defect every [`HERMITICITY_CHECK_STRIDE`] steps and at every
/// capture. Any breach aborts with the monitor name, time, value, and
/// advice.
pub fn evolve(
    op: &SuperOperator,
    rho0: &FockDensityMatrix,
    plan: &EvolutionPlan,
) -> Result<EvolutionResult> {
    if rho0.cutoff() != op.cutoff() {
        return Err(CatsimError::CutoffMismatch {
            expected: op.cutoff(),
            got: rho0.cutoff(),
        });
    }
    let n_steps = plan.n_steps();
    let dt = plan.dt;
    let tol = plan.monitors;
    // Snapshot step indices (deduplicated, ordered).
    let mut snap_steps: Vec<usize> = plan
        .snapshot_times
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(n_steps))
        .collect();
    snap_steps.dedup();
    let budget = (tol.trace_tol / n_steps.max(1) as f64).max(TRACE_STEP_FLOOR);

    let mut rho = rho0.data().clone();
    let mut next = Array2::zeros(rho.raw_dim());
    let mut stepper = Stepper::new(op);
    let mut report = MonitorReport {
        max_trace_deviation: 0.0,
        max_tail_occupancy: 0.0,
        max_hermiticity_defect: 0.0,
        steps_taken: 0,
    };
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut snap_iter = snap_steps.into_iter().peekable();

    let breach = |monitor: &'static str, time: f64, value: f64, tol: f64, advice: &str| {
        CatsimError::MonitorBreach {
            monitor,
            time,
            value,
            tol,
            advice: format!(" ({advice})"),
        }
    };

    // Initial-state audit and capture.
    let mut prev_trace = rho0.trace().re;
    let dev0 = (prev_trace - 1.0).abs();
    if dev0 > tol.trace_tol {
        return Err(breach(
            "trace",
            0.0,
            dev0,
            tol.trace_tol,
            "normalize the initial state",
        ));
    }
    let tail0 = rho0.tail_occupancy();
    if tail0 > tol.tail_tol {
        return Err(breach(
            "tail",
            0.0,
            tail0,
            tol.tail_tol,
            "raise the Fock cutoff",
        ));
    }
    report.max_trace_deviation = dev0;
    report.max_tail_occupancy = tail0;
    if snap_iter.peek() == Some(&0) {
        snap_iter.next();
        snapshots.push(Snapshot {
            time: 0.0,
            unit: op.unit(),
            rho: rho0.clone(),
            monitors: MonitorReadings {
                trace_deviation: dev0,
                tail_occupancy: tail0,
                hermiticity_defect: 0.0,
            },
        });
    }

    for step in 1..=n_steps {
        let defect = stepper.step(&rho, &mut next, dt);
        std::mem::swap(&mut rho, &mut next);
        report.steps_taken = step;
        let time = step as f64 * dt;

        let trace: f64 = (0..rho.nrows()).map(|n| rho[(n, n)].re).sum();
        if !trace.is_finite() {
            return Err(CatsimError::NonFinite(format!(
                "state trace became non-finite at t = {time:.6e} (step {step}); lower dt"
            )));
        }
        let dev = (trace - 1.0).abs();
        if dev > tol.trace_tol {
            return Err(breach(
                "trace",
                time,
                dev,
                tol.trace_tol,
                "lower dt or raise the Fock cutoff",
            ));
        }
        let drift = (trace - prev_trace).abs();
        if drift > budget {
            return Err(breach("trace-step", time, drift, budget, "lower dt"));
        }
        prev_trace = trace;

        let nc = rho.nrows();
        let tail: f64 = (nc.saturating_sub(3)..nc).map(|n| rho[(n, n)].re).sum();
        if tail > tol.tail_tol {
            return Err(breach(
                "tail",
                time,
                tail,
                tol.tail_tol,
                "raise the Fock cutoff",
            ));
        }

        let at_snapshot = snap_iter.peek() == Some(&step);
        if at_snapshot || step % HERMITICITY_CHECK_STRIDE == 0 {
            if defect > tol.hermiticity_tol {
                return Err(breach(
                    "hermiticity",
                    time,
                    defect,
                    tol.hermiticity_tol,
                    "lower dt",
                ));
            }
        }
        report.max_trace_deviation = report.max_trace_deviation.max(dev);
        report.max_tail_occupancy = report.max_tail_occupancy.max(tail);
        report.max_hermiticity_defect = report.max_hermiticity_defect.max(defect);

        if at_snapshot {
            snap_iter.next();
            let captured = FockDensityMatrix::from_matrix(rho.clone()).map_err(|_| {
                CatsimError::NonFinite(format!(
                    "state became non-finite at t = {time:.6e} (step {step}); lower dt"
                ))
            })?;
            snapshots.push(Snapshot {
                time,
                unit: op.unit(),
                rho: captured,
                monitors: MonitorReadings {
                    trace_deviation: dev,
                    tail_occupancy: tail,
                    hermiticity_defect: defect,
                },
            });
        }
    }
    Ok(EvolutionResult { snapshots, report })
}

/// Outcome of a two-cutoff convergence audit.
#[derive(Debug, Clone)]
pub struct CutoffConvergenceReport {
    pub coarse_cutoff: usize,
    pub fine_cutoff: usize,
    /// Max over snapshots of |δ_coarse − δ_fine| (None if a run breached).
    pub max_delta_diff: Option<f64>,
    /// Max over snapshots of the total-variation distance between the
    /// photon-number distributions (None if a run breached).
    pub max_pn_tv: Option<f64>,
    /// Monitor breach that aborted one of the runs, if any.
    pub breach: Option<String>,
    pub converged: bool,
}

/// Run `plan` from the vacuum at two cutoffs and compare photon statistics
/// and Wigner negativity on a shared grid. Convergence requires both
/// differences below 1e-6; a monitor breach in either run reports
/// non-convergence rather than an error.
pub fn check_cutoff_convergence(
    params: &ScaledParams,
    cutoffs: (usize, usize),
    plan: &EvolutionPlan,
    unit: TimeUnit,
) -> Result<CutoffConvergenceReport> {
    let (coarse, fine) = cutoffs;
    if coarse >= fine {
        return Err(CatsimError::InvalidParams(format!(
            "cutoff pair must be increasing, got ({coarse}, {fine})"
        )));
    }
    let mut runs = Vec::with_capacity(2);
    for nc in [coarse, fine] {
        let op = SuperOperator::build(params, nc, unit)?;
        let vac = FockDensityMatrix::vacuum(nc)?;
        match evolve(&op, &vac, plan) {
            Ok(result) => runs.push(result),
            Err(err @ CatsimError::MonitorBreach { .. }) => {
                return Ok(CutoffConvergenceReport {
                    coarse_cutoff: coarse,
                    fine_cutoff: fine,
                    max_delta_diff: None,
                    max_pn_tv: None,
                    breach: Some(format!("cutoff {nc}: {err}")),
                    converged: false,
                });
            }
            Err(other) => return Err(other),
        }
    }
    let fine_run = runs.pop().expect("fine run");
    let coarse_run = runs.pop().expect("coarse run");
    let hw = (params.alpha0().norm() + 4.0).clamp(4.0, 17.0);
    let grid = GridSpec::centered(hw, 0.1)?;
    let mut max_tv = 0.0f64;
    let mut max_dd = 0.0f64;
    for (a, b) in coarse_run.snapshots.iter().zip(fine_run.snapshots.iter()) {
        let pa = photon_number_distribution(&a.rho);
        let pb = photon_number_distribution(&b.rho);
        let mut tv = 0.0;
        for n in 0..pa.len().max(pb.len()) {
            let x = pa.get(n).copied().unwrap_or(0.0);
            let y = pb.get(n).copied().unwrap_or(0.0);
            tv += (x - y).abs();
        }
        max_tv = max_tv.max(0.5 * tv);
        let da = wigner_negativity(&wigner_clenshaw(&a.rho, &grid)?, NegativityMethod::Trapezoid);
        let db = wigner_negativity(&wigner_clenshaw(&b.rho, &grid)?, NegativityMethod::Trapezoid);
        max_dd = max_dd.max((da.delta - db.delta).abs());
    }
    Ok(CutoffConvergenceReport {
        coarse_cutoff: coarse,
        fine_cutoff: fine,
        max_delta_diff: Some(max_dd),
        max_pn_tv: Some(max_tv),
        breach: None,
        converged: max_dd < CONVERGENCE_TOL && max_tv < CONVERGENCE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ScaledParams;
    use crate::util::ln_factorial;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// No drive, no Kerr, no detuning, no thermal photons: only the two
    /// dissipators remain (single-photon loss at the unit rate, two-photon
    /// dissipation at rate g² = 1). States confined to the {|0⟩, |1⟩}
    /// block never feel the two-photon channel, so closed-form
    /// single-photon-decay checks stay exact.
    fn no_drive() -> ScaledParams {
        ScaledParams::new(0.0, 1.0, 0.0, 0.0, 0.0).unwrap()
    }

    /// A normalized superposition (|0⟩ + |1⟩)/√2 embedded at `cutoff`.
    fn qubit_plus(cutoff: usize) -> FockDensityMatrix {
        let mut data = Array2::zeros((cutoff, cutoff));
        for n in 0..2 {
            for m in 0..2 {
                data[[n, m]] = Complex64::new(0.5, 0.0);
            }
        }
        FockDensityMatrix::from_matrix(data).unwrap()
    }

    fn generic() -> ScaledParams {
        ScaledParams::new(2.0, 1.2, 0.7, 0.4, 0.3).unwrap()
    }

    #[test]
    fn plan_validation_rules() {
        assert!(EvolutionPlan::new(1.0, 0.0).is_err());
        assert!(EvolutionPlan::new(1.0, -0.1).is_err());
        assert!(EvolutionPlan::new(0.5, 0.6).is_err());
        assert!(EvolutionPlan::new(-1.0, 0.1).is_err());
        assert!(EvolutionPlan::new(f64::NAN, 0.1).is_err());
        let p = EvolutionPlan::new(1.0, 0.01).unwrap();
        assert_eq!(p.n_steps(), 100);
        assert_eq!(p.snapshot_times(), &[1.0]);
        assert!(p.clone().with_snapshots(&[0.5, 1.2]).is_err());
        assert!(p.clone().with_snapshots(&[]).is_err());
        let p2 = p.with_snapshots(&[0.7, 0.2, 0.7, 0.0]).unwrap();
        assert_eq!(p2.snapshot_times(), &[0.0, 0.2, 0.7]);
        // Zero-duration plans are valid with any positive dt.
        let z = EvolutionPlan::new(0.0, 0.1).unwrap();
        assert_eq!(z.n_steps(), 0);
    }

    #[test]
    fn rk4_keeps_stationary_state_exact() {
        // The vacuum is in the kernel of the pure-loss generator, so every
        // RK4 stage vanishes identically and the update is exact identity.
        let op = SuperOperator::build(&no_drive(), 8, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(8).unwrap();
        let out = rk4_step(&op, &vac, 0.01).unwrap();
        assert_eq!(out.data(), vac.data());
        let drv = op.apply(&vac).unwrap();
        assert!(drv.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rk4_step_validation() {
        let op = SuperOperator::build(&no_drive(), 8, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(8).unwrap();
        assert!(rk4_step(&op, &vac, 0.0).is_err());
        assert!(rk4_step(&op, &vac, f64::INFINITY).is_err());
        let small = FockDensityMatrix::vacuum(6).unwrap();
        assert!(matches!(
            rk4_step(&op, &small, 0.01),
            Err(CatsimError::CutoffMismatch { .. })
        ));
    }

    #[test]
    fn single_photon_decay_matches_exponential() {
        // Pure loss from |1⟩⟨1|: ρ11(τ) = e^{−2τ}, ρ00 = 1 − e^{−2τ}.
        let op = SuperOperator::build(&no_drive(), 6, TimeUnit::Tau).unwrap();
        let one = FockDensityMatrix::fock_state(6, 1).unwrap();
        let plan = EvolutionPlan::new(1.0, 1e-3).unwrap();
        let result = evolve(&op, &one, &plan).unwrap();
        let rho = &result.snapshots[0].rho;
        let expect = (-2.0f64).exp();
        assert_abs_diff_eq!(rho.data()[[1, 1]].re, expect, epsilon = 1e-9);
        assert_abs_diff_eq!(rho.data()[[0, 0]].re, 1.0 - expect, epsilon = 1e-9);
        assert!(result.report.max_trace_deviation < 1e-12);
        assert_eq!(result.report.steps_taken, 1000);
    }

    #[test]
    fn richardson_ratio_is_fourth_order() {
        // Step sizes sit inside the stability region (corner decay rates
        // are a few hundred per τ at this cutoff). The thermal channel
        // clips a little trace at the boundary, so the trace and tail
        // budgets are loosened; the probe is the convergence order.
        let op = SuperOperator::build(&generic(), 16, TimeUnit::Tau).unwrap();
        let rho0 = FockDensityMatrix::coherent(16, crate::C64::new(0.6, 0.3)).unwrap();
        let monitors = MonitorTolerances {
            trace_tol: 1e-5,
            tail_tol: 1e-6,
            ..MonitorTolerances::default()
        };
        let run = |dt: f64| {
            let plan = EvolutionPlan::new(0.1, dt).unwrap().with_monitors(monitors);
            evolve(&op, &rho0, &plan).unwrap().snapshots.pop().unwrap().rho
        };
        let a = run(0.00125);
        let b = run(0.000625);
        let c = run(0.0003125);
        let frob = |x: &FockDensityMatrix, y: &FockDensityMatrix| {
            x.data()
                .iter()
                .zip(y.data().iter())
                .map(|(p, q)| (p - q).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let ratio = frob(&a, &b) / frob(&b, &c);
        assert!(
            (12.8..=19.2).contains(&ratio),
            "Richardson ratio {ratio} outside the fourth-order window"
        );
    }

    #[test]
    fn thermal_relaxation_reaches_detailed_balance() {
        // N = 0.5 with a negligible two-photon rate (g² = 1e-16): the
        // thermal channel drives the vacuum to mean occupation N.
        let params = ScaledParams::new(0.0, 1e-8, 0.0, 0.0, 0.5).unwrap();
        let op = SuperOperator::build(&params, 24, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(24).unwrap();
        let plan = EvolutionPlan::new(6.0, 1e-3).unwrap();
        let result = evolve(&op, &vac, &plan).unwrap();
        let nbar = result.snapshots[0].rho.mean_photon_number();
        assert_abs_diff_eq!(nbar, 0.5, epsilon = 1e-4);
        // Geometric (thermal) photon statistics at the fixed point.
        let p = photon_number_distribution(&result.snapshots[0].rho);
        assert_relative_eq!(p[1] / p[0], 1.0 / 3.0, max_relative = 1e-3);
        assert_relative_eq!(p[2] / p[1], 1.0 / 3.0, max_relative = 1e-3);
    }

    #[test]
    fn zero_duration_plan_returns_initial_state() {
        let op = SuperOperator::build(&generic(), 16, TimeUnit::Tau).unwrap();
        let rho0 = FockDensityMatrix::coherent(16, crate::C64::new(0.5, -0.2)).unwrap();
        let plan = EvolutionPlan::new(0.0, 0.5).unwrap();
        let result = evolve(&op, &rho0, &plan).unwrap();
        assert_eq!(result.snapshots.len(), 1);
        assert_eq!(result.snapshots[0].time, 0.0);
        assert_eq!(result.snapshots[0].rho.data(), rho0.data());
        assert_eq!(result.report.steps_taken, 0);
    }

    #[test]
    fn snapshots_land_on_nearest_grid_points() {
        let op = SuperOperator::build(&no_drive(), 6, TimeUnit::Tau).unwrap();
        let one = FockDensityMatrix::fock_state(6, 1).unwrap();
        let plan = EvolutionPlan::new(0.1, 0.01)
            .unwrap()
            .with_snapshots(&[0.0, 0.033, 0.1])
            .unwrap();
        let result = evolve(&op, &one, &plan).unwrap();
        let times: Vec<f64> = result.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 3);
        assert_abs_diff_eq!(times[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(times[1], 0.03, epsilon = 1e-12);
        assert_abs_diff_eq!(times[2], 0.1, epsilon = 1e-12);
        // Decay checks at the grid times confirm capture alignment; the
        // margin covers the accumulated RK4 truncation error n·(2dt)⁵/120.
        for s in &result.snapshots {
            assert_abs_diff_eq!(
                s.rho.data()[[1, 1]].re,
                (-2.0 * s.time).exp(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn detuning_rotates_coherences_at_the_stated_rate() {
        // On the {|0⟩, |1⟩} block the only active terms are detuning and
        // single-photon loss, so ρ01(τ) = ρ01(0)·e^{iΔτ}·e^{−τ} exactly.
        let params = ScaledParams::new(0.0, 1.0, 0.0, 5.0, 0.0).unwrap();
        let op = SuperOperator::build(&params, 10, TimeUnit::Tau).unwrap();
        let rho0 = qubit_plus(10);
        let plan = EvolutionPlan::new(0.1, 1e-4).unwrap();
        let result = evolve(&op, &rho0, &plan).unwrap();
        let got = result.snapshots[0].rho.data()[[0, 1]];
        let expect = crate::C64::from_polar(0.5 * (-0.1f64).exp(), 5.0 * 0.1);
        assert_abs_diff_eq!(got.re, expect.re, epsilon = 1e-12);
        assert_abs_diff_eq!(got.im, expect.im, epsilon = 1e-12);
        // The populations keep decaying at the single-photon rate.
        assert_abs_diff_eq!(
            result.snapshots[0].rho.data()[[1, 1]].re,
            0.5 * (-0.2f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn tail_breach_reports_advice() {
        // α₀ = 10 drive at cutoff 40: occupancy rushes past the boundary.
        let params = ScaledParams::from_g_alpha0(2.5, 10.0, 0.0, 0.0, 0.0).unwrap();
        let op = SuperOperator::build(&params, 40, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(40).unwrap();
        let plan = EvolutionPlan::new(0.01, 1e-5).unwrap();
        let err = evolve(&op, &vac, &plan).unwrap_err();
        match err {
            CatsimError::MonitorBreach { monitor, advice, .. } => {
                assert_eq!(monitor, "tail");
                assert!(advice.contains("cutoff"));
            }
            other => panic!("expected tail breach, got {other}"),
        }
    }

    #[test]
    fn fig_style_short_drive_gives_poisson_like_statistics() {
        // Strong drive from vacuum to τ = 0.015 (T ≈ 0.094): the photon
        // distribution is Poisson-like with mean near |α₀|² = 100.
        let params = ScaledParams::from_g_alpha0(2.5, 10.0, 0.0, 0.0, 0.0).unwrap();
        let op = SuperOperator::build(&params, 150, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(150).unwrap();
        let plan = EvolutionPlan::new(0.015, 8e-6).unwrap().with_monitors(
            MonitorTolerances {
                tail_tol: 1e-4,
                ..MonitorTolerances::default()
            },
        );
        let result = evolve(&op, &vac, &plan).unwrap();
        let rho = &result.snapshots[0].rho;
        let nbar = rho.mean_photon_number();
        assert!((99.0..=100.3).contains(&nbar), "nbar = {nbar}");
        let p = photon_number_distribution(rho);
        let argmax = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(
            (99..=101).contains(&argmax),
            "distribution peaks at {argmax}"
        );
        let tv: f64 = 0.5
            * p.iter()
                .enumerate()
                .map(|(n, &pn)| {
                    let lnp = n as f64 * nbar.ln() - nbar - ln_factorial(n);
                    (pn - lnp.exp()).abs()
                })
                .sum::<f64>();
        assert!(tv < 0.03, "TV to matched Poisson = {tv}");
    }

    #[test]
    fn mean_photon_number_settles_near_lobe_occupancy() {
        // g = 2.5, α₀ = 2.5 long run: the state relaxes to the two-photon
        // steady state; its mean occupation is slightly below |α₀|².
        let params = ScaledParams::from_g_alpha0(2.5, 2.5, 0.0, 0.0, 0.0).unwrap();
        let op = SuperOperator::build(&params, 45, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(45).unwrap();
        let plan = EvolutionPlan::new(2.0, 2e-4).unwrap();
        let result = evolve(&op, &vac, &plan).unwrap();
        let nbar = result.snapshots[0].rho.mean_photon_number();
        assert_abs_diff_eq!(nbar, 6.0828, epsilon = 5e-3);
        assert!(result.report.max_trace_deviation < 1e-9);
    }

    #[test]
    fn suggest_dt_respects_base_and_stability() {
        let strong = ScaledParams::from_g_alpha0(2.5, 10.0, 0.0, 0.0, 0.0).unwrap();
        let op = SuperOperator::build(&strong, 150, TimeUnit::Tau).unwrap();
        let dt = suggest_dt(&op);
        assert!(dt > 0.0);
        assert!(dt * op.gershgorin_bound() <= RK4_STABILITY_REACH + 1e-12);
        assert!(dt <= DT_BASE / 625.0 + 1e-18);
        // A mild operator is limited by the base fraction instead.
        let mild = SuperOperator::build(&no_drive(), 8, TimeUnit::Tau).unwrap();
        assert!(suggest_dt(&mild) <= DT_BASE);
    }

    #[test]
    fn cutoff_convergence_examples() {
        // Vacuum with no drive: trivially converged.
        let plan = EvolutionPlan::new(0.1, 1e-3).unwrap();
        let trivial =
            check_cutoff_convergence(&no_drive(), (8, 12), &plan, TimeUnit::Tau).unwrap();
        assert!(trivial.converged, "{trivial:?}");

        // α₀ = 2.5 at cutoffs 40 vs 60: converged well below 1e-6.
        let params = ScaledParams::from_g_alpha0(2.5, 2.5, 0.0, 0.0, 0.0).unwrap();
        let plan = EvolutionPlan::new(0.2, 1e-4)
            .unwrap()
            .with_snapshots(&[0.05, 0.2])
            .unwrap();
        let report =
            check_cutoff_convergence(&params, (40, 60), &plan, TimeUnit::Tau).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.max_pn_tv.unwrap() < 1e-8);
        assert!(report.max_delta_diff.unwrap() < 1e-6);

        // α₀ = 10 at cutoff 40: the tail monitor trips and the audit
        // reports non-convergence with the breach recorded.
        let big = ScaledParams::from_g_alpha0(2.5, 10.0, 0.0, 0.0, 0.0).unwrap();
        let plan = EvolutionPlan::new(0.01, 1e-5).unwrap();
        let report = check_cutoff_convergence(&big, (40, 60), &plan, TimeUnit::Tau).unwrap();
        assert!(!report.converged);
        let breach = report.breach.unwrap();
        assert!(breach.contains("tail"), "{breach}");

        assert!(check_cutoff_convergence(&no_drive(), (12, 12), &plan, TimeUnit::Tau).is_err());
    }

    #[test]
    fn evolve_rejects_cutoff_mismatch_and_bad_initial_state() {
        let op = SuperOperator::build(&no_drive(), 8, TimeUnit::Tau).unwrap();
        let wrong = FockDensityMatrix::vacuum(10).unwrap();
        let plan = EvolutionPlan::new(0.1, 0.01).unwrap();
        assert!(matches!(
            evolve(&op, &wrong, &plan),
            Err(CatsimError::CutoffMismatch { .. })
        ));
        // Unnormalized initial state breaches the trace monitor at t = 0.
        let mut bad = FockDensityMatrix::vacuum(8).unwrap();
        bad.data_mut()[[0, 0]] = crate::C64::new(1.5, 0.0);
        let err = evolve(&op, &bad, &plan).unwrap_err();
        match err {
            CatsimError::MonitorBreach { monitor, time, .. } => {
                assert_eq!(monitor, "trace");
                assert_eq!(time, 0.0);
            }
            other => panic!("expected trace breach, got {other}"),
        }
    }
}
