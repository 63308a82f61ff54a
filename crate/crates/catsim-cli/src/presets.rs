//! Experiment presets: pinned parameter sets with reference target values
//! and tolerances, plus the comparison-table evaluation used by the
//! `reproduce` subcommand.

use std::f64::consts::PI;
use std::path::Path;

use catsim::params::{PhysicalParams, ScaledParams, TimeUnit};
use clap::ValueEnum;
use serde::Serialize;

use crate::config::{RunSpec, SnapshotSpec};
use crate::runner::{execute, ExecuteOptions, LifetimeOutcome, RunOutcome};
use crate::Result;

/// Identifier of a benchmark preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetId {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
    Fig6PhotonStats,
    Fig12Experiment,
    Sec7LargeCat,
}

impl PresetId {
    pub fn name(&self) -> &'static str {
        match self {
            PresetId::Table1 => "table1",
            PresetId::Table2 => "table2",
            PresetId::Table3 => "table3",
            PresetId::Table4 => "table4",
            PresetId::Table5 => "table5",
            PresetId::Fig6PhotonStats => "fig6-photon-stats",
            PresetId::Fig12Experiment => "fig12-experiment",
            PresetId::Sec7LargeCat => "sec7-large-cat",
        }
    }

    /// Presets whose heaviest cells run for hours; excluded from the
    /// default suites.
    pub fn is_slow(&self) -> bool {
        matches!(self, PresetId::Sec7LargeCat)
    }

    pub fn all() -> &'static [PresetId] {
        &[
            PresetId::Table1,
            PresetId::Table2,
            PresetId::Table3,
            PresetId::Table4,
            PresetId::Table5,
            PresetId::Fig6PhotonStats,
            PresetId::Fig12Experiment,
            PresetId::Sec7LargeCat,
        ]
    }
}

/// Quantity extracted from a completed run for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Quantity {
    FormationTime,
    /// Formation time converted to microseconds with a fixed rate scale.
    FormationMicroseconds { seconds_per_unit: f64 },
    Lifetime,
    PeakDelta,
    PeakTime,
    PhotonMean,
    PhotonArgmax,
    PhotonPoissonTv,
    EverCat,
    EverSeparated,
}

impl Quantity {
    pub fn label(&self) -> String {
        match self {
            Quantity::FormationTime => "formation time".into(),
            Quantity::FormationMicroseconds { .. } => "formation time [us]".into(),
            Quantity::Lifetime => "lifetime".into(),
            Quantity::PeakDelta => "peak negativity".into(),
            Quantity::PeakTime => "peak time".into(),
            Quantity::PhotonMean => "mean photon number".into(),
            Quantity::PhotonArgmax => "P(n) mode".into(),
            Quantity::PhotonPoissonTv => "TV distance to Poisson".into(),
            Quantity::EverCat => "cat verdict reached".into(),
            Quantity::EverSeparated => "peaks ever separated".into(),
        }
    }

    /// Extract the quantity (None when undefined for this run).
    pub fn extract(&self, o: &RunOutcome) -> Option<f64> {
        let m = &o.manifest.measurements;
        match self {
            Quantity::FormationTime => m.formation_time,
            Quantity::FormationMicroseconds { seconds_per_unit } => {
                m.formation_time.map(|t| t * seconds_per_unit * 1e6)
            }
            Quantity::Lifetime => m.lifetime.numeric(),
            Quantity::PeakDelta => m.peak_delta,
            Quantity::PeakTime => m.peak_time,
            Quantity::PhotonMean => m.photon_stats.as_ref().map(|s| s.mean),
            Quantity::PhotonArgmax => m.photon_stats.as_ref().map(|s| s.argmax as f64),
            Quantity::PhotonPoissonTv => m.photon_stats.as_ref().map(|s| s.poisson_tv),
            Quantity::EverCat => Some(if m.ever_cat { 1.0 } else { 0.0 }),
            Quantity::EverSeparated => Some(if m.ever_separated { 1.0 } else { 0.0 }),
        }
    }
}

/// Pass/fail rule for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tolerance {
    /// |computed − target| ≤ tol.
    PlusMinus(f64),
    /// |computed − target| ≤ frac·|target|.
    RelativeFrac(f64),
    /// lo ≤ computed ≤ hi.
    Range { lo: f64, hi: f64 },
    /// computed ≤ bound (target field is the bound).
    AtMost,
    /// computed == target exactly (booleans, exact zeros, integer modes).
    Equals,
}

/// One comparison between a run quantity and a reference target.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub quantity: Quantity,
    pub target: f64,
    pub tolerance: Tolerance,
}

impl Check {
    fn target_text(&self) -> String {
        match self.tolerance {
            Tolerance::PlusMinus(tol) => format!("{} +/- {}", self.target, tol),
            Tolerance::RelativeFrac(frac) => {
                format!("{} +/- {:.0}%", self.target, frac * 100.0)
            }
            Tolerance::Range { lo, hi } => format!("[{lo}, {hi}]"),
            Tolerance::AtMost => format!("<= {}", self.target),
            Tolerance::Equals => format!("{} (exact)", self.target),
        }
    }

    fn passes(&self, computed: f64) -> bool {
        match self.tolerance {
            Tolerance::PlusMinus(tol) => (computed - self.target).abs() <= tol,
            Tolerance::RelativeFrac(frac) => {
                (computed - self.target).abs() <= frac * self.target.abs()
            }
            Tolerance::Range { lo, hi } => lo <= computed && computed <= hi,
            Tolerance::AtMost => computed <= self.target,
            Tolerance::Equals => computed == self.target,
        }
    }
}

/// One executable benchmark cell.
#[derive(Debug, Clone)]
pub struct PresetCell {
    pub id: String,
    pub spec: RunSpec,
    pub checks: Vec<Check>,
}

/// Row of the reproduce comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub cell: String,
    pub quantity: String,
    pub target: String,
    pub computed: Option<f64>,
    pub computed_text: String,
    pub pass: bool,
}

/// Rates of the reference superconducting-cavity experiment (Leghtas et
/// al., Science 347, 853 (2015)) used for second-unit conversions.
pub fn experiment_rates() -> PhysicalParams {
    let two_pi = 2.0 * PI;
    PhysicalParams {
        g_bar: two_pi * 225.0e3,
        epsilon: two_pi * 703.0e3,
        gamma1: two_pi * 3.98e3,
        gamma2: two_pi * 3.18e6,
        chi_bar: 0.0,
        delta_bar: 0.0,
        n_thermal: 0.0,
    }
}

/// Pinned Fock cutoffs by target amplitude.
fn cutoff_for(alpha0_abs: f64) -> usize {
    if alpha0_abs <= 2.6 {
        40
    } else if alpha0_abs <= 5.0 {
        60
    } else if alpha0_abs <= 10.0 {
        150
    } else {
        520
    }
}

/// Boundary-occupancy tolerance matched to the pinned cutoffs: at
/// alpha0 = 10 and cutoff 150 the settled coherent tail is already about
/// 2e-6, and pump-up transients overshoot the settled value by a small
/// factor, so the monitor must accept that known mass while still
/// catching a genuinely undersized basis.
fn tail_tol_for(alpha0_abs: f64) -> f64 {
    if alpha0_abs <= 2.6 {
        1e-8
    } else if alpha0_abs <= 5.0 {
        1e-6
    } else if alpha0_abs <= 10.0 {
        5e-5
    } else {
        1e-6
    }
}

fn lossless_spec(
    id: &str,
    alpha0: f64,
    chi: f64,
    unit: TimeUnit,
    t_end: f64,
    cutoff: usize,
) -> Result<RunSpec> {
    let p = ScaledParams::lossless_from_alpha0(alpha0, chi, 0.0, 0.0)?;
    let mut spec = RunSpec::new(id, &p, unit, t_end);
    spec.cutoff = Some(cutoff);
    spec.monitors.tail_tol = tail_tol_for(alpha0);
    spec.signatures.certify = true;
    Ok(spec)
}

fn driven_spec(
    id: &str,
    g: f64,
    alpha0: f64,
    chi: f64,
    n_thermal: f64,
    unit: TimeUnit,
    t_end: f64,
    cutoff: usize,
) -> Result<RunSpec> {
    let p = ScaledParams::from_g_alpha0(g, alpha0, chi, 0.0, n_thermal)?;
    let mut spec = RunSpec::new(id, &p, unit, t_end);
    spec.cutoff = Some(cutoff);
    spec.monitors.tail_tol = tail_tol_for(alpha0);
    spec.signatures.certify = true;
    Ok(spec)
}

fn formation_check(target: f64, tol: f64) -> Check {
    Check {
        quantity: Quantity::FormationTime,
        target,
        tolerance: Tolerance::PlusMinus(tol),
    }
}

fn formation_us_check(seconds_per_unit: f64, target: f64, tol: f64) -> Check {
    Check {
        quantity: Quantity::FormationMicroseconds { seconds_per_unit },
        target,
        tolerance: Tolerance::PlusMinus(tol),
    }
}

fn lifetime_check(target: f64) -> Check {
    Check {
        quantity: Quantity::Lifetime,
        target,
        tolerance: Tolerance::RelativeFrac(0.05),
    }
}

fn zero_lifetime_check() -> Check {
    Check {
        quantity: Quantity::Lifetime,
        target: 0.0,
        tolerance: Tolerance::Equals,
    }
}

/// Build the executable cells of a preset.
pub fn cells(id: PresetId) -> Result<Vec<PresetCell>> {
    let rates = experiment_rates();
    let g2 = rates.big_g_squared();
    let big_lambda = rates.big_lambda();
    match id {
        // Lossless cat formation at chi = 0: T_cat plus microsecond
        // conversions at fixed two-photon rate G (t = T/G^2) and at fixed
        // pump product Lambda (t = T alpha0^2 / Lambda).
        PresetId::Table1 => {
            let rows: [(f64, f64, f64, f64, (f64, f64), (f64, f64)); 3] = [
                (2.5, 2.0, 1.75, 0.05, (35.0, 1.0), (35.0, 1.0)),
                (5.0, 0.6, 0.45, 0.035, (9.0, 0.7), (36.0, 2.8)),
                (10.0, 0.2, 0.14, 0.01, (2.80, 0.20), (44.8, 3.2)),
            ];
            let mut cells = Vec::new();
            for (alpha, t_end, t_cat, tol, (us_g, us_g_tol), (us_l, us_l_tol)) in rows {
                let id_s = format!("table1-alpha{alpha}");
                let spec = lossless_spec(&id_s, alpha, 0.0, TimeUnit::BigT, t_end, cutoff_for(alpha))?;
                cells.push(PresetCell {
                    id: id_s,
                    spec,
                    checks: vec![
                        formation_check(t_cat, tol),
                        formation_us_check(1.0 / g2, us_g, us_g_tol),
                        formation_us_check(alpha * alpha / big_lambda, us_l, us_l_tol),
                    ],
                });
            }
            Ok(cells)
        }

        // Lifetimes with single-photon damping at chi = 0, in tau units.
        PresetId::Table2 => {
            let rows: [(f64, f64, f64, f64); 9] = [
                (2.5, 2.5, 0.1313, 0.70),
                (2.5, 5.0, 0.0375, 0.20),
                (2.5, 10.0, 0.0100, 0.06),
                (5.0, 2.5, 0.0900, 0.30),
                (5.0, 5.0, 0.0238, 0.08),
                (5.0, 10.0, 0.0065, 0.025),
                (10.0, 2.5, 0.0788, 0.20),
                (10.0, 5.0, 0.0200, 0.05),
                (10.0, 10.0, 0.0050, 0.015),
            ];
            let mut cells = Vec::new();
            for (g, alpha, tau_life, t_end) in rows {
                let id_s = format!("table2-g{g}-alpha{alpha}");
                let spec = driven_spec(
                    &id_s,
                    g,
                    alpha,
                    0.0,
                    0.0,
                    TimeUnit::Tau,
                    t_end,
                    cutoff_for(alpha),
                )?;
                cells.push(PresetCell {
                    id: id_s,
                    spec,
                    checks: vec![lifetime_check(tau_life)],
                });
            }
            Ok(cells)
        }

        // Lossless Kerr formation times in Kerr-corrected units, plus
        // microsecond conversions at fixed G: t = scriptT/(G^2 sqrt(1+chi^2)).
        PresetId::Table3 => {
            let rows: [(f64, f64, f64, f64, f64, f64, f64); 8] = [
                (5.0, 0.0, 0.95, 0.40, 0.02, 8.00, 0.40),
                (5.0, 1.0, 0.95, 0.44, 0.02, 6.22, 0.28),
                (5.0, 2.0, 0.95, 0.52, 0.02, 4.65, 0.18),
                (5.0, 5.0, 0.95, 0.74, 0.02, 2.90, 0.08),
                (10.0, 0.0, 0.25, 0.125, 0.005, 2.50, 0.10),
                (10.0, 1.0, 0.25, 0.130, 0.005, 1.84, 0.07),
                (10.0, 2.0, 0.25, 0.135, 0.005, 1.21, 0.04),
                (10.0, 5.0, 0.25, 0.20, 0.005, 0.78, 0.02),
            ];
            let mut cells = Vec::new();
            for (alpha, chi, t_end, t_cat, tol, us, us_tol) in rows {
                let id_s = format!("table3-alpha{alpha}-chi{chi}");
                let spec = lossless_spec(
                    &id_s,
                    alpha,
                    chi,
                    TimeUnit::ScriptT,
                    t_end,
                    cutoff_for(alpha),
                )?;
                let spu = 1.0 / (g2 * (1.0 + chi * chi).sqrt());
                cells.push(PresetCell {
                    id: id_s,
                    spec,
                    checks: vec![
                        formation_check(t_cat, tol),
                        formation_us_check(spu, us, us_tol),
                    ],
                });
            }
            Ok(cells)
        }

        // Threshold-regime lifetimes at alpha0 = 2 with Kerr, in
        // Kerr-corrected units; g at or near threshold gives exact zeros.
        PresetId::Table4 => {
            let mut cells = Vec::new();
            for chi in [0.5, 1.0] {
                for g in [1.0, 1.5, 2.5] {
                    let id_s = format!("table4-chi{chi}-g{g}");
                    let spec = driven_spec(
                        &id_s,
                        g,
                        2.0,
                        chi,
                        0.0,
                        TimeUnit::ScriptT,
                        4.0,
                        32,
                    )?;
                    let check = match (g, chi) {
                        (2.5, 0.5) => lifetime_check(1.225),
                        (2.5, 1.0) => lifetime_check(1.375),
                        _ => zero_lifetime_check(),
                    };
                    cells.push(PresetCell {
                        id: id_s,
                        spec,
                        checks: vec![check],
                    });
                }
            }
            Ok(cells)
        }

        // Strong-Kerr lifetimes at alpha0 = 5 and 10 in Kerr-corrected
        // units; subthreshold cells give exact zeros.
        PresetId::Table5 => {
            let mut cells = Vec::new();
            let specs: [(f64, f64, f64, f64, usize); 4] = [
                (5.0, 5.0, 2.4, 0.68, 60),
                (5.0, 10.0, 3.5, 1.25, 60),
                (10.0, 5.0, 0.7, 0.177, 150),
                (10.0, 10.0, 1.0, 0.324, 150),
            ];
            for (alpha, chi, t_end, life, cutoff) in specs {
                for g in [1.0, 1.5, 2.5] {
                    let part = if alpha == 5.0 { "a" } else { "b" };
                    let id_s = format!("table5{part}-chi{chi}-g{g}");
                    let spec = driven_spec(
                        &id_s,
                        g,
                        alpha,
                        chi,
                        0.0,
                        TimeUnit::ScriptT,
                        t_end,
                        cutoff,
                    )?;
                    let check = if g == 2.5 {
                        lifetime_check(life)
                    } else {
                        zero_lifetime_check()
                    };
                    cells.push(PresetCell {
                        id: id_s,
                        spec,
                        checks: vec![check],
                    });
                }
            }
            Ok(cells)
        }

        // Transient photon statistics far above threshold: at tau = 0.015
        // the distribution is close to a Poissonian of mean 100.
        PresetId::Fig6PhotonStats => {
            let p = ScaledParams::from_g_alpha0(2.5, 10.0, 0.0, 0.0, 0.0)?;
            let mut spec = RunSpec::new("fig6-photon-stats", &p, TimeUnit::Tau, 0.015);
            spec.cutoff = Some(150);
            spec.monitors.tail_tol = tail_tol_for(10.0);
            spec.snapshots = SnapshotSpec::Count {
                n: 24,
                log_early: true,
            };
            spec.signatures.wigner = false;
            spec.signatures.verdicts = false;
            spec.signatures.quadratures = false;
            spec.signatures.window_audit = false;
            Ok(vec![PresetCell {
                id: "fig6".into(),
                spec,
                checks: vec![
                    Check {
                        quantity: Quantity::PhotonMean,
                        target: 100.0,
                        tolerance: Tolerance::PlusMinus(1.0),
                    },
                    Check {
                        quantity: Quantity::PhotonArgmax,
                        target: 100.0,
                        tolerance: Tolerance::PlusMinus(2.0),
                    },
                    Check {
                        quantity: Quantity::PhotonPoissonTv,
                        target: 0.05,
                        tolerance: Tolerance::AtMost,
                    },
                ],
            }])
        }

        // Simulation of the reference experiment: weak transient
        // negativity near scriptT = 0.5 and no full cat at any time.
        PresetId::Fig12Experiment => {
            let g = 1.41_f64;
            let chi = 1.01 / (g * g);
            let p = ScaledParams::from_g_alpha0(g, 2.0, chi, 0.0, 0.0)?;
            let mut spec = RunSpec::new("fig12-experiment", &p, TimeUnit::ScriptT, 1.2);
            spec.cutoff = Some(32);
            spec.signatures.certify = true;
            Ok(vec![PresetCell {
                id: "fig12".into(),
                spec,
                checks: vec![
                    Check {
                        quantity: Quantity::PeakDelta,
                        target: 0.025,
                        tolerance: Tolerance::Range { lo: 0.02, hi: 0.03 },
                    },
                    Check {
                        quantity: Quantity::PeakTime,
                        target: 0.5,
                        tolerance: Tolerance::Range { lo: 0.4, hi: 0.6 },
                    },
                    Check {
                        quantity: Quantity::EverSeparated,
                        target: 0.0,
                        tolerance: Tolerance::Equals,
                    },
                    Check {
                        quantity: Quantity::EverCat,
                        target: 0.0,
                        tolerance: Tolerance::Equals,
                    },
                ],
            }])
        }

        // Large transient cat with thermal noise: quadrature fringes only
        // (Wigner maps are outside the stable envelope at this size).
        PresetId::Sec7LargeCat => {
            let mut cells = Vec::new();
            for (n_thermal, cutoff) in [(0.0, 520), (0.5, 560)] {
                let p = ScaledParams::from_g_alpha0(2.0, 20.0, 0.0, 0.0, n_thermal)?;
                let id_s = format!("sec7-n{n_thermal}");
                let mut spec = RunSpec::new(id_s.clone(), &p, TimeUnit::Tau, 0.015);
                spec.cutoff = Some(cutoff);
                spec.monitors.tail_tol = tail_tol_for(20.0);
                spec.dt = Some(5e-7);
                spec.snapshots = SnapshotSpec::Count {
                    n: 16,
                    log_early: true,
                };
                spec.signatures.wigner = false;
                spec.signatures.verdicts = false;
                spec.signatures.husimi = true;
                spec.signatures.husimi_step = Some(0.25);
                spec.signatures.quadrature_step = Some(0.01);
                spec.signatures.window_audit = false;
                cells.push(PresetCell {
                    id: id_s,
                    spec,
                    checks: Vec::new(),
                });
            }
            Ok(cells)
        }
    }
}

/// Completed preset: comparison rows plus the raw outcomes keyed by cell id.
pub struct PresetReport {
    pub preset: &'static str,
    pub rows: Vec<ComparisonRow>,
    pub outcomes: Vec<(String, RunOutcome)>,
}

impl PresetReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Plain-text comparison table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<26} {:<24} {:<22} {:<16} {}\n",
            "cell", "quantity", "target", "computed", "verdict"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<26} {:<24} {:<22} {:<16} {}\n",
                r.cell,
                r.quantity,
                r.target,
                r.computed_text,
                if r.pass { "pass" } else { "FAIL" }
            ));
        }
        out
    }

    /// CSV form of the comparison table.
    pub fn csv(&self) -> String {
        let mut out = String::from("cell,quantity,target,computed,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},\"{}\",{},{}\n",
                r.cell, r.quantity, r.target, r.computed_text, r.pass
            ));
        }
        out
    }
}

fn lifetime_text(o: &RunOutcome) -> Option<String> {
    match o.manifest.measurements.lifetime {
        LifetimeOutcome::Censored {
            last_time,
            last_delta,
        } => Some(format!(
            "censored (delta {last_delta:.4} at horizon {last_time})"
        )),
        LifetimeOutcome::NotComputed => Some("not computed".into()),
        _ => None,
    }
}

fn evaluate_cell(cell_id: &str, checks: &[Check], outcome: &RunOutcome) -> Vec<ComparisonRow> {
    checks
        .iter()
        .map(|check| {
            let computed = check.quantity.extract(outcome);
            let computed_text = match computed {
                Some(v) => format!("{v:.6}"),
                None => match check.quantity {
                    Quantity::Lifetime => {
                        lifetime_text(outcome).unwrap_or_else(|| "undefined".into())
                    }
                    _ => "undefined".into(),
                },
            };
            ComparisonRow {
                cell: cell_id.to_string(),
                quantity: check.quantity.label(),
                target: check.target_text(),
                computed,
                computed_text,
                pass: computed.map(|v| check.passes(v)).unwrap_or(false),
            }
        })
        .collect()
}

/// Cross-cell comparison rows for the thermal large-cat preset: fringes
/// must be present without thermal noise and visibly degraded at N = 0.5.
fn sec7_rows(outcomes: &[(String, RunOutcome)]) -> Vec<ComparisonRow> {
    let find = |needle: &str| outcomes.iter().find(|(id, _)| id == needle).map(|(_, o)| o);
    let (Some(cold), Some(warm)) = (find("sec7-n0"), find("sec7-n0.5")) else {
        return vec![ComparisonRow {
            cell: "sec7".into(),
            quantity: "visibility comparison".into(),
            target: "both cells complete".into(),
            computed: None,
            computed_text: "missing cell".into(),
            pass: false,
        }];
    };
    // Best fringe visibility of the zero-temperature run.
    let best = cold
        .rows
        .iter()
        .filter_map(|r| r.visibility.map(|v| (r.time, v)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite visibility"));
    let Some((t_best, vis_cold)) = best else {
        return vec![ComparisonRow {
            cell: "sec7-n0".into(),
            quantity: "fringe visibility".into(),
            target: ">= 0.2".into(),
            computed: None,
            computed_text: "no quadratures".into(),
            pass: false,
        }];
    };
    // Thermal visibility at the matching time (nearest snapshot).
    let vis_warm = warm
        .rows
        .iter()
        .filter(|r| r.visibility.is_some())
        .min_by(|a, b| {
            (a.time - t_best)
                .abs()
                .partial_cmp(&(b.time - t_best).abs())
                .expect("finite times")
        })
        .and_then(|r| r.visibility)
        .unwrap_or(0.0);
    let drop = if vis_cold > 0.0 {
        (vis_cold - vis_warm) / vis_cold
    } else {
        0.0
    };
    vec![
        ComparisonRow {
            cell: "sec7-n0".into(),
            quantity: "peak fringe visibility".into(),
            target: ">= 0.2".into(),
            computed: Some(vis_cold),
            computed_text: format!("{vis_cold:.4} at t = {t_best:.5}"),
            pass: vis_cold >= 0.2,
        },
        ComparisonRow {
            cell: "sec7-n0.5".into(),
            quantity: "visibility drop vs N = 0".into(),
            target: "> 0.30".into(),
            computed: Some(drop),
            computed_text: format!("{drop:.4} (N=0.5 visibility {vis_warm:.4})"),
            pass: drop > 0.30,
        },
    ]
}

/// Evaluate a preset's comparison rows from completed outcomes.
pub fn evaluate(id: PresetId, preset_cells: &[PresetCell], outcomes: &[(String, RunOutcome)]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for cell in preset_cells {
        if let Some((_, outcome)) = outcomes.iter().find(|(cid, _)| *cid == cell.id) {
            rows.extend(evaluate_cell(&cell.id, &cell.checks, outcome));
        }
    }
    if id == PresetId::Sec7LargeCat {
        rows.extend(sec7_rows(outcomes));
    }
    rows
}

/// Run every cell of a preset and build its comparison report. Cell
/// artifacts land under `base_out/<cell-id>` when a base directory is
/// given.
pub fn run_preset(
    id: PresetId,
    opts: &ExecuteOptions,
    base_out: Option<&Path>,
) -> Result<PresetReport> {
    let preset_cells = cells(id)?;
    let mut outcomes = Vec::with_capacity(preset_cells.len());
    for cell in &preset_cells {
        let cell_opts = ExecuteOptions {
            deterministic: opts.deterministic,
            out_dir: base_out.map(|b| b.join(&cell.id)),
        };
        let outcome = execute(&cell.spec, &cell_opts)?;
        outcomes.push((cell.id.clone(), outcome));
    }
    let rows = evaluate(id, &preset_cells, &outcomes);
    Ok(PresetReport {
        preset: id.name(),
        rows,
        outcomes,
    })
}
