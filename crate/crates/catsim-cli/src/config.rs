//! Run configuration: TOML schema, unit-tagged frequencies, and resolution
//! into an executable [`RunSpec`].

use std::f64::consts::PI;
use std::path::PathBuf;

use catsim::params::{PhysicalParams, ScaledParams, TimeUnit};
use catsim::propagator::MonitorTolerances;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// A frequency entry in a config file. A bare number is an angular rate in
/// rad/s; a `{ value, unit }` table carries an explicit convention, where
/// the `/2pi` units denote linear frequencies that are multiplied by 2π.
/// Bare "Hz"-style tags are rejected as ambiguous.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Frequency {
    Angular(f64),
    Tagged { value: f64, unit: String },
}

impl Frequency {
    /// Angular value in rad/s; `field` labels error messages.
    pub fn angular(&self, field: &str) -> Result<f64> {
        match self {
            Frequency::Angular(v) => Ok(*v),
            Frequency::Tagged { value, unit } => {
                let scale = match unit.as_str() {
                    "rad/s" => return Ok(*value),
                    "Hz/2pi" => 1.0,
                    "kHz/2pi" => 1e3,
                    "MHz/2pi" => 1e6,
                    "GHz/2pi" => 1e9,
                    "Hz" | "kHz" | "MHz" | "GHz" => {
                        return Err(CliError::Validation(format!(
                            "{field}: unit '{unit}' is ambiguous; write '{unit}/2pi' \
                             for a linear frequency or 'rad/s' for an angular rate"
                        )))
                    }
                    other => {
                        return Err(CliError::Validation(format!(
                            "{field}: unknown frequency unit '{other}' (expected one of \
                             rad/s, Hz/2pi, kHz/2pi, MHz/2pi, GHz/2pi)"
                        )))
                    }
                };
                Ok(value * 2.0 * PI * scale)
            }
        }
    }
}

/// Top-level TOML config for `catsim run`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub label: Option<String>,
    pub params: ParamsSection,
    pub plan: PlanSection,
    #[serde(default)]
    pub monitors: MonitorSpec,
    #[serde(default)]
    pub signatures: SignatureOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Exactly one of the three parameter styles must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub physical: Option<PhysicalSection>,
    pub scaled: Option<ScaledSection>,
    pub lossless: Option<LosslessSection>,
}

/// Laboratory rates, all unit-tagged frequencies.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub g_bar: Frequency,
    pub epsilon: Frequency,
    pub gamma1: Frequency,
    pub gamma2: Frequency,
    pub chi_bar: Option<Frequency>,
    pub delta_bar: Option<Frequency>,
    #[serde(default)]
    pub n_thermal: f64,
    /// Drop single-photon loss (γ₁ → 0 limit) while keeping the pump scale.
    #[serde(default)]
    pub lossless: bool,
}

/// Dimensionless parameters in the single-photon (τ) convention. Give
/// either `lambda` (+ optional `chi_prime`) or `alpha0` (+ optional `chi`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledSection {
    pub g: f64,
    pub lambda: Option<f64>,
    pub chi_prime: Option<f64>,
    pub alpha0: Option<f64>,
    pub chi: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub n_thermal: f64,
}

/// Lossless-signal parameters in the two-photon (T) convention. Give
/// either `pump_t` or `alpha0`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LosslessSection {
    pub pump_t: Option<f64>,
    pub alpha0: Option<f64>,
    #[serde(default)]
    pub chi: f64,
    #[serde(default)]
    pub delta_t: f64,
    #[serde(default)]
    pub n_thermal: f64,
}

/// Propagation plan: time unit, horizon, and snapshot schedule.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub unit: TimeUnit,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub cutoff: Option<usize>,
    /// Number of evenly spaced snapshots (default 200) when no explicit
    /// `snapshot_times` list is given.
    pub snapshots: Option<usize>,
    /// Add a geometric burst of early snapshots (default true); cat
    /// formation is fast at large amplitudes.
    pub log_early: Option<bool>,
    pub snapshot_times: Option<Vec<f64>>,
}

/// Monitor tolerances as stored in configs and manifests.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSpec {
    pub trace_tol: f64,
    pub tail_tol: f64,
    pub hermiticity_tol: f64,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        let m = MonitorTolerances::default();
        Self {
            trace_tol: m.trace_tol,
            tail_tol: m.tail_tol,
            hermiticity_tol: m.hermiticity_tol,
        }
    }
}

impl MonitorSpec {
    pub fn tolerances(&self) -> MonitorTolerances {
        MonitorTolerances {
            trace_tol: self.trace_tol,
            tail_tol: self.tail_tol,
            hermiticity_tol: self.hermiticity_tol,
        }
    }
}

/// Which signatures to compute per snapshot and on what grids. Grid fields
/// left unset fall back to amplitude-aware defaults chosen by the runner.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignatureOptions {
    pub photon: bool,
    pub quadratures: bool,
    pub wigner: bool,
    pub husimi: bool,
    pub verdicts: bool,
    /// Half-width of the Wigner window used for negativity tracking.
    pub delta_half_width: Option<f64>,
    pub delta_step: Option<f64>,
    pub quadrature_half_width: Option<f64>,
    pub quadrature_step: Option<f64>,
    pub husimi_half_width: Option<f64>,
    pub husimi_step: Option<f64>,
    /// Lobe-axis angle override; default is the predicted arg(α₀).
    pub theta_parallel: Option<f64>,
    /// Re-evaluate the dual negativity integrators on fringe-resolving
    /// certification grids at the peak, formation, and final snapshots.
    pub certify: bool,
    /// Audit the negativity window and the Wigner-vs-quadrature marginals
    /// on a full-support map at the peak snapshot (default true).
    pub window_audit: bool,
}

impl Default for SignatureOptions {
    fn default() -> Self {
        Self {
            photon: true,
            quadratures: true,
            wigner: true,
            husimi: false,
            verdicts: true,
            delta_half_width: None,
            delta_step: None,
            quadrature_half_width: None,
            quadrature_step: None,
            husimi_half_width: None,
            husimi_step: None,
            theta_parallel: None,
            certify: false,
            window_audit: true,
        }
    }
}

/// Output artifact options.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    /// Persist every snapshot state to `states.bin` (large).
    pub write_states: bool,
    /// Snapshot indices that get a full per-snapshot report bundle;
    /// default is the negativity peak and the final snapshot.
    pub report_snapshots: Option<Vec<usize>>,
}

/// Finite-field record of the resolved parameters; reconstructible into
/// [`ScaledParams`] and safe to serialize (no infinities on the lossless
/// path).
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamsRecord {
    Driven {
        lambda: f64,
        g: f64,
        chi_prime: f64,
        delta: f64,
        n_thermal: f64,
    },
    Lossless {
        pump_t: f64,
        chi: f64,
        delta_t: f64,
        n_thermal: f64,
    },
}

impl ParamsRecord {
    pub fn from_scaled(p: &ScaledParams) -> Self {
        if p.is_lossless() {
            ParamsRecord::Lossless {
                pump_t: p.pump_t(),
                chi: p.chi(),
                delta_t: p.delta_t(),
                n_thermal: p.n_thermal(),
            }
        } else {
            ParamsRecord::Driven {
                lambda: p.lambda(),
                g: p.g(),
                chi_prime: p.chi_prime(),
                delta: p.delta(),
                n_thermal: p.n_thermal(),
            }
        }
    }

    pub fn to_scaled(&self) -> Result<ScaledParams> {
        let p = match *self {
            ParamsRecord::Driven {
                lambda,
                g,
                chi_prime,
                delta,
                n_thermal,
            } => ScaledParams::new(lambda, g, chi_prime, delta, n_thermal)?,
            ParamsRecord::Lossless {
                pump_t,
                chi,
                delta_t,
                n_thermal,
            } => ScaledParams::lossless(pump_t, chi, delta_t, n_thermal)?,
        };
        Ok(p)
    }
}

/// Snapshot schedule: an even count with an optional early burst, or an
/// explicit list of times.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SnapshotSpec {
    Count { n: usize, log_early: bool },
    Times { times: Vec<f64> },
}

/// Fully resolved, executable run description. Serializes canonically
/// (stable field order), which sweeps use for resume validation.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct RunSpec {
    pub label: String,
    pub params: ParamsRecord,
    pub unit: TimeUnit,
    /// Laboratory seconds per time unit when physical rates were given.
    pub seconds_per_unit: Option<f64>,
    pub cutoff: Option<usize>,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub snapshots: SnapshotSpec,
    pub monitors: MonitorSpec,
    pub signatures: SignatureOptions,
    pub output: OutputSpec,
}

impl RunSpec {
    /// Canonical JSON form used for sweep resume validation.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("RunSpec serializes")
    }

    /// Minimal spec with library-default signatures and schedule.
    pub fn new(label: impl Into<String>, params: &ScaledParams, unit: TimeUnit, t_end: f64) -> Self {
        Self {
            label: label.into(),
            params: ParamsRecord::from_scaled(params),
            unit,
            seconds_per_unit: None,
            cutoff: None,
            t_end,
            dt: None,
            snapshots: SnapshotSpec::Count {
                n: 200,
                log_early: true,
            },
            monitors: MonitorSpec::default(),
            signatures: SignatureOptions::default(),
            output: OutputSpec::default(),
        }
    }
}

impl RunConfigFile {
    /// Parse a TOML string.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config parse: {e}")))
    }

    /// Validate and resolve into an executable spec.
    pub fn resolve(&self) -> Result<RunSpec> {
        let styles = [
            self.params.physical.is_some(),
            self.params.scaled.is_some(),
            self.params.lossless.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if styles != 1 {
            return Err(CliError::Validation(
                "exactly one of [params.physical], [params.scaled], [params.lossless] \
                 must be present"
                    .into(),
            ));
        }

        let unit = self.plan.unit;
        let mut seconds_per_unit = None;
        let params: ScaledParams = if let Some(ph) = &self.params.physical {
            let p = PhysicalParams {
                g_bar: ph.g_bar.angular("params.physical.g_bar")?,
                epsilon: ph.epsilon.angular("params.physical.epsilon")?,
                gamma1: ph.gamma1.angular("params.physical.gamma1")?,
                gamma2: ph.gamma2.angular("params.physical.gamma2")?,
                chi_bar: match &ph.chi_bar {
                    Some(f) => f.angular("params.physical.chi_bar")?,
                    None => 0.0,
                },
                delta_bar: match &ph.delta_bar {
                    Some(f) => f.angular("params.physical.delta_bar")?,
                    None => 0.0,
                },
                n_thermal: ph.n_thermal,
            };
            seconds_per_unit = Some(p.time_scaling(unit)?.seconds_per_unit);
            if ph.lossless {
                p.scaled_lossless()?
            } else {
                p.scaled()?
            }
        } else if let Some(sc) = &self.params.scaled {
            match (sc.lambda, sc.alpha0) {
                (Some(lambda), None) => {
                    if sc.chi.is_some() {
                        return Err(CliError::Validation(
                            "params.scaled: use chi_prime with lambda (chi pairs with alpha0)"
                                .into(),
                        ));
                    }
                    ScaledParams::new(
                        lambda,
                        sc.g,
                        sc.chi_prime.unwrap_or(0.0),
                        sc.delta,
                        sc.n_thermal,
                    )?
                }
                (None, Some(alpha0)) => {
                    if sc.chi_prime.is_some() {
                        return Err(CliError::Validation(
                            "params.scaled: use chi with alpha0 (chi_prime pairs with lambda)"
                                .into(),
                        ));
                    }
                    ScaledParams::from_g_alpha0(
                        sc.g,
                        alpha0,
                        sc.chi.unwrap_or(0.0),
                        sc.delta,
                        sc.n_thermal,
                    )?
                }
                _ => {
                    return Err(CliError::Validation(
                        "params.scaled: give exactly one of lambda or alpha0".into(),
                    ))
                }
            }
        } else {
            let lo = self.params.lossless.as_ref().expect("style checked");
            match (lo.pump_t, lo.alpha0) {
                (Some(pump_t), None) => {
                    ScaledParams::lossless(pump_t, lo.chi, lo.delta_t, lo.n_thermal)?
                }
                (None, Some(alpha0)) => {
                    ScaledParams::lossless_from_alpha0(alpha0, lo.chi, lo.delta_t, lo.n_thermal)?
                }
                _ => {
                    return Err(CliError::Validation(
                        "params.lossless: give exactly one of pump_t or alpha0".into(),
                    ))
                }
            }
        };

        if params.is_lossless() && unit == TimeUnit::Tau {
            return Err(CliError::Validation(
                "lossless parameters have no single-photon timescale; \
                 set plan.unit to \"T\" or \"script-T\""
                    .into(),
            ));
        }

        if !(self.plan.t_end.is_finite() && self.plan.t_end > 0.0) {
            return Err(CliError::Validation(format!(
                "plan.t_end must be finite and positive, got {}",
                self.plan.t_end
            )));
        }

        let snapshots = if let Some(times) = &self.plan.snapshot_times {
            if self.plan.snapshots.is_some() {
                return Err(CliError::Validation(
                    "plan: give snapshots or snapshot_times, not both".into(),
                ));
            }
            let mut ts = times.clone();
            if ts.is_empty() {
                return Err(CliError::Validation(
                    "plan.snapshot_times must not be empty".into(),
                ));
            }
            ts.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
            for w in ts.windows(2) {
                if w[1] <= w[0] {
                    return Err(CliError::Validation(
                        "plan.snapshot_times must be strictly increasing".into(),
                    ));
                }
            }
            if ts[0] <= 0.0 || ts[ts.len() - 1] > self.plan.t_end {
                return Err(CliError::Validation(
                    "plan.snapshot_times must lie in (0, t_end]".into(),
                ));
            }
            SnapshotSpec::Times { times: ts }
        } else {
            let n = self.plan.snapshots.unwrap_or(200);
            if n == 0 {
                return Err(CliError::Validation("plan.snapshots must be positive".into()));
            }
            SnapshotSpec::Count {
                n,
                log_early: self.plan.log_early.unwrap_or(true),
            }
        };

        Ok(RunSpec {
            label: self.label.clone().unwrap_or_else(|| "run".into()),
            params: ParamsRecord::from_scaled(&params),
            unit,
            seconds_per_unit,
            cutoff: self.plan.cutoff,
            t_end: self.plan.t_end,
            dt: self.plan.dt,
            snapshots,
            monitors: self.monitors,
            signatures: self.signatures.clone(),
            output: self.output.clone(),
        })
    }
}
