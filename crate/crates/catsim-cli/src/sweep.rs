//! Parameter sweeps: a cartesian grid of runs driven from one TOML file,
//! with per-point JSON records, crash-safe resume, and an aggregated CSV.

use std::fs;
use std::path::{Path, PathBuf};

use catsim::params::{ScaledParams, TimeUnit};
use catsim::propagator::MonitorReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunSpec, SignatureOptions, SnapshotSpec};
use crate::runner::{execute, ExecuteOptions, Measurements, ResolvedPlan};
use crate::{CliError, Result};

const MAX_POINTS: usize = 2000;

fn default_axis() -> Vec<f64> {
    vec![0.0]
}

fn default_g_axis() -> Vec<f64> {
    vec![2.5]
}

fn default_snapshots() -> usize {
    120
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    sweep: SweepSection,
}

/// Declarative sweep: each list is one axis of the cartesian grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub label: String,
    pub unit: TimeUnit,
    pub t_end: f64,
    #[serde(default = "default_g_axis")]
    pub g: Vec<f64>,
    /// Target amplitude axis (pairs with `chi`); exclusive with `lambda`.
    pub alpha0: Option<Vec<f64>>,
    /// Pump axis (pairs with `chi_prime`); exclusive with `alpha0`.
    pub lambda: Option<Vec<f64>>,
    pub chi: Option<Vec<f64>>,
    pub chi_prime: Option<Vec<f64>>,
    #[serde(default = "default_axis")]
    pub delta: Vec<f64>,
    #[serde(default = "default_axis")]
    pub n_thermal: Vec<f64>,
    pub dt: Option<f64>,
    pub cutoff: Option<usize>,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Per-point signature options; a minimal fringe/negativity set when
    /// omitted.
    pub signatures: Option<SignatureOptions>,
}

/// Axis coordinates of one grid point, as written in the point record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepAxes {
    pub g: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_prime: Option<f64>,
    pub delta: f64,
    pub n_thermal: f64,
}

/// Everything persisted for one completed grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub axes: SweepAxes,
    pub spec: RunSpec,
    pub resolved: ResolvedPlan,
    pub monitor: MonitorReport,
    pub measurements: Measurements,
}

/// One planned grid point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub axes: SweepAxes,
    pub spec: RunSpec,
}

fn sweep_default_signatures() -> SignatureOptions {
    SignatureOptions {
        photon: false,
        quadratures: true,
        wigner: true,
        husimi: false,
        verdicts: true,
        certify: false,
        window_audit: false,
        ..SignatureOptions::default()
    }
}

impl SweepSection {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SweepFile = toml::from_str(text)
            .map_err(|e| CliError::Format(format!("sweep config: {e}")))?;
        file.sweep.validate()?;
        Ok(file.sweep)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(CliError::Validation(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        match (&self.alpha0, &self.lambda) {
            (Some(_), Some(_)) => {
                return Err(CliError::Validation(
                    "give either alpha0 or lambda as the pump axis, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Validation(
                    "one of alpha0 or lambda must be given".into(),
                ))
            }
            (Some(_), None) => {
                if self.chi_prime.is_some() {
                    return Err(CliError::Validation(
                        "chi_prime pairs with lambda; use chi with alpha0".into(),
                    ));
                }
            }
            (None, Some(_)) => {
                if self.chi.is_some() {
                    return Err(CliError::Validation(
                        "chi pairs with alpha0; use chi_prime with lambda".into(),
                    ));
                }
            }
        }
        for (name, axis) in [
            ("g", Some(&self.g)),
            ("alpha0", self.alpha0.as_ref()),
            ("lambda", self.lambda.as_ref()),
            ("chi", self.chi.as_ref()),
            ("chi_prime", self.chi_prime.as_ref()),
            ("delta", Some(&self.delta)),
            ("n_thermal", Some(&self.n_thermal)),
        ] {
            if let Some(axis) = axis {
                if axis.is_empty() {
                    return Err(CliError::Validation(format!("axis {name} is empty")));
                }
                if axis.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Validation(format!(
                        "axis {name} contains a non-finite value"
                    )));
                }
            }
        }
        if self.snapshots == 0 {
            return Err(CliError::Validation("snapshots must be positive".into()));
        }
        let n = self.points_len();
        if n > MAX_POINTS {
            return Err(CliError::Validation(format!(
                "sweep has {n} points; the limit is {MAX_POINTS}"
            )));
        }
        Ok(())
    }

    fn pump_axis(&self) -> &[f64] {
        self.alpha0
            .as_deref()
            .or(self.lambda.as_deref())
            .expect("validated")
    }

    fn kerr_axis(&self) -> Vec<f64> {
        self.chi
            .clone()
            .or_else(|| self.chi_prime.clone())
            .unwrap_or_else(default_axis)
    }

    fn points_len(&self) -> usize {
        self.g.len()
            * self.pump_axis().len()
            * self.kerr_axis().len()
            * self.delta.len()
            * self.n_thermal.len()
    }

    /// Expand the grid in a fixed order: g, pump, kerr, delta, n_thermal
    /// (last axis fastest).
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let by_amplitude = self.alpha0.is_some();
        let kerr = self.kerr_axis();
        let mut points = Vec::with_capacity(self.points_len());
        for &g in &self.g {
            for &pump in self.pump_axis() {
                for &k in &kerr {
                    for &delta in &self.delta {
                        for &n_th in &self.n_thermal {
                            let index = points.len();
                            let params = if by_amplitude {
                                ScaledParams::from_g_alpha0(g, pump, k, delta, n_th)?
                            } else {
                                ScaledParams::new(pump, g, k, delta, n_th)?
                            };
                            let axes = SweepAxes {
                                g,
                                alpha0: by_amplitude.then_some(pump),
                                lambda: (!by_amplitude).then_some(pump),
                                chi: by_amplitude.then_some(k),
                                chi_prime: (!by_amplitude).then_some(k),
                                delta,
                                n_thermal: n_th,
                            };
                            let label = format!("{}-{index:04}", self.label);
                            let mut spec = RunSpec::new(&label, &params, self.unit, self.t_end);
                            spec.dt = self.dt;
                            spec.cutoff = self.cutoff;
                            spec.snapshots = SnapshotSpec::Count {
                                n: self.snapshots,
                                log_early: true,
                            };
                            spec.signatures = self
                                .signatures
                                .clone()
                                .unwrap_or_else(sweep_default_signatures);
                            points.push(SweepPoint { index, axes, spec });
                        }
                    }
                }
            }
        }
        Ok(points)
    }
}

fn point_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("point-{index:04}.json"))
}

/// A stored point is reusable when its spec matches the current plan
/// exactly (order-insensitive JSON equality).
fn reusable(path: &Path, spec: &RunSpec) -> bool {
    let Ok(text) = fs::read_to_string(path) else {
        return false;
    };
    let Ok(record) = serde_json::from_str::<serde_json::Value>(&text) else {
        return false;
    };
    match serde_json::to_value(spec) {
        Ok(current) => record.get("spec") == Some(&current),
        Err(_) => false,
    }
}

fn write_point(path: &Path, record: &PointRecord) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut bytes = serde_json::to_vec_pretty(record)
        .map_err(|e| CliError::Format(format!("point record: {e}")))?;
    bytes.push(b'\n');
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Aggregate all point records into sweep.csv (index order).
fn write_summary(dir: &Path, records: &[PointRecord]) -> Result<()> {
    let mut out = String::from(
        "index,g,alpha0,lambda,chi,chi_prime,delta,n_thermal,cutoff,dt,\
         formation_time,lifetime_kind,lifetime,peak_delta,peak_time,\
         ever_separated,ever_cat,final_nbar,final_purity,max_trace_deviation\n",
    );
    for r in records {
        let m = &r.measurements;
        let kind = serde_json::to_value(&m.lifetime)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str().map(String::from)))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.index,
            r.axes.g,
            csv_opt(r.axes.alpha0),
            csv_opt(r.axes.lambda),
            csv_opt(r.axes.chi),
            csv_opt(r.axes.chi_prime),
            r.axes.delta,
            r.axes.n_thermal,
            r.resolved.cutoff,
            r.resolved.dt,
            csv_opt(m.formation_time),
            kind,
            csv_opt(m.lifetime.numeric()),
            csv_opt(m.peak_delta),
            csv_opt(m.peak_time),
            m.ever_separated,
            m.ever_cat,
            m.final_nbar,
            m.final_purity,
            r.monitor.max_trace_deviation,
        ));
    }
    fs::write(dir.join("sweep.csv"), out)?;
    Ok(())
}

/// Outcome counts of one sweep invocation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepSummary {
    pub total: usize,
    pub executed: usize,
    pub reused: usize,
}

/// Run (or resume) a sweep into `out_dir`.
pub fn run_sweep(section: &SweepSection, out_dir: &Path, deterministic: bool) -> Result<SweepSummary> {
    let points = section.points()?;
    let points_dir = out_dir.join("points");
    fs::create_dir_all(&points_dir)?;

    let pending: Vec<&SweepPoint> = points
        .iter()
        .filter(|p| !reusable(&point_path(&points_dir, p.index), &p.spec))
        .collect();
    let reused = points.len() - pending.len();

    let opts = ExecuteOptions {
        deterministic,
        out_dir: None,
    };
    let results: Vec<Result<()>> = pending
        .par_iter()
        .map(|point| {
            let outcome = execute(&point.spec, &opts)?;
            let record = PointRecord {
                index: point.index,
                axes: point.axes.clone(),
                spec: point.spec.clone(),
                resolved: outcome.manifest.resolved.clone(),
                monitor: outcome.manifest.monitor.clone(),
                measurements: outcome.manifest.measurements.clone(),
            };
            write_point(&point_path(&points_dir, point.index), &record)
        })
        .collect();
    let executed = pending.len();
    for r in results {
        r?;
    }

    // Re-read every point so the summary also covers reused records.
    let mut records = Vec::with_capacity(points.len());
    for point in &points {
        let text = fs::read_to_string(point_path(&points_dir, point.index))?;
        let record: PointRecord = serde_json::from_str(&text)
            .map_err(|e| CliError::Format(format!("point {}: {e}", point.index)))?;
        records.push(record);
    }
    write_summary(out_dir, &records)?;

    Ok(SweepSummary {
        total: points.len(),
        executed,
        reused,
    })
}
