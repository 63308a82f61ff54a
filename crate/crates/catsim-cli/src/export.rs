//! Re-export of completed run directories: regenerate per-snapshot tables
//! from stored states (CSV) or bundle the run records into one JSON file.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use catsim::persist::read_run;
use catsim::signatures::{photon_number_distribution, purity, quadrature_distribution, GridSpec};
use clap::ValueEnum;
use serde_json::{json, Map, Value};

use crate::runner::RunManifest;
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}

fn load_manifest(run_dir: &Path) -> Result<RunManifest> {
    let path = run_dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Validation(format!(
            "{} is not a run directory (manifest.json: {e})",
            run_dir.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("manifest.json: {e}")))
}

/// Parse one float cell, treating empty as null and booleans as booleans.
fn cell_value(raw: &str) -> Value {
    if raw.is_empty() {
        Value::Null
    } else if raw == "true" {
        Value::Bool(true)
    } else if raw == "false" {
        Value::Bool(false)
    } else if let Ok(v) = raw.parse::<f64>() {
        json!(v)
    } else {
        Value::String(raw.to_string())
    }
}

/// Read a headered CSV (ignoring leading `#` comment lines) into JSON rows.
fn csv_rows(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let Some(header) = lines.next() else {
        return Ok(Vec::new());
    };
    let names: Vec<&str> = header.split(',').collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut row = Map::new();
        for (name, raw) in names.iter().zip(line.split(',')) {
            row.insert(name.to_string(), cell_value(raw));
        }
        rows.push(Value::Object(row));
    }
    Ok(rows)
}

/// Read back a quadrature CSV: (theta, step, (x, p) rows).
pub fn read_quadrature_csv(path: &Path) -> Result<(f64, f64, Vec<(f64, f64)>)> {
    let text = fs::read_to_string(path)?;
    let mut theta = None;
    let mut step = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some(v) = token.strip_prefix("theta=") {
                    theta = v.parse::<f64>().ok();
                } else if let Some(v) = token.strip_prefix("step=") {
                    step = v.parse::<f64>().ok();
                }
            }
            continue;
        }
        if line == "x,p" || line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(x), Some(p)) = (parts.next(), parts.next()) else {
            return Err(CliError::Format(format!("malformed quadrature row: {line}")));
        };
        let x: f64 = x
            .parse()
            .map_err(|_| CliError::Format(format!("bad x value: {x}")))?;
        let p: f64 = p
            .parse()
            .map_err(|_| CliError::Format(format!("bad p value: {p}")))?;
        rows.push((x, p));
    }
    let theta = theta.ok_or_else(|| CliError::Format("quadrature CSV lacks theta".into()))?;
    let step = step.ok_or_else(|| CliError::Format("quadrature CSV lacks step".into()))?;
    Ok((theta, step, rows))
}

fn quad_grid(manifest: &RunManifest) -> Result<GridSpec> {
    let alpha = manifest.measurements.alpha0_abs;
    match (
        manifest.resolved.quadrature_half_width,
        manifest.resolved.quadrature_step,
    ) {
        (Some(hw), Some(step)) => Ok(GridSpec::centered(hw, step)?),
        _ => Ok(GridSpec::default_quadrature(alpha)?),
    }
}

/// Regenerate per-snapshot observables from the stored density matrices.
fn export_csv(run_dir: &Path, manifest: &RunManifest, out: &Path) -> Result<usize> {
    let states_path = run_dir.join("states.bin");
    if !states_path.is_file() {
        return Err(CliError::Validation(format!(
            "{} has no states.bin; rerun with output.write_states = true",
            run_dir.display()
        )));
    }
    let stored = read_run(&states_path)?;
    let theta = manifest.measurements.theta_parallel;
    let grid = quad_grid(manifest)?;
    fs::create_dir_all(out)?;

    let mut index = String::from("index,time,nbar,purity,photon,quad_parallel,quad_perpendicular\n");
    for (i, (time, rho)) in stored.snapshots.iter().enumerate() {
        let photon_name = format!("photon-{i:04}.csv");
        let par_name = format!("quad-parallel-{i:04}.csv");
        let perp_name = format!("quad-perpendicular-{i:04}.csv");

        let probs = photon_number_distribution(rho);
        let mut photon = String::from("n,probability\n");
        let mut nbar = 0.0;
        for (n, p) in probs.iter().enumerate() {
            nbar += n as f64 * p;
            photon.push_str(&format!("{n},{p:.17e}\n"));
        }
        fs::write(out.join(&photon_name), photon)?;

        let par = quadrature_distribution(rho, theta, &grid)?;
        let mut buf = Vec::new();
        par.write_csv(&mut buf)?;
        fs::write(out.join(&par_name), buf)?;

        let perp = quadrature_distribution(rho, theta + FRAC_PI_2, &grid)?;
        let mut buf = Vec::new();
        perp.write_csv(&mut buf)?;
        fs::write(out.join(&perp_name), buf)?;

        index.push_str(&format!(
            "{i},{time},{nbar},{},{photon_name},{par_name},{perp_name}\n",
            purity(rho)
        ));
    }
    fs::write(out.join("index.csv"), index)?;
    Ok(stored.snapshots.len())
}

/// Bundle manifest, series, and timeline into a single JSON document.
fn export_json(run_dir: &Path, manifest: &RunManifest, out: &Path) -> Result<usize> {
    let manifest_value =
        serde_json::to_value(manifest).map_err(|e| CliError::Format(e.to_string()))?;
    let series_path = run_dir.join("series.csv");
    let series = if series_path.is_file() {
        Value::Array(csv_rows(&series_path)?)
    } else {
        Value::Null
    };
    let timeline_path = run_dir.join("timeline.json");
    let timeline = if timeline_path.is_file() {
        serde_json::from_str::<Value>(&fs::read_to_string(&timeline_path)?)
            .map_err(|e| CliError::Format(format!("timeline.json: {e}")))?
    } else {
        Value::Null
    };
    let n = series.as_array().map(Vec::len).unwrap_or(0);
    let bundle = json!({
        "manifest": manifest_value,
        "series": series,
        "timeline": timeline,
    });
    fs::create_dir_all(out)?;
    let mut bytes =
        serde_json::to_vec_pretty(&bundle).map_err(|e| CliError::Format(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(out.join("export.json"), bytes)?;
    Ok(n)
}

/// Export a run directory; returns (output directory, item count).
pub fn export_run(
    run_dir: &Path,
    format: ExportFormat,
    out: Option<&Path>,
) -> Result<(PathBuf, usize)> {
    let manifest = load_manifest(run_dir)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run_dir.join("export"));
    let count = match format {
        ExportFormat::Csv => export_csv(run_dir, &manifest, &out_dir)?,
        ExportFormat::Json => export_json(run_dir, &manifest, &out_dir)?,
    };
    Ok((out_dir, count))
}
