//! `catsim` command line: run configurations, reproduce pinned benchmark
//! presets, drive parameter sweeps, and export completed run directories.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use catsim_cli::export::{export_run, ExportFormat};
use catsim_cli::presets::{run_preset, PresetId};
use catsim_cli::runner::{execute, ExecuteOptions, LifetimeOutcome};
use catsim_cli::sweep::{run_sweep, SweepSection};
use catsim_cli::config::RunConfigFile;
use catsim_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "catsim",
    version,
    about = "Dissipative cat-state simulator: two-photon driven Kerr cavities with losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Override the Fock-space cutoff.
    #[arg(long)]
    cutoff: Option<usize>,

    /// Override the integrator step (in the run's time unit).
    #[arg(long)]
    dt: Option<f64>,

    /// Single-threaded, byte-reproducible artifacts (wall timing omitted).
    #[arg(long)]
    deterministic: bool,

    /// Worker threads for parallel analysis (default: all cores;
    /// forced to 1 by --deterministic).
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one TOML configuration and write its artifacts.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Execute a pinned benchmark preset and print its comparison table.
    Reproduce {
        #[arg(value_enum)]
        preset: PresetId,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run (or resume) a cartesian parameter sweep from a TOML file.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Re-derive tables from a completed run directory.
    Export {
        run_dir: PathBuf,
        /// Output representation.
        #[arg(long, value_enum, default_value_t = ExportFormat::Csv)]
        format: ExportFormat,
        /// Destination directory (default: <run_dir>/export).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads(common: &CommonOpts) -> Result<()> {
    let threads = if common.deterministic {
        Some(1)
    } else {
        common.workers
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn lifetime_text(outcome: &LifetimeOutcome) -> String {
    match outcome {
        LifetimeOutcome::NotComputed => "not computed".into(),
        LifetimeOutcome::Zero => "0 (never above threshold)".into(),
        LifetimeOutcome::Value { lifetime } => format!("{lifetime}"),
        LifetimeOutcome::Censored {
            last_time,
            last_delta,
        } => format!("censored (delta {last_delta:.4} at horizon {last_time})"),
    }
}

fn opt_text(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into())
}

fn cmd_run(config: PathBuf, common: CommonOpts) -> Result<()> {
    configure_threads(&common)?;
    let text = fs::read_to_string(&config)?;
    let file = RunConfigFile::from_toml(&text)?;
    let mut spec = file.resolve()?;
    if let Some(c) = common.cutoff {
        spec.cutoff = Some(c);
    }
    if let Some(dt) = common.dt {
        spec.dt = Some(dt);
    }
    let out_dir = common
        .out
        .or_else(|| spec.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&spec.label));
    let opts = ExecuteOptions {
        deterministic: common.deterministic,
        out_dir: Some(out_dir),
    };
    let outcome = execute(&spec, &opts)?;
    let m = &outcome.manifest.measurements;
    let r = &outcome.manifest.resolved;
    println!(
        "run {}: cutoff={} dt={} steps={} snapshots={}",
        spec.label, r.cutoff, r.dt, r.n_steps, r.snapshot_count
    );
    println!(
        "  formation_time={} peak_delta={} at t={} lifetime={}",
        opt_text(m.formation_time),
        opt_text(m.peak_delta),
        opt_text(m.peak_time),
        lifetime_text(&m.lifetime)
    );
    println!(
        "  final nbar={:.6} purity={:.6} ever_cat={}",
        m.final_nbar, m.final_purity, m.ever_cat
    );
    let mon = &outcome.manifest.monitor;
    println!(
        "  monitors: |trace-1|<={:.3e} hermiticity<={:.3e} tail<={:.3e}",
        mon.max_trace_deviation, mon.max_hermiticity_defect, mon.max_tail_occupancy
    );
    if let Some(dir) = &outcome.out_dir {
        println!("  artifacts: {}", dir.display());
    }
    Ok(())
}

fn cmd_reproduce(preset: PresetId, common: CommonOpts) -> Result<()> {
    // Presets pin their own cutoffs and steps; overrides go through `run`.
    if common.cutoff.is_some() || common.dt.is_some() {
        return Err(CliError::Validation(
            "presets pin cutoff and dt; use the run subcommand for overrides".into(),
        ));
    }
    configure_threads(&common)?;
    let base = common
        .out
        .unwrap_or_else(|| PathBuf::from("runs"))
        .join(preset.name());
    fs::create_dir_all(&base)?;
    let opts = ExecuteOptions {
        deterministic: common.deterministic,
        out_dir: None,
    };
    let mut report = run_preset(preset, &opts, Some(&base))?;
    report.rows.sort_by(|a, b| a.cell.cmp(&b.cell));
    print!("{}", report.table());
    let passed = report.rows.iter().filter(|r| r.pass).count();
    println!("{passed}/{} comparisons passed", report.rows.len());
    let csv_path = base.join(format!("reproduce-{}.csv", preset.name()));
    fs::write(&csv_path, report.csv())?;
    println!("table: {}", csv_path.display());
    Ok(())
}

fn cmd_sweep(config: PathBuf, common: CommonOpts) -> Result<()> {
    configure_threads(&common)?;
    let text = fs::read_to_string(&config)?;
    let mut section = SweepSection::from_toml(&text)?;
    if let Some(c) = common.cutoff {
        section.cutoff = Some(c);
    }
    if let Some(dt) = common.dt {
        section.dt = Some(dt);
    }
    let out_dir = common.out.unwrap_or_else(|| PathBuf::from("sweep-out"));
    let summary = run_sweep(&section, &out_dir, common.deterministic)?;
    println!(
        "sweep {}: {} points ({} executed, {} reused)",
        section.label, summary.total, summary.executed, summary.reused
    );
    println!("summary: {}", out_dir.join("sweep.csv").display());
    Ok(())
}

fn cmd_export(run_dir: PathBuf, format: ExportFormat, out: Option<PathBuf>) -> Result<()> {
    let (dir, count) = export_run(&run_dir, format, out.as_deref())?;
    println!("exported {count} records to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, common } => cmd_run(config, common),
        Command::Reproduce { preset, common } => cmd_reproduce(preset, common),
        Command::Sweep { config, common } => cmd_sweep(config, common),
        Command::Export {
            run_dir,
            format,
            out,
        } => cmd_export(run_dir, format, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
