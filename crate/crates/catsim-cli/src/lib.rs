//! Command-line machinery for the catsim library: configuration files,
//! experiment presets with pass/fail comparison tables, parameter sweeps
//! with resume-safe partial results, and artifact export.
//!
//! The binary (`catsim`) is a thin veneer over this library so integration
//! tests can drive every subcommand in-process.

pub mod config;
pub mod export;
pub mod presets;
pub mod runner;
pub mod sweep;

use catsim::CatsimError;

/// CLI-level error with a stable machine-readable kind and process exit
/// code. Validation problems exit 2, monitor breaches 3, I/O and format
/// problems 4, anything else 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Engine(#[from] CatsimError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
}

impl CliError {
    /// Stable kind tag for the machine-readable error record.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Engine(e) => match e {
                CatsimError::MonitorBreach { .. } => "monitor-breach",
                CatsimError::Io(_) => "io",
                CatsimError::Format(_) => "format",
                CatsimError::NonFinite(_) => "non-finite",
                _ => "validation",
            },
            CliError::Io(_) => "io",
            CliError::Format(_) => "format",
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "validation" => 2,
            "monitor-breach" => 3,
            "io" | "format" => 4,
            _ => 1,
        }
    }

    /// Single-line JSON error record for stderr.
    pub fn record(&self) -> String {
        let mut map = serde_json::Map::new();
        map.insert("error".into(), self.kind().into());
        map.insert("message".into(), self.to_string().into());
        if let CliError::Engine(CatsimError::MonitorBreach {
            monitor,
            time,
            value,
            tol,
            advice,
        }) = self
        {
            let mut breach = serde_json::Map::new();
            breach.insert("monitor".into(), monitor.to_string().into());
            breach.insert("time".into(), (*time).into());
            breach.insert("value".into(), (*value).into());
            breach.insert("tolerance".into(), (*tol).into());
            breach.insert("advice".into(), advice.to_string().into());
            map.insert("breach".into(), serde_json::Value::Object(breach));
        }
        serde_json::Value::Object(map).to_string()
    }
}

/// Shorthand result for CLI operations.
pub type Result<T> = std::result::Result<T, CliError>;
