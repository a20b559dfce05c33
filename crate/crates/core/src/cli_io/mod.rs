//! Configuration, artifact writers, the kernel cache and the command
//! implementations behind the `fermi-scatter` binary.

pub mod cache;
pub mod commands;
pub mod config;

use std::path::Path;

use crate::error::{Error, Result};

pub use cache::{CacheEvent, CacheHeader, CacheKey, KernelCache};
pub use commands::*;
pub use config::{RunConfig, CACHE_ENV, CONFIG_KEYS};

/// Round-trip formatting with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes CSV rows (already formatted) atomically.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    cache::atomic_write(path, &bytes)
}

/// Writes pretty JSON with a trailing newline, atomically.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    cache::atomic_write(path, text.as_bytes())
}

/// Machine-readable error record.
pub fn error_json(e: &Error) -> serde_json::Value {
    let kind = match e {
        Error::InvalidParams(_) => "invalid_params",
        Error::Threshold { .. } => "threshold",
        Error::CoincidentPoints => "coincident_points",
        Error::TailNotConverged { .. } => "tail_not_converged",
        Error::Quadrature { .. } => "quadrature",
        Error::Extrapolation { .. } => "extrapolation",
        Error::BasisMismatch(_) => "basis_mismatch",
        Error::Singular { .. } => "singular",
        Error::ClosedChannel { .. } => "closed_channel",
        Error::OffShell(..) => "off_shell",
        Error::HermiteOverflow(_) => "hermite_overflow",
        Error::ZeroInput => "zero_input",
        Error::Io(_) => "io",
        Error::Config(_) => "config",
        Error::Cache(_) => "cache",
    };
    serde_json::json!({"error": {"kind": kind, "message": e.to_string()}})
}
