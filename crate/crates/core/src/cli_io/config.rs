//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::THRESHOLD_WINDOW;
use crate::oscillator::ModelParams;
use crate::scattering::{alpha_from_scattering_length, scattering_length_from_alpha};

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "FERMI_SCATTER_CACHE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub omega: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub cutoff: usize,
    pub energy: f64,
    pub angular_order: usize,
    pub tail_tol: f64,
    pub quad_tol: f64,
    pub extrap_tol: f64,
    pub radii: usize,
    pub threshold_window: f64,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            omega: 1.0,
            lambda: 10.0,
            alpha: 1.0 / (8.0 * std::f64::consts::PI),
            cutoff: 4,
            energy: 1.3,
            angular_order: 32,
            tail_tol: 1e-8,
            quad_tol: 1e-6,
            extrap_tol: 1e-6,
            radii: 7,
            threshold_window: THRESHOLD_WINDOW,
            out_dir: PathBuf::from("out"),
            cache_dir: None,
            seed: 0,
        }
    }
}

/// Keys accepted in config files, with their meaning; printed by `--help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("omega", "oscillator frequency (default 1)"),
    ("lambda", "renormalization point, raised automatically until Gamma(-lambda)+alpha > 0 (default 10)"),
    ("alpha", "inverse scattering-length parameter (default 1/(8 pi), i.e. a = 1)"),
    ("scattering_length", "a = 1/(8 pi alpha); sets alpha"),
    ("cutoff", "largest total oscillator degree of the basis (default 4)"),
    ("energy", "total energy E (default 1.3)"),
    ("angular_order", "polynomial degree of the sphere rule (default 32)"),
    ("tail_tol", "relative bound for truncated oscillator shells (default 1e-8)"),
    ("quad_tol", "relative agreement of two time-quadrature orders (default 1e-6)"),
    ("extrap_tol", "relative spread allowed in the Gamma(-lambda) extrapolation (default 1e-6)"),
    ("radii", "number of radii in the Gamma(-lambda) extrapolation (default 7)"),
    ("threshold_window", "excluded half-width around thresholds in units of omega (default 1e-3)"),
    ("out_dir", "output directory (default ./out)"),
    ("cache_dir", "kernel cache directory (overridden by FERMI_SCATTER_CACHE)"),
    ("seed", "seed recorded in every artifact (default 0)"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value {value:?} for key {key}")))
}

impl RunConfig {
    /// Sets one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "omega" => self.omega = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "scattering_length" => self.alpha = alpha_from_scattering_length(parse(key, value)?)?,
            "cutoff" => self.cutoff = parse(key, value)?,
            "energy" => self.energy = parse(key, value)?,
            "angular_order" => self.angular_order = parse(key, value)?,
            "tail_tol" => self.tail_tol = parse(key, value)?,
            "quad_tol" => self.quad_tol = parse(key, value)?,
            "extrap_tol" => self.extrap_tol = parse(key, value)?,
            "radii" => self.radii = parse(key, value)?,
            "threshold_window" => self.threshold_window = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.omega, self.lambda, self.alpha)?;
        for (name, v) in [
            ("tail_tol", self.tail_tol),
            ("quad_tol", self.quad_tol),
            ("extrap_tol", self.extrap_tol),
            ("threshold_window", self.threshold_window),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.radii < 3 {
            return Err(Error::Config("radii must be at least 3".into()));
        }
        if self.angular_order == 0 {
            return Err(Error::Config("angular_order must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.omega, self.lambda, self.alpha)
    }

    pub fn scattering_length(&self) -> Option<f64> {
        scattering_length_from_alpha(self.alpha).ok()
    }

    /// Cache directory: the environment variable wins over the config.
    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
            _ => self.cache_dir.clone(),
        }
    }

    /// Provenance block embedded in every artifact.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "version": crate::VERSION,
            "omega": self.omega,
            "lambda": self.lambda,
            "alpha": self.alpha,
            "scattering_length": self.scattering_length(),
            "cutoff": self.cutoff,
            "energy": self.energy,
            "angular_order": self.angular_order,
            "tail_tol": self.tail_tol,
            "quad_tol": self.quad_tol,
            "extrap_tol": self.extrap_tol,
            "radii": self.radii,
            "threshold_window": self.threshold_window,
            "seed": self.seed,
        })
    }
}
