//! Command implementations: each returns the artifacts it wrote.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::cache::{CacheKey, KernelCache};
use super::config::RunConfig;
use super::{error_json, format_f64, write_csv, write_json};
use crate::charge_kernel::{
    assemble_K, assemble_gamma_ref, gamma_from_kernel, min_hermitian_eigenvalue, ContentTag, GammaRefOptions,
    KernelMatrix, KernelOptions, ScanOptions, MAX_CONDITION,
};
use crate::error::{Error, Result};
use crate::greens::{BoundarySide, ChannelSplit};
use crate::lap_checks::{
    check_agmon, check_free_density, check_lap_convergence, check_ufficio, check_volta, CheckReport, LapOptions, Packet,
    PacketComponent,
};
use crate::oscillator::{Channel, HermiteBasis, ModelParams, MultiIndex};
use crate::quadrature::direction;
use crate::scattering::{
    sigma_total_elastic, t_born, trace_source_projection, xsec_born, Kinematics, ScatteringProblem, XsecKind,
};

/// Paths written by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: Option<PathBuf>,
    pub json: PathBuf,
}

fn kernel_options(cfg: &RunConfig) -> KernelOptions {
    KernelOptions {
        tail_tol: cfg.tail_tol,
        quad_tol: cfg.quad_tol,
        threshold_window: cfg.threshold_window,
        ..KernelOptions::default()
    }
}

/// Kernel matrices for a run, read through the cache when one is configured.
pub struct KernelSource {
    cache: Option<KernelCache>,
    opts: KernelOptions,
    cfg: RunConfig,
}

impl KernelSource {
    pub fn new(cfg: &RunConfig) -> Self {
        KernelSource { cache: cfg.resolved_cache_dir().map(KernelCache::new), opts: kernel_options(cfg), cfg: cfg.clone() }
    }

    fn cached<F: FnOnce() -> Result<KernelMatrix>>(&self, key: CacheKey, build: F) -> Result<KernelMatrix> {
        match &self.cache {
            Some(c) => c.get_or_build(&key, build).map(|(m, _)| m),
            None => build(),
        }
    }

    pub fn gamma_ref(&self, basis: &HermiteBasis, params: &ModelParams) -> Result<KernelMatrix> {
        let opts = GammaRefOptions {
            extrap_tol: self.cfg.extrap_tol,
            ..GammaRefOptions::for_params(params, self.cfg.radii)
        };
        let key = CacheKey {
            tag: ContentTag::GammaRef,
            mu: -params.lambda,
            side: BoundarySide::NegativeReal,
            lambda: params.lambda,
            omega: params.omega,
            cutoff: basis.cutoff,
            quad_order: basis.quad_order,
            tolerances: vec![opts.extrap_tol, opts.log_step, opts.radii.len() as f64],
        };
        self.cached(key, || assemble_gamma_ref(basis, params, &opts))
    }

    pub fn kernel(&self, side: BoundarySide, mu: f64, basis: &HermiteBasis, params: &ModelParams) -> Result<KernelMatrix> {
        if let BoundarySide::OffAxis(_) = side {
            return assemble_K(side, mu, basis, params, &self.opts);
        }
        let key = CacheKey {
            tag: ContentTag::K,
            mu,
            side,
            lambda: params.lambda,
            omega: params.omega,
            cutoff: basis.cutoff,
            quad_order: self.opts.time_rule.refined().short_order,
            tolerances: vec![self.opts.tail_tol, self.opts.quad_tol, self.opts.threshold_window],
        };
        self.cached(key, || assemble_K(side, mu, basis, params, &self.opts))
    }

    /// Parameters with λ raised by doubling until Γ(−λ)+α is positive
    /// definite and well conditioned, and the problem built at that λ.
    pub fn problem(&self) -> Result<ScatteringProblem> {
        let basis = HermiteBasis::new(self.cfg.cutoff);
        let mut params = self.cfg.params()?;
        for _ in 0..12 {
            let gamma = self.gamma_ref(&basis, &params)?;
            let dim = gamma.dim();
            let shifted = &gamma.entries
                + nalgebra::DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(params.alpha, 0.0);
            let sv = shifted.clone().svd(false, false).singular_values;
            if min_hermitian_eigenvalue(&shifted) > 0.0 && sv.max() / sv.min() < MAX_CONDITION {
                params.lambda_checked = true;
                let mut problem = ScatteringProblem::new(params, basis, gamma)?;
                problem.kernel_opts = self.opts;
                return Ok(problem);
            }
            log::info!("raising lambda from {}", params.lambda);
            params.lambda *= 2.0;
        }
        Err(Error::InvalidParams("no lambda found with Gamma(-lambda) + alpha positive definite".into()))
    }

    pub fn gamma(&self, problem: &ScatteringProblem, side: BoundarySide, mu: f64) -> Result<KernelMatrix> {
        let k = self.kernel(side, mu, &problem.basis, &problem.params)?;
        gamma_from_kernel(&problem.gamma_ref, &k)
    }
}

fn complex_json(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

/// Born cross-section table as CSV plus a JSON sidecar.
pub fn cmd_born(cfg: &RunConfig, kind: XsecKind) -> Result<Artifacts> {
    cfg.validate()?;
    let a = cfg.scattering_length().ok_or(Error::ZeroInput)?;
    let kin = Kinematics { energy: cfg.energy, scattering_length: a, angular_order: cfg.angular_order };
    let table = xsec_born(kind, kin, cfg.omega)?;
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match kind {
        XsecKind::Spectrum { .. } => (
            vec!["shell", "dsigma_domega"],
            table
                .rows
                .iter()
                .map(|r| vec![r.shell.unwrap_or(0).to_string(), format_f64(r.dsigma_domega)])
                .collect(),
        ),
        _ => (
            vec!["theta", "phi", "dsigma_domega"],
            table
                .rows
                .iter()
                .map(|r| vec![format_f64(r.theta), format_f64(r.phi), format_f64(r.dsigma_domega)])
                .collect(),
        ),
    };
    let csv = cfg.out_dir.join("born.csv");
    write_csv(&csv, &header, &rows)?;
    let closed = match kind {
        XsecKind::Elastic => Some(sigma_total_elastic(cfg.energy, a, cfg.omega)?),
        _ => None,
    };
    let sidecar = json!({
        "command": "born",
        "provenance": cfg.provenance(),
        "kind": kind,
        "formula": table.formula,
        "rows": table.rows.len(),
        "sigma_total": table.sigma_total,
        "sigma_total_closed_form": closed,
    });
    let json_path = cfg.out_dir.join("born.json");
    write_json(&json_path, &sidecar)?;
    Ok(Artifacts { csv: Some(csv), json: json_path })
}

/// One requested transition for `solve`: the incoming neutron moves along +z
/// with the target in `n_in`; the outgoing one leaves along (θ, φ) with the
/// target in `n_out`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRequest {
    pub n_in: MultiIndex,
    pub n_out: MultiIndex,
    pub theta: f64,
    pub phi: f64,
}

fn parse_index(s: &str) -> Result<MultiIndex> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("expected three comma-separated integers, got {s:?}")));
    }
    let mut n = [0usize; 3];
    for (slot, p) in n.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| Error::Config(format!("bad oscillator index {p:?}")))?;
    }
    Ok(MultiIndex(n))
}

impl ChannelRequest {
    /// Parses `a,b,c>d,e,f@theta,phi`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (inout, angles) = spec
            .split_once('@')
            .ok_or_else(|| Error::Config(format!("channel {spec:?}: expected IN>OUT@THETA,PHI")))?;
        let (a, b) = inout
            .split_once('>')
            .ok_or_else(|| Error::Config(format!("channel {spec:?}: expected IN>OUT@THETA,PHI")))?;
        let (t, p) = angles
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("channel {spec:?}: expected THETA,PHI")))?;
        Ok(ChannelRequest {
            n_in: parse_index(a)?,
            n_out: parse_index(b)?,
            theta: t.trim().parse().map_err(|_| Error::Config(format!("bad angle {t:?}")))?,
            phi: p.trim().parse().map_err(|_| Error::Config(format!("bad angle {p:?}")))?,
        })
    }

    pub fn channels(&self, energy: f64, omega: f64) -> Result<(Channel, Channel)> {
        let k_in2 = energy - omega * self.n_in.total() as f64;
        if !(k_in2 > 0.0) {
            return Err(Error::ClosedChannel { energy, threshold: omega * self.n_in.total() as f64 });
        }
        let k_out2 = energy - omega * self.n_out.total() as f64;
        if !(k_out2 > 0.0) {
            return Err(Error::ClosedChannel { energy, threshold: omega * self.n_out.total() as f64 });
        }
        let d = direction(self.theta, self.phi);
        let k = k_out2.sqrt();
        let inp = Channel::new([0.0, 0.0, k_in2.sqrt()], self.n_in);
        let out = Channel::new([k * d[0], k * d[1], k * d[2]], self.n_out);
        Ok((out, inp))
    }
}

/// Charges, general and Born amplitudes at the configured energy.
pub fn cmd_solve(cfg: &RunConfig, requests: &[ChannelRequest]) -> Result<Artifacts> {
    cfg.validate()?;
    let source = KernelSource::new(cfg);
    let mut entries = Vec::with_capacity(requests.len());
    let mut lambda_used = cfg.lambda;
    if !requests.is_empty() {
        let problem = source.problem()?;
        lambda_used = problem.params.lambda;
        let gamma = source.gamma(&problem, BoundarySide::Plus, cfg.energy);
        for req in requests {
            let entry = (|| -> Result<serde_json::Value> {
                let gamma = gamma.as_ref().map_err(Clone::clone)?;
                let (out, inp) = req.channels(cfg.energy, cfg.omega)?;
                let xi = problem.solve_charge_with(&inp, gamma)?;
                let general = problem.amplitude_general_with(&out, &inp, gamma)?;
                let born = t_born(&out, &inp, &problem.params)?;
                let source_norm = trace_source_projection(&inp, &problem.basis, &problem.params).norm();
                Ok(json!({
                    "request": req,
                    "k_in": inp.k,
                    "k_out": out.k,
                    "xi": xi.charge.coefficients.iter().map(|c| complex_json(*c)).collect::<Vec<_>>(),
                    "residual": xi.residual,
                    "condition": xi.condition,
                    "source_norm": source_norm,
                    "f_general": complex_json(general.value),
                    "f_born": complex_json(born.value),
                    "gap": (general.value - born.value).norm(),
                }))
            })();
            entries.push(match entry {
                Ok(v) => v,
                Err(e) => {
                    let mut v = error_json(&e);
                    v["request"] = json!(req);
                    v
                }
            });
        }
    }
    let mut provenance = cfg.provenance();
    provenance["lambda_used"] = json!(lambda_used);
    let doc = json!({"command": "solve", "provenance": provenance, "channels": entries});
    let json_path = cfg.out_dir.join("solve.json");
    write_json(&json_path, &doc)?;
    Ok(Artifacts { csv: None, json: json_path })
}

/// Smallest singular value of Γ⁺(μ)+α over an energy grid.
pub fn cmd_scan(cfg: &RunConfig, mu_min: f64, mu_max: f64, steps: usize) -> Result<Artifacts> {
    cfg.validate()?;
    if steps < 2 || !(mu_max > mu_min) {
        return Err(Error::Config("scan needs mu_max > mu_min and at least two steps".into()));
    }
    let source = KernelSource::new(cfg);
    let problem = source.problem()?;
    let grid: Vec<f64> = (0..steps).map(|i| mu_min + (mu_max - mu_min) * i as f64 / (steps - 1) as f64).collect();
    let opts = ScanOptions { kernel: kernel_options(cfg), ..ScanOptions::default() };
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &mu in &grid {
        if crate::greens::check_threshold(mu, cfg.omega, cfg.threshold_window).is_err() {
            skipped.push(mu);
            continue;
        }
        let gamma = source.gamma(&problem, BoundarySide::Plus, mu)?;
        let dim = gamma.dim();
        let a = &gamma.entries + nalgebra::DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(problem.params.alpha, 0.0);
        let sv = a.svd(false, false).singular_values;
        rows.push(crate::charge_kernel::ScanPoint { mu, smin: sv.min(), smax: sv.max(), flagged: false });
    }
    let n = rows.len();
    for i in 0..n {
        let left = i == 0 || rows[i - 1].smin >= rows[i].smin;
        let right = i + 1 == n || rows[i + 1].smin >= rows[i].smin;
        rows[i].flagged = left && right && rows[i].smin <= opts.relative_floor * rows[i].smax;
    }
    let csv = cfg.out_dir.join("scan.csv");
    write_csv(
        &csv,
        &["mu", "smin"],
        &rows.iter().map(|r| vec![format_f64(r.mu), format_f64(r.smin)]).collect::<Vec<_>>(),
    )?;
    let first = (mu_min / cfg.omega).ceil().max(0.0) as i64;
    let last = (mu_max / cfg.omega).floor() as i64;
    let thresholds: Vec<f64> = (first..=last).map(|n| n as f64 * cfg.omega).collect();
    let mut provenance = cfg.provenance();
    provenance["lambda_used"] = json!(problem.params.lambda);
    let sidecar = json!({
        "command": "scan",
        "provenance": provenance,
        "mu_min": mu_min,
        "mu_max": mu_max,
        "steps": steps,
        "thresholds": thresholds,
        "skipped_in_threshold_windows": skipped,
        "flagged": rows.iter().filter(|r| r.flagged).map(|r| json!({"mu": r.mu, "smin": r.smin})).collect::<Vec<_>>(),
        "min_smin": rows.iter().map(|r| r.smin).fold(f64::INFINITY, f64::min),
    });
    let json_path = cfg.out_dir.join("scan.json");
    write_json(&json_path, &sidecar)?;
    Ok(Artifacts { csv: Some(csv), json: json_path })
}

/// Names accepted by `check`; `all` runs every gating check.
pub const CHECK_NAMES: &[&str] = &["agmon", "ufficio", "free_density", "lap", "volta"];
const GATING_CHECKS: &[&str] = &["agmon", "ufficio", "free_density", "lap"];

/// Resolves a selection (possibly containing `all`) to check names.
pub fn resolve_checks(selection: &[String]) -> Result<Vec<&'static str>> {
    let mut out: Vec<&'static str> = Vec::new();
    for s in selection {
        if s == "all" {
            for c in GATING_CHECKS {
                if !out.contains(c) {
                    out.push(c);
                }
            }
            continue;
        }
        let name = CHECK_NAMES
            .iter()
            .find(|c| **c == s.as_str())
            .ok_or_else(|| Error::Config(format!("unknown check {s:?}; known: all, {}", CHECK_NAMES.join(", "))))?;
        if !out.contains(name) {
            out.push(name);
        }
    }
    Ok(out)
}

/// Runs the selected checks; with `quick` the basis and radii are reduced.
pub fn cmd_check(cfg: &RunConfig, selection: &[String], quick: bool) -> Result<Vec<CheckReport>> {
    cfg.validate()?;
    let names = resolve_checks(selection)?;
    let mut cfg = cfg.clone();
    if quick {
        cfg.cutoff = cfg.cutoff.min(2);
        cfg.radii = cfg.radii.min(6);
    }
    let omega = cfg.omega;
    let mut reports = Vec::new();
    let run = |r: Result<CheckReport>, name: &str| -> CheckReport {
        r.unwrap_or_else(|e| CheckReport {
            check: name.into(),
            inputs: json!({}),
            discrepancy: f64::INFINITY,
            units: "error".into(),
            tolerance: 0.0,
            status: crate::lap_checks::CheckStatus::Fail,
            runtime_s: 0.0,
            details: error_json(&e),
        })
    };
    for name in names {
        match name {
            "agmon" => {
                reports.push(run(check_agmon(BoundarySide::Plus, omega, 1.0, 1e-6), name));
            }
            "ufficio" => {
                let basis = HermiteBasis::new(cfg.cutoff);
                reports.push(run(check_ufficio(10.0 * omega, 20.0 * omega, omega, &basis, cfg.radii, 10.0), name));
            }
            "free_density" => {
                let packet = Packet::new(vec![
                    PacketComponent { n: MultiIndex::GROUND, amplitude: Complex64::new(1.0, 0.0), beta: 1.0 },
                    PacketComponent { n: MultiIndex::new(1, 0, 0), amplitude: Complex64::new(0.5, -0.3), beta: 0.7 },
                ]);
                let r = packet.and_then(|p| check_free_density(1.5 * omega, omega, &p, cfg.angular_order, 1e-6));
                reports.push(run(r, name));
            }
            "lap" => {
                let r = KernelSource::new(&cfg).problem().and_then(|problem| {
                    let mu = 1.3 * omega;
                    let probes: Vec<_> = [MultiIndex::GROUND, MultiIndex::new(0, 0, 1)]
                        .iter()
                        .map(|n| {
                            let k = (mu - omega * n.total() as f64).max(0.0).sqrt();
                            trace_source_projection(&Channel::new([0.0, 0.0, k], *n), &problem.basis, &problem.params)
                        })
                        .collect();
                    check_lap_convergence(mu, &problem, &probes, &LapOptions::default())
                });
                reports.push(run(r, name));
            }
            "volta" => {
                let r = KernelSource::new(&cfg).problem().and_then(|problem| {
                    let mu = cfg.energy;
                    ChannelSplit::new(mu, omega);
                    let packet = Packet::new(vec![PacketComponent {
                        n: MultiIndex::GROUND,
                        amplitude: Complex64::new(1.0, 0.0),
                        beta: 1.0,
                    }])?;
                    check_volta(mu, &packet, &problem, cfg.angular_order, 1e-2)
                });
                reports.push(run(r, name));
            }
            _ => unreachable!("resolve_checks only returns known names"),
        }
    }
    Ok(reports)
}

/// Description of every cache entry, one JSON object each.
pub fn cmd_cache_inspect(cfg: &RunConfig) -> Result<Vec<serde_json::Value>> {
    let dir = cfg.resolved_cache_dir().ok_or_else(|| Error::Config("no cache directory configured".into()))?;
    let cache = KernelCache::new(dir);
    Ok(cache
        .entries()?
        .into_iter()
        .map(|(path, header)| match header {
            Ok(h) => json!({
                "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
                "tag": format!("{:?}", h.tag),
                "mu": h.mu,
                "side": h.side,
                "lambda": h.lambda,
                "omega": h.omega,
                "cutoff": h.cutoff,
                "quad_order": h.quad_order,
                "dim": h.dim,
            }),
            Err(e) => json!({"file": path.file_name().map(|f| f.to_string_lossy().into_owned()), "invalid": e}),
        })
        .collect())
}

pub fn cmd_cache_clear(cfg: &RunConfig) -> Result<usize> {
    let dir = cfg.resolved_cache_dir().ok_or_else(|| Error::Config("no cache directory configured".into()))?;
    KernelCache::new(dir).clear()
}
