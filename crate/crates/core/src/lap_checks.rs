//! Numerical checks of the resolvent identities. Each check evaluates both
//! sides through separate code paths and reports the discrepancy.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::charge_kernel::{
    assemble_K, assemble_gamma_ref, gamma_from_kernel, ChargeVector, GammaRefOptions, GammaSystem, KernelMatrix,
    KernelOptions,
};
use crate::error::{Error, Result};
use crate::greens::{BoundarySide, FreeResolventGaussian};
use crate::momentum::{poly_conj, separable_resolvent_integral, Shift};
use crate::oscillator::{channel_momentum, form_factor_poly, HermiteBasis, ModelParams, MultiIndex};
use crate::quadrature::SphereRule;
use crate::scattering::{trace_source_projection, ScatteringProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub inputs: serde_json::Value,
    pub discrepancy: f64,
    pub units: String,
    pub tolerance: f64,
    pub status: CheckStatus,
    pub runtime_s: f64,
    #[serde(default)]
    pub details: serde_json::Value,
}

impl CheckReport {
    fn new(check: &str, inputs: serde_json::Value, discrepancy: f64, units: &str, tolerance: f64, start: Instant) -> Self {
        let status = if discrepancy <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        CheckReport {
            check: check.into(),
            inputs,
            discrepancy,
            units: units.into(),
            tolerance,
            status,
            runtime_s: start.elapsed().as_secs_f64(),
            details: serde_json::Value::Null,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = details;
        self
    }
}

/// (2β)^{−3/2} e^{−|k|²/(4β)}, the unitary Fourier transform of e^{−β|x|²}.
pub fn gaussian_transform(beta: f64, k2: f64) -> f64 {
    (2.0 * beta).powf(-1.5) * (-k2 / (4.0 * beta)).exp()
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Im⟨f, r₀^±(μ)f⟩ against ±(π/(2√μ)) ∫_{|k|=√μ} |f̂|² dσ for f = e^{−β|x|²}.
pub fn check_agmon(side: BoundarySide, mu: f64, beta: f64, tolerance: f64) -> Result<CheckReport> {
    let start = Instant::now();
    if !(mu > 0.0) {
        return Err(Error::InvalidParams(format!("the trace identity needs mu > 0, got {mu}")));
    }
    let sign = match side {
        BoundarySide::Plus => 1.0,
        BoundarySide::Minus => -1.0,
        _ => return Err(Error::InvalidParams("the trace identity is stated for the plus and minus sides".into())),
    };
    let lhs = FreeResolventGaussian::new(side, mu, beta)?.pairing().im;
    let shell = 4.0 * PI * mu * gaussian_transform(beta, mu).powi(2);
    let rhs = sign * PI / (2.0 * mu.sqrt()) * shell;
    Ok(CheckReport::new(
        "agmon",
        json!({"side": side.label(), "mu": mu, "beta": beta}),
        relative(lhs, rhs),
        "relative",
        tolerance,
        start,
    )
    .with_details(json!({"lhs": lhs, "rhs": rhs})))
}

/// One channel of a wave packet: amplitude · e^{−β|x|²} φ_n(y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketComponent {
    pub n: MultiIndex,
    pub amplitude: Complex64,
    pub beta: f64,
}

/// Finite superposition of Gaussian packets in distinct oscillator states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub components: Vec<PacketComponent>,
}

impl Packet {
    pub fn new(components: Vec<PacketComponent>) -> Result<Self> {
        for (i, c) in components.iter().enumerate() {
            if !(c.beta > 0.0) {
                return Err(Error::InvalidParams(format!("packet width must be positive, got {}", c.beta)));
            }
            if components[..i].iter().any(|d| d.n == c.n) {
                return Err(Error::InvalidParams(format!("packet repeats oscillator state {}", c.n)));
            }
        }
        Ok(Packet { components })
    }

    /// (𝓕₀u)(k, n) for |k|² = k2.
    pub fn transform(&self, n: &MultiIndex, k2: f64) -> Complex64 {
        self.components
            .iter()
            .filter(|c| c.n == *n)
            .map(|c| c.amplitude * gaussian_transform(c.beta, k2))
            .sum()
    }
}

/// (2πi)^{−1}⟨u, (R₀⁺(μ) − R₀⁻(μ))u⟩ channel by channel against
/// Σ_open (|k_n|/2) ∫_{S²} |(𝓕₀u)(k_n ω̂, n)|² dω by angular quadrature.
pub fn check_free_density(mu: f64, omega: f64, packet: &Packet, angular_order: usize, tolerance: f64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut lhs = 0.0;
    for c in &packet.components {
        let nu = mu - omega * c.n.total() as f64;
        if nu <= 0.0 {
            continue;
        }
        let pairing = FreeResolventGaussian::new(BoundarySide::Plus, nu, c.beta)?.pairing();
        lhs += c.amplitude.norm_sqr() * pairing.im / PI;
    }
    let sphere = SphereRule::new(angular_order);
    let mut rhs = 0.0;
    for c in &packet.components {
        if let Some(k) = channel_momentum(mu, c.n.total(), omega) {
            let k2 = k * k;
            let integral = sphere.integrate(|u| {
                let kv = [k * u[0], k * u[1], k * u[2]];
                packet.transform(&c.n, kv.iter().map(|v| v * v).sum::<f64>()).norm_sqr()
            });
            debug_assert!(k2 > 0.0);
            rhs += 0.5 * k * integral;
        }
    }
    let discrepancy = if lhs == 0.0 && rhs == 0.0 { 0.0 } else { relative(lhs, rhs) };
    Ok(CheckReport::new(
        "free_density",
        json!({"mu": mu, "omega": omega, "packet": packet, "angular_order": angular_order}),
        discrepancy,
        "relative",
        tolerance,
        start,
    )
    .with_details(json!({"lhs": lhs, "rhs": rhs})))
}

/// Γ(−λ₂) − Γ(−λ₁) + (λ₁−λ₂)K(−λ₂) from the regularized-limit Γ and the
/// closed-form K; tolerance is `factor` times the combined error estimates.
pub fn check_ufficio(
    lambda1: f64,
    lambda2: f64,
    omega: f64,
    basis: &HermiteBasis,
    radii_count: usize,
    factor: f64,
) -> Result<CheckReport> {
    let start = Instant::now();
    let p1 = ModelParams::new(omega, lambda1, 0.0)?;
    let p2 = ModelParams::new(omega, lambda2, 0.0)?;
    let g1 = assemble_gamma_ref(basis, &p1, &GammaRefOptions::for_params(&p1, radii_count))?;
    let g2 = assemble_gamma_ref(basis, &p2, &GammaRefOptions::for_params(&p2, radii_count))?;
    let k = assemble_K(BoundarySide::NegativeReal, -lambda2, basis, &p1, &KernelOptions::default())?;
    let residual = &g2.entries - &g1.entries + &k.entries * Complex64::new(lambda1 - lambda2, 0.0);
    let norm = residual.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let combined = g1.meta.error_estimate + g2.meta.error_estimate + (lambda1 - lambda2).abs() * k.meta.error_estimate;
    let tolerance = factor * combined;
    let mut report = CheckReport::new(
        "ufficio",
        json!({"lambda1": lambda1, "lambda2": lambda2, "omega": omega, "cutoff": basis.cutoff, "radii": radii_count}),
        norm,
        "max-entry",
        tolerance,
        start,
    );
    if lambda1 == lambda2 && norm == 0.0 {
        report.status = CheckStatus::Pass;
    }
    Ok(report.with_details(json!({
        "gamma1_error": g1.meta.error_estimate,
        "gamma2_error": g2.meta.error_estimate,
        "k_error": k.meta.error_estimate,
        "c_sing": [g1.meta.c_sing, g2.meta.c_sing],
        "scale": g2.entries.iter().map(|v| v.norm()).fold(0.0, f64::max),
    })))
}

/// Controls of [`check_lap_convergence`].
#[derive(Debug, Clone, PartialEq)]
pub struct LapOptions {
    /// Decreasing imaginary parts ε_j.
    pub ladder: Vec<f64>,
    pub tolerance: f64,
    /// smin/smax of Γ⁺(μ)+α below this marks the energy as near-singular.
    pub near_singular: f64,
}

impl Default for LapOptions {
    fn default() -> Self {
        LapOptions { ladder: (0..6).map(|j| 0.05 * 0.5f64.powi(j)).collect(), tolerance: 1e-4, near_singular: 1e-3 }
    }
}

/// Polynomial extrapolation to ε = 0 (Neville) of matrix-valued samples.
fn extrapolate_to_zero(eps: &[f64], values: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let mut p: Vec<DMatrix<Complex64>> = values.to_vec();
    let m = eps.len();
    for j in 1..m {
        for i in 0..m - j {
            let num = &p[i + 1] * Complex64::new(eps[i], 0.0) - &p[i] * Complex64::new(eps[i + j], 0.0);
            p[i] = num / Complex64::new(eps[i] - eps[i + j], 0.0);
        }
    }
    p[0].clone()
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Weak-form convergence of (Γ(μ+iε)+α)^{−1} toward the boundary value
/// (Γ⁺(μ)+α)^{−1} on probe charges.
pub fn check_lap_convergence(
    mu: f64,
    problem: &ScatteringProblem,
    probes: &[ChargeVector],
    opts: &LapOptions,
) -> Result<CheckReport> {
    let start = Instant::now();
    let alpha = problem.params.alpha;
    let inputs = json!({"mu": mu, "alpha": alpha, "ladder": opts.ladder, "cutoff": problem.basis.cutoff, "probes": probes.len()});
    let boundary = problem.gamma(BoundarySide::Plus, mu)?;
    let dim = boundary.dim();
    let shifted = &boundary.entries + DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(alpha, 0.0);
    let sv = shifted.svd(false, false).singular_values;
    let ratio = sv.min() / sv.max();
    let flag_report = |start: Instant, extra: serde_json::Value| {
        let mut r = CheckReport::new("lap_convergence", inputs.clone(), f64::INFINITY, "relative", opts.tolerance, start);
        r.status = CheckStatus::Fail;
        r.with_details(extra)
    };
    if ratio < opts.near_singular {
        return Ok(flag_report(start, json!({"singular_candidate": true, "smin_ratio": ratio})));
    }

    let pair = |gamma: &KernelMatrix| -> Result<DMatrix<Complex64>> {
        let system = GammaSystem::new(gamma, alpha, f64::INFINITY)?;
        let mut out = DMatrix::from_element(probes.len(), probes.len(), Complex64::new(0.0, 0.0));
        for (j, b) in probes.iter().enumerate() {
            let x = system.solve(b)?;
            for (i, p) in probes.iter().enumerate() {
                out[(i, j)] = p.coefficients.iter().zip(&x.charge.coefficients).map(|(a, c)| a.conj() * c).sum();
            }
        }
        Ok(out)
    };
    let target = pair(&boundary)?;
    let mut samples = Vec::with_capacity(opts.ladder.len());
    for &eps in &opts.ladder {
        let k = assemble_K(BoundarySide::OffAxis(eps), mu, &problem.basis, &problem.params, &problem.kernel_opts)?;
        samples.push(pair(&gamma_from_kernel(&problem.gamma_ref, &k)?)?);
    }
    let scale = max_abs(&target).max(f64::MIN_POSITIVE);
    let raw_gaps: Vec<f64> = samples.iter().map(|s| max_abs(&(s - &target)) / scale).collect();
    let monotone = raw_gaps.windows(2).all(|w| w[1] <= w[0]);
    let extrapolated = extrapolate_to_zero(&opts.ladder, &samples);
    let gap = max_abs(&(&extrapolated - &target)) / scale;
    let mut report = CheckReport::new("lap_convergence", inputs.clone(), gap, "relative", opts.tolerance, start);
    if !monotone {
        report.status = CheckStatus::Fail;
    }
    Ok(report.with_details(json!({
        "singular_candidate": !monotone,
        "smin_ratio": ratio,
        "ladder_gaps": raw_gaps,
        "monotone": monotone,
    })))
}

/// Basis coefficients of Tr R₀(μ ± i0)u for a Gaussian packet u.
pub fn packet_trace(side: BoundarySide, mu: f64, packet: &Packet, basis: &HermiteBasis, omega: f64) -> ChargeVector {
    let mut coefficients = vec![Complex64::new(0.0, 0.0); basis.dim()];
    for c in &packet.components {
        let nu = mu - omega * c.n.total() as f64;
        let a = 0.25 + omega / (8.0 * c.beta);
        let g = Shift::for_side(side, -2.0 * nu / omega, 0.0);
        let pref = (2.0 * PI).powf(-1.5) * (2.0 * c.beta).powf(-1.5) * (0.5 * omega).powf(1.5) * (2.0 / omega);
        for (ia, b) in basis.indices.iter().enumerate() {
            let polys: Vec<Vec<Complex64>> = (0..3).map(|i| poly_conj(&form_factor_poly(b.0[i], c.n.0[i]))).collect();
            let s = separable_resolvent_integral([&polys[0], &polys[1], &polys[2]], a, g);
            coefficients[ia] += c.amplitude * pref * s;
        }
    }
    ChargeVector { cutoff: basis.cutoff, coefficients }
}

/// (2πi)^{−1}⟨u, (R⁺(μ) − R⁻(μ))u⟩ from the boundary resolvents against
/// Σ_open (|k_n|/2) ∫ |⟨Φ₊(k_n ω̂, n), u⟩|² dω by angular quadrature of
/// generalized-eigenfunction pairings.
pub fn check_volta(
    mu: f64,
    packet: &Packet,
    problem: &ScatteringProblem,
    angular_order: usize,
    tolerance: f64,
) -> Result<CheckReport> {
    let start = Instant::now();
    let omega = problem.params.omega;
    let basis = &problem.basis;
    let gamma = problem.gamma(BoundarySide::Plus, mu)?;
    let system = problem.system(&gamma)?;
    let t_plus = packet_trace(BoundarySide::Plus, mu, packet, basis, omega);
    let t_minus = packet_trace(BoundarySide::Minus, mu, packet, basis, omega);

    let mut free = 0.0;
    for c in &packet.components {
        let nu = mu - omega * c.n.total() as f64;
        if nu > 0.0 {
            free += c.amplitude.norm_sqr() * FreeResolventGaussian::new(BoundarySide::Plus, nu, c.beta)?.pairing().im / PI;
        }
    }
    let x = system.solve(&t_plus)?;
    let coupled: Complex64 = t_minus.coefficients.iter().zip(&x.charge.coefficients).map(|(a, b)| a.conj() * b).sum();
    let lhs = free + coupled.im / PI;

    let sphere = SphereRule::new(angular_order);
    let n0 = crate::greens::ChannelSplit::new(mu, omega).n0();
    let mut rhs = 0.0;
    for n in (0..=n0).flat_map(|nn| crate::oscillator::enumerate_shell(nn as usize)) {
        let Some(k) = channel_momentum(mu, n.total(), omega) else { continue };
        let mut integral = 0.0;
        for (u, w) in sphere.unit_vectors() {
            let channel = crate::oscillator::Channel::new([k * u[0], k * u[1], k * u[2]], n);
            let b = trace_source_projection(&channel, basis, &problem.params);
            let xi = system.solve(&b)?;
            let pairing: Complex64 = packet.transform(&n, k * k)
                + xi.charge.coefficients.iter().zip(&t_minus.coefficients).map(|(a, t)| a.conj() * t).sum::<Complex64>();
            integral += w * pairing.norm_sqr();
        }
        rhs += 0.5 * k * integral;
    }
    let discrepancy = if lhs == 0.0 && rhs == 0.0 { 0.0 } else { relative(lhs, rhs) };
    Ok(CheckReport::new(
        "volta",
        json!({"mu": mu, "alpha": problem.params.alpha, "packet": packet, "angular_order": angular_order, "cutoff": basis.cutoff}),
        discrepancy,
        "relative",
        tolerance,
        start,
    )
    .with_details(json!({"lhs": lhs, "rhs": rhs, "free_part": free})))
}
