//! Charge equation, generalized eigenfunctions, amplitudes and the Born
//! cross sections.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charge_kernel::{
    assemble_K, gamma_from_kernel, ChargeVector, GammaSolution, GammaSystem, KernelMatrix, KernelOptions, MAX_CONDITION,
};
use crate::error::{Error, Result};
use crate::greens::{potential_apply, trace_plane_source, BoundarySide, PotentialOptions};
use crate::oscillator::{enumerate_shell, form_factor, Channel, HermiteBasis, ModelParams, MultiIndex};
use crate::quadrature::SphereRule;

/// Relative tolerance of the on-shell test |E_out − E_in| ≤ tol·max(1, E).
pub const ON_SHELL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeOrder {
    Born,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub value: Complex64,
    pub out_channel: Channel,
    pub in_channel: Channel,
    pub energy: f64,
    pub order: AmplitudeOrder,
}

/// a = 1/(8πα).
pub fn scattering_length_from_alpha(alpha: f64) -> Result<f64> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::ZeroInput);
    }
    Ok(1.0 / (8.0 * PI * alpha))
}

/// α = 1/(8πa).
pub fn alpha_from_scattering_length(a: f64) -> Result<f64> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::ZeroInput);
    }
    Ok(1.0 / (8.0 * PI * a))
}

/// Common energy of two channels, or an error when off shell or when the
/// outgoing channel is closed.
pub fn on_shell_energy(out: &Channel, inp: &Channel, omega: f64) -> Result<f64> {
    let e_out = out.energy(omega);
    let e_in = inp.energy(omega);
    if (e_out - e_in).abs() > ON_SHELL_TOL * e_in.abs().max(1.0) {
        return Err(Error::OffShell(e_out, e_in));
    }
    let threshold = omega * out.n.total() as f64;
    if e_in <= threshold || out.momentum() == 0.0 {
        return Err(Error::ClosedChannel { energy: e_in, threshold });
    }
    Ok(e_in)
}

/// Born amplitude f = ∫ e^{−i(k−k')·x} φ_n φ_{n'} dx / (4πα) for out = (k, n), in = (k', n').
pub fn t_born(out: &Channel, inp: &Channel, params: &ModelParams) -> Result<Amplitude> {
    let energy = on_shell_energy(out, inp, params.omega)?;
    if params.alpha == 0.0 {
        return Err(Error::ZeroInput);
    }
    let q = [out.k[0] - inp.k[0], out.k[1] - inp.k[1], out.k[2] - inp.k[2]];
    let value = form_factor(&out.n, &inp.n, q, params) / (4.0 * PI * params.alpha);
    Ok(Amplitude { value, out_channel: *out, in_channel: *inp, energy, order: AmplitudeOrder::Born })
}

/// Basis coefficients of Tr Φ₀(k, n): (2π)^{−3/2} ∫ φ_a(y) e^{ik·y} φ_n(y) dy.
pub fn trace_source_projection(channel: &Channel, basis: &HermiteBasis, params: &ModelParams) -> ChargeVector {
    let norm = (2.0 * PI).powf(-1.5);
    let coefficients = basis
        .indices
        .iter()
        .map(|a| form_factor(a, &channel.n, channel.k, params).conj() * norm)
        .collect();
    ChargeVector { cutoff: basis.cutoff, coefficients }
}

/// Φ₀(k, n, x, y) = (2π)^{−3/2} e^{ik·x} φ_n(y).
pub fn free_eigenfunction(channel: &Channel, x: [f64; 3], y: [f64; 3], params: &ModelParams) -> Complex64 {
    let at_y = trace_plane_source(&Channel::new(channel.k, channel.n), y, params);
    // trace_plane_source carries e^{ik·y}; move the phase to x
    let shift: f64 = (0..3).map(|i| channel.k[i] * (x[i] - y[i])).sum();
    at_y * Complex64::from_polar(1.0, shift)
}

/// Basis, parameters and the reference Γ(−λ) shared by all scattering solves.
#[derive(Debug, Clone)]
pub struct ScatteringProblem {
    pub params: ModelParams,
    pub basis: HermiteBasis,
    pub gamma_ref: KernelMatrix,
    pub kernel_opts: KernelOptions,
    pub max_condition: f64,
}

impl ScatteringProblem {
    pub fn new(params: ModelParams, basis: HermiteBasis, gamma_ref: KernelMatrix) -> Result<Self> {
        if gamma_ref.meta.cutoff != basis.cutoff || gamma_ref.meta.lambda != params.lambda {
            return Err(Error::BasisMismatch("reference Γ does not match basis or λ".into()));
        }
        Ok(ScatteringProblem { params, basis, gamma_ref, kernel_opts: KernelOptions::default(), max_condition: MAX_CONDITION })
    }

    /// Γ^±(E) at the requested side.
    pub fn gamma(&self, side: BoundarySide, energy: f64) -> Result<KernelMatrix> {
        let k = assemble_K(side, energy, &self.basis, &self.params, &self.kernel_opts)?;
        gamma_from_kernel(&self.gamma_ref, &k)
    }

    pub fn system(&self, gamma: &KernelMatrix) -> Result<GammaSystem> {
        GammaSystem::new(gamma, self.params.alpha, self.max_condition)
    }

    /// ξ_± solving (Γ^±(E) + α)ξ = Tr Φ₀(k, n), E = |k|² + ω|n|.
    pub fn solve_charge(&self, channel: &Channel, side: BoundarySide) -> Result<GammaSolution> {
        let energy = channel.energy(self.params.omega);
        let gamma = self.gamma(side, energy)?;
        self.solve_charge_with(channel, &gamma)
    }

    /// As [`Self::solve_charge`] with Γ^± already assembled at the channel energy.
    pub fn solve_charge_with(&self, channel: &Channel, gamma: &KernelMatrix) -> Result<GammaSolution> {
        let b = trace_source_projection(channel, &self.basis, &self.params);
        self.system(gamma)?.solve(&b)
    }

    /// Φ_±(k, n, x, y) = Φ₀ + 𝒢^±(E)ξ_±.
    pub fn eigenfunction_eval(
        &self,
        channel: &Channel,
        side: BoundarySide,
        charge: &ChargeVector,
        x: [f64; 3],
        y: [f64; 3],
        opts: &PotentialOptions,
    ) -> Result<Complex64> {
        let energy = channel.energy(self.params.omega);
        let pot = potential_apply(side, energy, charge, &self.basis, x, y, &self.params, opts)?;
        Ok(free_eigenfunction(channel, x, y, &self.params) + pot.value)
    }

    /// f = 2π²⟨Tr Φ₀(out), (Γ⁺(E)+α)^{−1} Tr Φ₀(in)⟩, with the leading 1/α
    /// term taken in closed form.
    pub fn amplitude_general(&self, out: &Channel, inp: &Channel) -> Result<Amplitude> {
        let energy = on_shell_energy(out, inp, self.params.omega)?;
        let gamma = self.gamma(BoundarySide::Plus, energy)?;
        self.amplitude_general_with(out, inp, &gamma)
    }

    pub fn amplitude_general_with(&self, out: &Channel, inp: &Channel, gamma_plus: &KernelMatrix) -> Result<Amplitude> {
        let energy = on_shell_energy(out, inp, self.params.omega)?;
        let alpha = self.params.alpha;
        if alpha == 0.0 {
            return Err(Error::ZeroInput);
        }
        let system = self.system(gamma_plus)?;
        let b_out = trace_source_projection(out, &self.basis, &self.params);
        let b_in = trace_source_projection(inp, &self.basis, &self.params);
        let gb = &gamma_plus.entries * b_in.to_dvector();
        let y = system.solve(&ChargeVector { cutoff: self.basis.cutoff, coefficients: gb.iter().cloned().collect() })?;
        let correction: Complex64 = b_out
            .coefficients
            .iter()
            .zip(&y.charge.coefficients)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let q = [out.k[0] - inp.k[0], out.k[1] - inp.k[1], out.k[2] - inp.k[2]];
        let overlap = form_factor(&out.n, &inp.n, q, &self.params) * (2.0 * PI).powi(-3);
        let value = 2.0 * PI * PI * (overlap - correction) / alpha;
        Ok(Amplitude { value, out_channel: *out, in_channel: *inp, energy, order: AmplitudeOrder::General })
    }
}

/// Which Born cross section to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum XsecKind {
    /// Ground state to ground state.
    Elastic,
    /// Ground state to the whole shell |n| = N.
    Shell { n: usize },
    /// n_in → n_out.
    State { n_in: MultiIndex, n_out: MultiIndex },
    /// Ground state to every open shell at a fixed scattering angle θ.
    Spectrum { theta: f64 },
}

/// Kinematics of a Born table: total energy E and the scattering length a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub energy: f64,
    pub scattering_length: f64,
    pub angular_order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XsecRow {
    pub theta: f64,
    pub phi: f64,
    pub shell: Option<usize>,
    pub weight: f64,
    pub dsigma_domega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionTable {
    pub kind: XsecKind,
    pub formula: String,
    pub kinematics: Kinematics,
    pub omega: f64,
    pub rows: Vec<XsecRow>,
    /// Angular integral of the rows (sum of the shell values for spectra).
    pub sigma_total: f64,
}

/// Shell form (4a²/N!)(|k|/|k'|)(q²/ω)^N e^{−q²/ω}.
pub fn shell_cross_section(n: usize, k_out: f64, k_in: f64, q2: f64, a: f64, omega: f64) -> f64 {
    let x = q2 / omega;
    let log_fact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
    let power = if n == 0 { 1.0 } else { (n as f64 * x.ln() - log_fact).exp() };
    4.0 * a * a * (k_out / k_in) * power * (-x).exp()
}

/// State form 4a²(|k|/|k'|) Π_i (q_i²/ω)^{m_i}/m_i! e^{−q²/ω} for excitation from the ground state.
pub fn state_cross_section_from_ground(m: &MultiIndex, q: [f64; 3], k_out: f64, k_in: f64, a: f64, omega: f64) -> f64 {
    let mut prod = 1.0;
    for i in 0..3 {
        let x = q[i] * q[i] / omega;
        let mut term = 1.0;
        for j in 1..=m.0[i] {
            term *= x / j as f64;
        }
        prod *= term;
    }
    let q2: f64 = q.iter().map(|v| v * v).sum();
    4.0 * a * a * (k_out / k_in) * prod * (-q2 / omega).exp()
}

/// σ₀ = 4πa²(ω/E)(1 − e^{−4E/ω}).
pub fn sigma_total_elastic(energy: f64, a: f64, omega: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::ClosedChannel { energy, threshold: 0.0 });
    }
    Ok(4.0 * PI * a * a * (omega / energy) * -(-4.0 * energy / omega).exp_m1())
}

fn momentum_transfer(k_out: f64, dir: [f64; 3], k_in: f64) -> [f64; 3] {
    [k_out * dir[0], k_out * dir[1], k_out * dir[2] - k_in]
}

/// Born cross-section table; the incoming neutron moves along +z.
pub fn xsec_born(kind: XsecKind, kin: Kinematics, omega: f64) -> Result<CrossSectionTable> {
    let a = kin.scattering_length;
    let e = kin.energy;
    let (n_in_total, formula) = match kind {
        XsecKind::Elastic => (0, "elastic"),
        XsecKind::Shell { .. } => (0, "shell"),
        XsecKind::State { n_in, .. } => (n_in.total(), "state"),
        XsecKind::Spectrum { .. } => (0, "shell-spectrum"),
    };
    let k_in_sq = e - omega * n_in_total as f64;
    if !(k_in_sq > 0.0) {
        return Err(Error::ClosedChannel { energy: e, threshold: omega * n_in_total as f64 });
    }
    let k_in = k_in_sq.sqrt();
    let out_momentum = |n: usize| -> Result<f64> {
        let v = e - omega * n as f64;
        if v > 0.0 {
            Ok(v.sqrt())
        } else {
            Err(Error::ClosedChannel { energy: e, threshold: omega * n as f64 })
        }
    };
    let sphere = SphereRule::new(kin.angular_order);
    let mut rows = Vec::new();
    match kind {
        XsecKind::Elastic | XsecKind::Shell { .. } => {
            let n = if let XsecKind::Shell { n } = kind { n } else { 0 };
            let k_out = out_momentum(n)?;
            let members = enumerate_shell(n);
            for &(theta, phi, w) in &sphere.points {
                let q = momentum_transfer(k_out, crate::quadrature::direction(theta, phi), k_in);
                let q2: f64 = q.iter().map(|v| v * v).sum();
                let closed = shell_cross_section(n, k_out, k_in, q2, a, omega);
                if n > 0 {
                    let summed: f64 = members
                        .iter()
                        .map(|m| state_cross_section_from_ground(m, q, k_out, k_in, a, omega))
                        .sum();
                    if (summed - closed).abs() > 1e-10 * closed.abs().max(f64::MIN_POSITIVE) {
                        return Err(Error::InvalidParams(format!(
                            "shell sum {summed:e} disagrees with closed form {closed:e}"
                        )));
                    }
                }
                rows.push(XsecRow { theta, phi, shell: Some(n), weight: w, dsigma_domega: closed });
            }
        }
        XsecKind::State { n_in, n_out } => {
            let k_out = out_momentum(n_out.total())?;
            let params = ModelParams::new(omega, 1.0, 1.0)?;
            for &(theta, phi, w) in &sphere.points {
                let q = momentum_transfer(k_out, crate::quadrature::direction(theta, phi), k_in);
                let f = form_factor(&n_out, &n_in, q, &params);
                rows.push(XsecRow {
                    theta,
                    phi,
                    shell: Some(n_out.total()),
                    weight: w,
                    dsigma_domega: 4.0 * a * a * (k_out / k_in) * f.norm_sqr(),
                });
            }
        }
        XsecKind::Spectrum { theta } => {
            let mut n = 0;
            while let Ok(k_out) = out_momentum(n) {
                let q = momentum_transfer(k_out, crate::quadrature::direction(theta, 0.0), k_in);
                let q2: f64 = q.iter().map(|v| v * v).sum();
                rows.push(XsecRow {
                    theta,
                    phi: 0.0,
                    shell: Some(n),
                    weight: 1.0,
                    dsigma_domega: shell_cross_section(n, k_out, k_in, q2, a, omega),
                });
                n += 1;
            }
        }
    }
    let sigma_total = rows.iter().map(|r| r.weight * r.dsigma_domega).sum();
    Ok(CrossSectionTable { kind, formula: formula.into(), kinematics: kin, omega, rows, sigma_total })
}

/// Gram-type pairing Σ conj(u_a) M_ab v_b.
pub fn bilinear(u: &ChargeVector, m: &DMatrix<Complex64>, v: &ChargeVector) -> Complex64 {
    let mv = m * v.to_dvector();
    u.coefficients.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum()
}
