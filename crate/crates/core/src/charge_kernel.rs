//! Boundary operators on the coincidence hyperplane in the oscillator basis:
//! the kernel K(z), the reference operator Γ(−λ), boundary values
//! Γ^±(μ) = Γ(−λ) − (λ+μ)K^±(μ), linear solves with Γ + α and the scan for
//! near-singular energies.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{check_threshold, product_integral_complex, wave_number, BoundarySide, ChannelSplit, THRESHOLD_WINDOW};
use crate::heat::{self, HighPart, TimeRule};
use crate::momentum::mode_kernel_matrix;
use crate::oscillator::{eigenfunction_value, hermite_function_polys, HermiteBasis, ModelParams};
use crate::quadrature::gauss_hermite;

/// Expansion coefficients of a charge in the basis order of a [`HermiteBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeVector {
    pub cutoff: usize,
    pub coefficients: Vec<Complex64>,
}

impl ChargeVector {
    pub fn new(basis: &HermiteBasis, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} coefficients for a basis of dimension {}",
                coefficients.len(),
                basis.dim()
            )));
        }
        Ok(ChargeVector { cutoff: basis.cutoff, coefficients })
    }

    pub fn zeros(basis: &HermiteBasis) -> Self {
        ChargeVector { cutoff: basis.cutoff, coefficients: vec![Complex64::new(0.0, 0.0); basis.dim()] }
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn conj(&self) -> Self {
        ChargeVector { cutoff: self.cutoff, coefficients: self.coefficients.iter().map(|c| c.conj()).collect() }
    }

    pub fn to_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.coefficients)
    }
}

/// What a [`KernelMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContentTag {
    K,
    GammaRef,
    GammaBoundary,
}

impl ContentTag {
    pub fn code(self) -> u32 {
        match self {
            ContentTag::K => 1,
            ContentTag::GammaRef => 2,
            ContentTag::GammaBoundary => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(ContentTag::K),
            2 => Some(ContentTag::GammaRef),
            3 => Some(ContentTag::GammaBoundary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub tag: ContentTag,
    /// μ for K and Γ^±, −λ for Γ(−λ).
    pub energy: f64,
    pub side: BoundarySide,
    pub lambda: f64,
    pub omega: f64,
    pub cutoff: usize,
    pub quad_order: usize,
    pub tail_bound: f64,
    /// Estimated absolute entry error (quadrature or extrapolation).
    pub error_estimate: f64,
    /// Measured coefficient of the 1/r blow-up, for Γ(−λ).
    pub c_sing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub entries: DMatrix<Complex64>,
    pub meta: KernelMeta,
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn spectral_point(&self) -> Complex64 {
        self.meta.side.spectral_point(self.meta.energy)
    }

    fn check_basis(&self, basis: &HermiteBasis) -> Result<()> {
        if self.meta.cutoff != basis.cutoff || self.dim() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "matrix built at cutoff {} (dim {}), basis has cutoff {} (dim {})",
                self.meta.cutoff,
                self.dim(),
                basis.cutoff,
                basis.dim()
            )));
        }
        Ok(())
    }
}

/// Numerical controls for kernel evaluation and assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    pub tail_tol: f64,
    pub quad_tol: f64,
    pub threshold_window: f64,
    pub time_rule: TimeRule,
    pub panel_order: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            tail_tol: 1e-8,
            quad_tol: 1e-6,
            threshold_window: THRESHOLD_WINDOW,
            time_rule: TimeRule::DEFAULT,
            panel_order: 12,
        }
    }
}

fn low_shell_count(side: BoundarySide, mu: f64, omega: f64, window: f64) -> Result<i64> {
    match side {
        BoundarySide::Plus | BoundarySide::Minus => {
            check_threshold(mu, omega, window)?;
            Ok(ChannelSplit::new(mu, omega).n0())
        }
        BoundarySide::NegativeReal => {
            if mu >= 0.0 {
                return Err(Error::InvalidParams(format!("negative-real side needs a negative energy, got {mu}")));
            }
            Ok(-1)
        }
        BoundarySide::OffAxis(eps) => {
            if eps == 0.0 {
                return Err(Error::InvalidParams("off-axis side needs a nonzero imaginary part".into()));
            }
            Ok(ChannelSplit::new(mu, omega).n0())
        }
    }
}

/// Value and truncation bound of a pointwise kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    /// Contribution of the open shells |n| ≤ n0 alone.
    pub low_part: Complex64,
    pub tail_bound: f64,
}

/// Pointwise K^±(μ)(y', y'') for y' ≠ y''. Open shells use the closed
/// two-center form; the remaining shells use the heat-kernel representation.
#[allow(non_snake_case)]
pub fn kernel_K_value(
    side: BoundarySide,
    mu: f64,
    y1: [f64; 3],
    y2: [f64; 3],
    params: &ModelParams,
    opts: &KernelOptions,
) -> Result<KernelValue> {
    let d = (0..3).map(|i| (y1[i] - y2[i]).powi(2)).sum::<f64>().sqrt();
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let n0 = low_shell_count(side, mu, params.omega, opts.threshold_window)?;
    let (omega, lambda) = (params.omega, params.lambda);
    let mut low = Complex64::new(0.0, 0.0);
    for n in (0..=n0).flat_map(|nn| crate::oscillator::enumerate_shell(nn as usize)) {
        let nu = mu - omega * n.total() as f64;
        let a = wave_number(side, nu);
        let b = (lambda + omega * n.total() as f64).sqrt();
        let pair = product_integral_complex(a, b, d) / (16.0 * PI * PI);
        low += pair * eigenfunction_value(&n, y1, params) * eigenfunction_value(&n, y2, params);
    }
    let z = side.spectral_point(mu);
    let hp = HighPart { n0, z, lambda, omega };
    let (high, tail) = heat::high_kernel_point(hp, y1, y2, opts.panel_order);
    let value = low + high;
    if !(tail <= opts.tail_tol * value.norm().max(f64::MIN_POSITIVE)) {
        return Err(Error::TailNotConverged { bound: tail, tol: opts.tail_tol });
    }
    Ok(KernelValue { value, low_part: low, tail_bound: tail })
}

/// ⟨φ_a, K(z) φ_b⟩ over the basis: open shells in closed form in momentum
/// space, remaining shells from the heat-kernel time integral, checked at
/// two time-quadrature orders.
#[allow(non_snake_case)]
pub fn assemble_K(
    side: BoundarySide,
    mu: f64,
    basis: &HermiteBasis,
    params: &ModelParams,
    opts: &KernelOptions,
) -> Result<KernelMatrix> {
    let n0 = low_shell_count(side, mu, params.omega, opts.threshold_window)?;
    let (omega, lambda) = (params.omega, params.lambda);
    let low_modes: Vec<_> = (0..=n0).flat_map(|nn| crate::oscillator::enumerate_shell(nn as usize)).collect();
    let low_parts: Vec<DMatrix<Complex64>> = low_modes
        .par_iter()
        .map(|n| mode_kernel_matrix(basis, n, side, mu, lambda, omega))
        .collect();
    let dim = basis.dim();
    let mut entries = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for part in &low_parts {
        entries += part;
    }

    let hp = HighPart { n0, z: side.spectral_point(mu), lambda, omega };
    let (coarse, tail_coarse) = heat::high_kernel_matrix(basis, hp, opts.time_rule);
    let (fine, tail_fine) = heat::high_kernel_matrix(basis, hp, opts.time_rule.refined());
    let diff = (&fine - &coarse).iter().map(|v| v.norm()).fold(0.0, f64::max);
    entries += &fine;
    let scale = entries.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if !(diff <= opts.quad_tol * scale) {
        return Err(Error::Quadrature { diff: diff / scale, tol: opts.quad_tol });
    }
    let tail = tail_coarse.max(tail_fine);
    if !(tail <= opts.tail_tol * scale) {
        return Err(Error::TailNotConverged { bound: tail / scale, tol: opts.tail_tol });
    }
    Ok(KernelMatrix {
        entries,
        meta: KernelMeta {
            tag: ContentTag::K,
            energy: mu,
            side,
            lambda,
            omega,
            cutoff: basis.cutoff,
            quad_order: opts.time_rule.refined().short_order,
            tail_bound: tail,
            error_estimate: diff,
            c_sing: None,
        },
    })
}

/// Controls for the regularized diagonal limit defining Γ(−λ).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRefOptions {
    /// Distances r at which the shifted potential is sampled, decreasing.
    pub radii: Vec<f64>,
    /// Trapezoid step in ln τ.
    pub log_step: f64,
    /// Relative tolerance on the spread between the two extrapolations.
    pub extrap_tol: f64,
}

impl GammaRefOptions {
    /// Radii r_max·2^{−j}, j = 0..count, with r_max = 0.5/√(λ+ω).
    pub fn for_params(params: &ModelParams, count: usize) -> Self {
        let r_max = 0.5 / (params.lambda + params.omega).sqrt();
        GammaRefOptions {
            radii: (0..count).map(|j| r_max * 0.5f64.powi(j as i32)).collect(),
            log_step: 0.1,
            extrap_tol: 1e-6,
        }
    }
}

/// One-axis ∫∫ φ_j(u) φ_k(v) h_τ(u + r − v) M_τ(u, v) du dv at s = ωτ and
/// scaled shift σ = √(ω/2)·r, row-major (cutoff+1)².
fn shifted_axis_overlap(cutoff: usize, s: f64, omega: f64, sigma: f64) -> Vec<f64> {
    let n = cutoff + 1;
    // quadratic form α(x² + y²) + 2βxy diagonalized along (x ± y)/√2
    let t = (0.5 * s).tanh();
    let even = 0.5 * (1.0 + t);
    let odd = 0.5 * (1.0 + 1.0 / t) + 1.0 / s;
    let offset = -sigma / (2f64.sqrt() * s * odd);
    let shift_factor = (-sigma * sigma / (2.0 * s) * (1.0 - 1.0 / (s * odd))).exp();
    let pref = omega.sqrt() / (2.0 * PI) / (s * -(-2.0 * s).exp_m1()).sqrt() / (even * odd).sqrt() * shift_factor;
    let rule = gauss_hermite(n);
    let mut out = vec![0.0; n * n];
    for (t1, w1) in rule.iter() {
        let eta = t1 / even.sqrt();
        for (t2, w2) in rule.iter() {
            let delta = offset + t2 / odd.sqrt();
            let px = hermite_function_polys(cutoff, (eta + delta) / 2f64.sqrt());
            let py = hermite_function_polys(cutoff, (eta - delta) / 2f64.sqrt());
            let w = w1 * w2 * pref;
            for j in 0..n {
                for k in 0..n {
                    out[j * n + k] += w * px[j] * py[k];
                }
            }
        }
    }
    // averaging over ±r removes the odd-parity part
    for j in 0..n {
        for k in 0..n {
            if (j + k) % 2 == 1 {
                out[j * n + k] = 0.0;
            }
        }
    }
    out
}

/// Direction-averaged I_ab(r) = ⟨φ_a, (𝒢(−λ)φ_b)(· + r e, ·)⟩ for each radius,
/// by the trapezoid rule in ln τ with step `h` (using every `stride`-th node).
fn shifted_pairings(basis: &HermiteBasis, params: &ModelParams, radii: &[f64], h: f64, stride: usize) -> Vec<DMatrix<f64>> {
    let (omega, lambda) = (params.omega, params.lambda);
    let cutoff = basis.cutoff;
    let n = cutoff + 1;
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let tau_lo = r_min * r_min / 200.0;
    let tau_hi = 45.0 / lambda;
    let t_lo = tau_lo.ln();
    let count = ((tau_hi.ln() - t_lo) / h).ceil() as usize;
    let nodes: Vec<f64> = (0..=count).step_by(stride).map(|k| t_lo + k as f64 * h).collect();
    let step = h * stride as f64;

    radii
        .par_iter()
        .map(|&r| {
            let sigma = (0.5 * omega).sqrt() * r;
            let mut acc = DMatrix::<f64>::zeros(basis.dim(), basis.dim());
            for &t in &nodes {
                let tau = t.exp();
                let s = omega * tau;
                let w = step * tau * (-lambda * tau).exp();
                let plain = shifted_axis_overlap(cutoff, s, omega, 0.0);
                let shifted = shifted_axis_overlap(cutoff, s, omega, sigma);
                for (ia, a) in basis.indices.iter().enumerate() {
                    for (ib, b) in basis.indices.iter().enumerate() {
                        let idx = [a.0[0] * n + b.0[0], a.0[1] * n + b.0[1], a.0[2] * n + b.0[2]];
                        if idx.iter().any(|&i| plain[i] == 0.0 && shifted[i] == 0.0) {
                            continue;
                        }
                        let mut avg = 0.0;
                        for dir in 0..3 {
                            let mut term = 1.0;
                            for i in 0..3 {
                                term *= if i == dir { shifted[idx[i]] } else { plain[idx[i]] };
                            }
                            avg += term;
                        }
                        acc[(ia, ib)] += w * avg / 3.0;
                    }
                }
            }
            acc
        })
        .collect()
}

/// Coefficients c_0, c_1 of the polynomial interpolating (r_j, v_j).
fn interpolate_low_coefficients(r: &[f64], v: &[f64]) -> (f64, f64) {
    // Newton divided differences, then expand around 0
    let m = r.len();
    let mut coef = v.to_vec();
    for j in 1..m {
        for i in (j..m).rev() {
            coef[i] = (coef[i] - coef[i - 1]) / (r[i] - r[i - j]);
        }
    }
    // p(x) = coef[m-1]; p = p·(x − r_i) + coef[i], tracking value and slope at 0
    let mut c0 = coef[m - 1];
    let mut c1 = 0.0;
    for i in (0..m - 1).rev() {
        c1 = c1 * (-r[i]) + c0;
        c0 = c0 * (-r[i]) + coef[i];
    }
    (c0, c1)
}

/// Γ(−λ) by the regularized diagonal limit of 𝒢(−λ): r·I_ab(r) is
/// interpolated in r; Γ_ab is minus the slope at r = 0 and the intercept on
/// the diagonal measures the coefficient of the 1/r blow-up.
pub fn assemble_gamma_ref(basis: &HermiteBasis, params: &ModelParams, opts: &GammaRefOptions) -> Result<KernelMatrix> {
    if opts.radii.len() < 3 {
        return Err(Error::InvalidParams("at least three radii are needed for the extrapolation".into()));
    }
    if opts.radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParams("radii must be positive".into()));
    }
    let fine = shifted_pairings(basis, params, &opts.radii, opts.log_step, 1);
    let coarse = shifted_pairings(basis, params, &opts.radii, opts.log_step, 2);
    let dim = basis.dim();
    let m = opts.radii.len();
    let mut gamma = DMatrix::<f64>::zeros(dim, dim);
    let mut spread = DMatrix::<f64>::zeros(dim, dim);
    let mut c_sing = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let v: Vec<f64> = (0..m).map(|j| opts.radii[j] * fine[j][(a, b)]).collect();
            let vc: Vec<f64> = (0..m).map(|j| opts.radii[j] * coarse[j][(a, b)]).collect();
            let (c0, c1) = interpolate_low_coefficients(&opts.radii, &v);
            let (_, c1_reduced) = interpolate_low_coefficients(&opts.radii[1..], &v[1..]);
            let (_, c1_coarse) = interpolate_low_coefficients(&opts.radii, &vc);
            gamma[(a, b)] = -c1;
            spread[(a, b)] = (c1 - c1_reduced).abs() + (c1 - c1_coarse).abs();
            if a == b {
                c_sing += c0 / dim as f64;
            }
        }
    }
    let scale = gamma.iter().map(|v| v.abs()).fold(1.0, f64::max);
    for a in 0..dim {
        for b in 0..dim {
            if spread[(a, b)] > opts.extrap_tol * scale {
                return Err(Error::Extrapolation { element: b, spread: spread[(a, b)], tol: opts.extrap_tol * scale });
            }
        }
    }
    let error_estimate = spread.iter().cloned().fold(0.0, f64::max);
    Ok(KernelMatrix {
        entries: gamma.map(|v| Complex64::new(v, 0.0)),
        meta: KernelMeta {
            tag: ContentTag::GammaRef,
            energy: -params.lambda,
            side: BoundarySide::NegativeReal,
            lambda: params.lambda,
            omega: params.omega,
            cutoff: basis.cutoff,
            quad_order: basis.quad_order,
            tail_bound: 0.0,
            error_estimate,
            c_sing: Some(c_sing),
        },
    })
}

/// Γ(z) = Γ(−λ) − (λ+z)K(z) from an assembled K at the same λ.
pub fn gamma_from_kernel(gamma_ref: &KernelMatrix, k: &KernelMatrix) -> Result<KernelMatrix> {
    if gamma_ref.meta.tag != ContentTag::GammaRef || k.meta.tag != ContentTag::K {
        return Err(Error::BasisMismatch("expected a reference Γ and a K matrix".into()));
    }
    if gamma_ref.meta.cutoff != k.meta.cutoff || gamma_ref.dim() != k.dim() {
        return Err(Error::BasisMismatch(format!(
            "reference Γ at cutoff {}, K at cutoff {}",
            gamma_ref.meta.cutoff, k.meta.cutoff
        )));
    }
    if gamma_ref.meta.lambda != k.meta.lambda || gamma_ref.meta.omega != k.meta.omega {
        return Err(Error::BasisMismatch("reference Γ and K were built with different (λ, ω)".into()));
    }
    let z = k.spectral_point();
    let entries = &gamma_ref.entries - &k.entries * (z + k.meta.lambda);
    Ok(KernelMatrix {
        entries,
        meta: KernelMeta {
            tag: ContentTag::GammaBoundary,
            energy: k.meta.energy,
            side: k.meta.side,
            lambda: k.meta.lambda,
            omega: k.meta.omega,
            cutoff: k.meta.cutoff,
            quad_order: k.meta.quad_order,
            tail_bound: k.meta.tail_bound,
            error_estimate: gamma_ref.meta.error_estimate + (z + k.meta.lambda).norm() * k.meta.error_estimate,
            c_sing: gamma_ref.meta.c_sing,
        },
    })
}

/// Γ^±(μ) = Γ(−λ) − (λ+μ)K^±(μ).
pub fn gamma_boundary(
    side: BoundarySide,
    mu: f64,
    basis: &HermiteBasis,
    params: &ModelParams,
    gamma_ref: &KernelMatrix,
    opts: &KernelOptions,
) -> Result<KernelMatrix> {
    gamma_ref.check_basis(basis)?;
    if gamma_ref.meta.lambda != params.lambda {
        return Err(Error::BasisMismatch(format!(
            "reference Γ built at λ = {}, parameters carry λ = {}",
            gamma_ref.meta.lambda, params.lambda
        )));
    }
    let k = assemble_K(side, mu, basis, params, opts)?;
    gamma_from_kernel(gamma_ref, &k)
}

/// Default bound on the condition number of Γ + α.
pub const MAX_CONDITION: f64 = 1e8;

/// Factorized Γ + α with its singular-value diagnostics.
#[derive(Debug, Clone)]
pub struct GammaSystem {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<Complex64>,
    pub cutoff: usize,
    pub energy: f64,
    pub smin: f64,
    pub smax: f64,
}

/// Solution of (Γ + α)x = b with its residual.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSolution {
    pub charge: ChargeVector,
    pub residual: f64,
    pub condition: f64,
}

impl GammaSystem {
    pub fn new(gamma: &KernelMatrix, alpha: f64, max_condition: f64) -> Result<Self> {
        let dim = gamma.dim();
        let matrix = &gamma.entries + DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(alpha, 0.0);
        let sv = matrix.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= max_condition) {
            return Err(Error::Singular { mu: gamma.meta.energy, smin, cond });
        }
        Ok(GammaSystem { lu: matrix.clone().lu(), matrix, cutoff: gamma.meta.cutoff, energy: gamma.meta.energy, smin, smax })
    }

    pub fn condition(&self) -> f64 {
        self.smax / self.smin
    }

    pub fn solve(&self, b: &ChargeVector) -> Result<GammaSolution> {
        if b.cutoff != self.cutoff || b.coefficients.len() != self.matrix.nrows() {
            return Err(Error::BasisMismatch(format!(
                "right-hand side at cutoff {}, system at cutoff {}",
                b.cutoff, self.cutoff
            )));
        }
        let rhs = b.to_dvector();
        let x = self
            .lu
            .solve(&rhs)
            .ok_or(Error::Singular { mu: self.energy, smin: self.smin, cond: f64::INFINITY })?;
        let residual = (&self.matrix * &x - &rhs).norm();
        Ok(GammaSolution {
            charge: ChargeVector { cutoff: self.cutoff, coefficients: x.iter().cloned().collect() },
            residual,
            condition: self.condition(),
        })
    }
}

/// Solves (Γ + α)x = b, rejecting near-singular systems.
pub fn solve_gamma_system(gamma: &KernelMatrix, alpha: f64, b: &ChargeVector) -> Result<GammaSolution> {
    GammaSystem::new(gamma, alpha, MAX_CONDITION)?.solve(b)
}

/// One row of a singular-set scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub mu: f64,
    pub smin: f64,
    pub smax: f64,
    pub flagged: bool,
}

/// Controls of [`scan_singular_set`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Local minima with smin/smax below this are flagged.
    pub relative_floor: f64,
    pub kernel: KernelOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { relative_floor: 1.0 / MAX_CONDITION, kernel: KernelOptions::default() }
    }
}

/// Smallest singular value of Γ⁺(μ) + α along a grid; grid points inside
/// threshold windows are skipped.
pub fn scan_singular_set(
    mu_grid: &[f64],
    alpha: f64,
    basis: &HermiteBasis,
    params: &ModelParams,
    gamma_ref: &KernelMatrix,
    opts: &ScanOptions,
) -> Result<Vec<ScanPoint>> {
    let mut rows = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        if check_threshold(mu, params.omega, opts.kernel.threshold_window).is_err() {
            continue;
        }
        let gamma = gamma_boundary(BoundarySide::Plus, mu, basis, params, gamma_ref, &opts.kernel)?;
        let dim = gamma.dim();
        let a = &gamma.entries + DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(alpha, 0.0);
        let sv = a.svd(false, false).singular_values;
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        rows.push(ScanPoint { mu, smin, smax, flagged: false });
    }
    let n = rows.len();
    for i in 0..n {
        let left = i == 0 || rows[i - 1].smin >= rows[i].smin;
        let right = i + 1 == n || rows[i + 1].smin >= rows[i].smin;
        rows[i].flagged = left && right && rows[i].smin <= opts.relative_floor * rows[i].smax;
    }
    Ok(rows)
}

/// Smallest eigenvalue of the Hermitian part of a matrix.
pub fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Doubles λ from `params.lambda` until Γ(−λ) + α is positive definite with
/// condition number below [`MAX_CONDITION`]; returns the checked parameters
/// and the reference Γ at that λ.
pub fn detect_lambda0(
    params: &ModelParams,
    basis: &HermiteBasis,
    radii_count: usize,
    max_doublings: usize,
) -> Result<(ModelParams, KernelMatrix)> {
    let mut p = *params;
    for _ in 0..=max_doublings {
        let gamma = assemble_gamma_ref(basis, &p, &GammaRefOptions::for_params(&p, radii_count))?;
        let dim = gamma.dim();
        let shifted = &gamma.entries + DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(p.alpha, 0.0);
        let lo = min_hermitian_eigenvalue(&shifted);
        let sv = shifted.svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        if lo > 0.0 && cond < MAX_CONDITION {
            p.lambda_checked = true;
            return Ok((p, gamma));
        }
        log::info!("lambda = {} rejected (min eigenvalue {lo:e}, condition {cond:e})", p.lambda);
        p.lambda *= 2.0;
    }
    Err(Error::InvalidParams(format!(
        "Gamma(-lambda) + alpha not positive definite up to lambda = {}",
        p.lambda / 2.0
    )))
}
