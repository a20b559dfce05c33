//! Helmholtz/Yukawa kernels, the mode-summed free Green's function 𝒢(z)
//! applied to a charge, the plane-wave trace source and the closed-form
//! two-center integral.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charge_kernel::ChargeVector;
use crate::error::{Error, Result};
use crate::heat::{self, HighPart};
use crate::oscillator::{eigenfunction_value, eigenfunctions_1d, enumerate_shell, Channel, HermiteBasis, ModelParams};
use crate::quadrature::{composite_legendre, integrate_complex, integrate_real, SphereRule};

/// Where the spectral parameter sits relative to the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundarySide {
    /// z = μ + i0
    Plus,
    /// z = μ − i0
    Minus,
    /// z = μ + iε with ε ≠ 0
    OffAxis(f64),
    /// z = μ real and below every threshold
    NegativeReal,
}

impl BoundarySide {
    pub fn spectral_point(self, mu: f64) -> Complex64 {
        match self {
            BoundarySide::OffAxis(eps) => Complex64::new(mu, eps),
            _ => Complex64::new(mu, 0.0),
        }
    }

    pub fn conj(self) -> BoundarySide {
        match self {
            BoundarySide::Plus => BoundarySide::Minus,
            BoundarySide::Minus => BoundarySide::Plus,
            BoundarySide::OffAxis(e) => BoundarySide::OffAxis(-e),
            BoundarySide::NegativeReal => BoundarySide::NegativeReal,
        }
    }

    /// Numeric code stored in cache headers.
    pub fn code(self) -> f64 {
        match self {
            BoundarySide::Plus => 1.0,
            BoundarySide::Minus => -1.0,
            BoundarySide::NegativeReal => 0.0,
            BoundarySide::OffAxis(e) => 2.0 + e.abs(),
        }
    }

    pub fn label(self) -> String {
        match self {
            BoundarySide::Plus => "plus".into(),
            BoundarySide::Minus => "minus".into(),
            BoundarySide::NegativeReal => "negative-real".into(),
            BoundarySide::OffAxis(e) => format!("off-axis({e})"),
        }
    }
}

/// Low/high channel split at total energy μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSplit {
    pub mu: f64,
    pub omega: f64,
}

impl ChannelSplit {
    pub fn new(mu: f64, omega: f64) -> Self {
        ChannelSplit { mu, omega }
    }

    /// ⌊μ/ω⌋, or −1 when no channel is open.
    pub fn n0(&self) -> i64 {
        if self.mu < 0.0 {
            -1
        } else {
            (self.mu / self.omega).floor() as i64
        }
    }

    pub fn low_set(&self) -> Vec<crate::oscillator::MultiIndex> {
        (0..=self.n0()).flat_map(|n| enumerate_shell(n as usize)).collect()
    }
}

/// Default half-width of the excluded window around thresholds, in units of ω.
pub const THRESHOLD_WINDOW: f64 = 1e-3;

/// Rejects μ with |μ/ω − round(μ/ω)| ≤ window for μ/ω ≥ −window.
pub fn check_threshold(mu: f64, omega: f64, window: f64) -> Result<()> {
    let ratio = mu / omega;
    let nearest = ratio.round();
    if nearest >= 0.0 && (ratio - nearest).abs() <= window {
        return Err(Error::Threshold { mu, ratio, channel: nearest as i64 });
    }
    Ok(())
}

/// Energy moved out of a threshold window by δ = 2·window·ω, away from the
/// threshold; energies outside windows are returned unchanged.
pub fn shift_off_threshold(mu: f64, omega: f64, window: f64) -> f64 {
    if check_threshold(mu, omega, window).is_ok() {
        return mu;
    }
    let nearest = (mu / omega).round();
    let sign = if mu / omega >= nearest { 1.0 } else { -1.0 };
    omega * (nearest + sign * 2.0 * window)
}

/// Square root with nonnegative imaginary part (upper rim for boundary sides).
fn upper_sqrt(side: BoundarySide, nu: Complex64) -> Complex64 {
    let mut k = nu.sqrt();
    if k.im < 0.0 || (k.im == 0.0 && k.re < 0.0) {
        k = -k;
    }
    match side {
        BoundarySide::Minus if nu.im == 0.0 && nu.re > 0.0 => -k,
        _ => k,
    }
}

/// Outgoing wave number at energy ν: e^{i k r} is the kernel phase.
pub fn wave_number(side: BoundarySide, nu: f64) -> Complex64 {
    let eps = match side {
        BoundarySide::OffAxis(e) => e,
        _ => 0.0,
    };
    upper_sqrt(side, Complex64::new(nu, eps))
}

/// e^{i√ν r}/(4πr) on the requested side.
pub fn helmholtz_kernel(side: BoundarySide, nu: f64, r: f64) -> Result<Complex64> {
    if r <= 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let k = wave_number(side, nu);
    Ok((Complex64::i() * k * r).exp() / (4.0 * PI * r))
}

/// ∫ (e^{ia|x−y'|}/|x−y'|)(e^{−b|x−y''|}/|x−y''|) dx at |y'−y''| = d, for Im a ≥ 0.
pub fn product_integral_complex(a: Complex64, b: f64, d: f64) -> Complex64 {
    let ia = Complex64::i() * a;
    // (e^{iad} − e^{−bd})/d without cancellation at small d
    let num = if (ia * d).norm() < 1e-3 && b * d < 1e-3 {
        let x = ia * d;
        let y = -b * d;
        (x + x * x / 2.0 + x * x * x / 6.0 - y - y * y / 2.0 - y * y * y / 6.0) / d
    } else {
        ((ia * d).exp() - (-b * d).exp()) / d
    };
    4.0 * PI * num / (a * a + b * b)
}

/// Closed form 4π/d · (e^{iad} − e^{−bd})/(a² + b²).
pub fn product_integral(a: f64, b: f64, d: f64) -> Complex64 {
    assert!(b > 0.0 && d > 0.0, "product_integral needs b > 0 and d > 0");
    product_integral_complex(Complex64::new(a, 0.0), b, d)
}

/// (Tr Φ₀)(y) = (2π)^{−3/2} e^{ik·y} φ_n(y).
pub fn trace_plane_source(channel: &Channel, y: [f64; 3], params: &ModelParams) -> Complex64 {
    let phase: f64 = (0..3).map(|i| channel.k[i] * y[i]).sum();
    Complex64::from_polar((2.0 * PI).powf(-1.5) * eigenfunction_value(&channel.n, y, params), phase)
}

/// e^{ik·max(R,r)} sin(k·min(R,r)) / k, the angular average kernel times R·r.
fn radial_kernel(k: Complex64, big: f64, small: f64) -> Complex64 {
    let x = k * small;
    let sinc = if x.norm() < 1e-4 {
        Complex64::new(small, 0.0) * (1.0 - x * x / 6.0)
    } else {
        x.sin() / k
    };
    (Complex64::i() * k * big).exp() * sinc
}

/// Evaluator of (r₀(ν)f)(x) for f = e^{−β|x|²} by radial quadrature of the
/// convolution with e^{ik|x−x'|}/(4π|x−x'|).
#[derive(Debug, Clone, Copy)]
pub struct FreeResolventGaussian {
    pub side: BoundarySide,
    pub mu: f64,
    pub beta: f64,
    k: Complex64,
}

impl FreeResolventGaussian {
    pub fn new(side: BoundarySide, mu: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParams(format!("Gaussian width must be positive, got {beta}")));
        }
        Ok(FreeResolventGaussian { side, mu, beta, k: wave_number(side, mu) })
    }

    /// Value at radius `r` = |x|.
    pub fn eval(&self, r: f64) -> Complex64 {
        let beta = self.beta;
        let k = self.k;
        let cutoff = (40.0 / beta).sqrt() + r;
        let f = |rp: f64| (-beta * rp * rp).exp();
        if r == 0.0 {
            let (v, _) = integrate_complex(|rp| rp * f(rp) * (Complex64::i() * k * rp).exp(), 0.0, cutoff, 1e-15);
            return v;
        }
        let inner = |rp: f64| rp * f(rp) * radial_kernel(k, r, rp) / r;
        let outer = |rp: f64| rp * f(rp) * radial_kernel(k, rp, r) / r;
        let (a, _) = integrate_complex(inner, 0.0, r, 1e-15);
        let (b, _) = if cutoff > r { integrate_complex(outer, r, cutoff, 1e-15) } else { (Complex64::new(0.0, 0.0), 0.0) };
        a + b
    }

    /// ⟨f, r₀f⟩ = 4π ∫ R² f(R) (r₀f)(R) dR.
    pub fn pairing(&self) -> Complex64 {
        let cutoff = (40.0 / self.beta).sqrt();
        let (re, _) = integrate_real(|r| 4.0 * PI * r * r * (-self.beta * r * r).exp() * self.eval(r).re, 0.0, cutoff, 1e-14);
        let (im, _) = integrate_real(|r| 4.0 * PI * r * r * (-self.beta * r * r).exp() * self.eval(r).im, 0.0, cutoff, 1e-14);
        Complex64::new(re, im)
    }
}

/// Numerical controls of [`potential_apply`].
#[derive(Debug, Clone, Copy)]
pub struct PotentialOptions {
    pub tail_tol: f64,
    pub angular_order: usize,
    pub radial_panels: usize,
    pub radial_order: usize,
    pub time_panel_order: usize,
    pub threshold_window: f64,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        PotentialOptions {
            tail_tol: 1e-8,
            angular_order: 48,
            radial_panels: 24,
            radial_order: 10,
            time_panel_order: 12,
            threshold_window: THRESHOLD_WINDOW,
        }
    }
}

/// Value of a potential together with the bound on the truncated high shells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub value: Complex64,
    /// Contribution of the open shells |n| ≤ n0 alone.
    pub low_part: Complex64,
    pub tail_bound: f64,
}

/// Open-channel part: Σ_{|n|≤n0} φ_n(y) ∫ g_n(|x−y'|) φ_n(y') ξ(y') dy' by
/// spherical-radial quadrature centered at x.
fn low_potential(
    side: BoundarySide,
    mu: f64,
    xi: &ChargeVector,
    basis: &HermiteBasis,
    x: [f64; 3],
    y: [f64; 3],
    n0: i64,
    params: &ModelParams,
    opts: &PotentialOptions,
) -> Complex64 {
    if n0 < 0 {
        return Complex64::new(0.0, 0.0);
    }
    let omega = params.omega;
    let low: Vec<_> = (0..=n0).flat_map(|n| enumerate_shell(n as usize)).collect();
    let kmax = n0 as usize;
    let waves: Vec<Complex64> = (0..=kmax).map(|n| wave_number(side, mu - omega * n as f64)).collect();
    let deg = kmax.max(basis.cutoff);
    let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rmax = xnorm + 10.0 / omega.sqrt();
    let sphere = SphereRule::new(opts.angular_order);
    let radial = composite_legendre(opts.radial_order, 0.0, rmax, opts.radial_panels);
    let mut acc = vec![Complex64::new(0.0, 0.0); low.len()];
    for &(r, wr) in &radial {
        let phases: Vec<Complex64> = waves.iter().map(|k| (Complex64::i() * k * r).exp() * (wr * r / (4.0 * PI))).collect();
        let mut shell_acc = vec![Complex64::new(0.0, 0.0); low.len()];
        for (u, wu) in sphere.unit_vectors() {
            let p = [x[0] + r * u[0], x[1] + r * u[1], x[2] + r * u[2]];
            let ax: Vec<Vec<f64>> = (0..3).map(|i| eigenfunctions_1d(deg, p[i], omega)).collect();
            let charge: Complex64 = basis
                .indices
                .iter()
                .zip(&xi.coefficients)
                .map(|(b, c)| c * (ax[0][b.0[0]] * ax[1][b.0[1]] * ax[2][b.0[2]]))
                .sum();
            for (slot, n) in shell_acc.iter_mut().zip(&low) {
                *slot += charge * (wu * ax[0][n.0[0]] * ax[1][n.0[1]] * ax[2][n.0[2]]);
            }
        }
        for ((a, s), n) in acc.iter_mut().zip(shell_acc).zip(&low) {
            *a += s * phases[n.total()];
        }
    }
    low.iter()
        .zip(acc)
        .map(|(n, a)| a * eigenfunction_value(n, y, params))
        .sum()
}

/// (𝒢(z)ξ)(x, y) for x ≠ y: open channels exactly, closed channels through
/// the heat-kernel representation with an explicit shell-truncation bound.
pub fn potential_apply(
    side: BoundarySide,
    mu: f64,
    xi: &ChargeVector,
    basis: &HermiteBasis,
    x: [f64; 3],
    y: [f64; 3],
    params: &ModelParams,
    opts: &PotentialOptions,
) -> Result<PotentialValue> {
    if xi.coefficients.len() != basis.dim() {
        return Err(Error::BasisMismatch(format!(
            "charge has {} coefficients, basis has {}",
            xi.coefficients.len(),
            basis.dim()
        )));
    }
    if x == y {
        return Err(Error::CoincidentPoints);
    }
    let omega = params.omega;
    let split = match side {
        BoundarySide::NegativeReal => {
            if mu >= 0.0 {
                return Err(Error::InvalidParams(format!("negative-real side needs mu < 0, got {mu}")));
            }
            ChannelSplit::new(mu, omega)
        }
        BoundarySide::Plus | BoundarySide::Minus => {
            check_threshold(mu, omega, opts.threshold_window)?;
            ChannelSplit::new(mu, omega)
        }
        BoundarySide::OffAxis(_) => ChannelSplit::new(mu, omega),
    };
    if xi.coefficients.iter().all(|c| c.norm() == 0.0) {
        return Ok(PotentialValue { value: Complex64::new(0.0, 0.0), low_part: Complex64::new(0.0, 0.0), tail_bound: 0.0 });
    }
    let n0 = split.n0();
    let low = low_potential(side, mu, xi, basis, x, y, n0, params, opts);
    let mut z = side.spectral_point(mu);
    if side == BoundarySide::Minus {
        z = z.conj();
    }
    let hp = HighPart { n0, z, lambda: f64::INFINITY, omega };
    let (high, tail) = heat::high_potential(basis, &xi.coefficients, hp, x, y, opts.time_panel_order);
    let value = low + high;
    if tail > opts.tail_tol * value.norm().max(1e-300) {
        return Err(Error::TailNotConverged { bound: tail, tol: opts.tail_tol });
    }
    Ok(PotentialValue { value, low_part: low, tail_bound: tail })
}
