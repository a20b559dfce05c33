//! Harmonic-oscillator eigenfunctions, multi-index bookkeeping and the
//! Hermite–Gaussian form factors.
//!
//! Coordinates on one axis: `u` physical, `x = √(ω/2)·u` dimensionless.
//! With ψ_m the normalized Hermite functions, `φ_m(u) = (ω/2)^{1/4} ψ_m(x)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite;

/// Physical parameters: oscillator frequency, renormalization point λ and the
/// inverse scattering-length parameter α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Set once Γ(−λ)+α has been verified positive definite.
    pub lambda_checked: bool,
}

impl ModelParams {
    pub fn new(omega: f64, lambda: f64, alpha: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParams(format!("omega must be positive, got {omega}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParams(format!("alpha must be finite, got {alpha}")));
        }
        Ok(ModelParams { omega, lambda, alpha, lambda_checked: false })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Oscillator quantum numbers (n1, n2, n3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub [usize; 3]);

impl MultiIndex {
    pub const GROUND: MultiIndex = MultiIndex([0, 0, 0]);

    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        MultiIndex([n1, n2, n3])
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// Number of multi-indices with |n| = N.
pub fn shell_size(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Number of multi-indices with |n| ≤ cutoff.
pub fn basis_dim(cutoff: usize) -> usize {
    (cutoff + 1) * (cutoff + 2) * (cutoff + 3) / 6
}

/// All multi-indices of total degree `n`, in ascending lexicographic order.
pub fn enumerate_shell(n: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(shell_size(n));
    for a in 0..=n {
        for b in 0..=(n - a) {
            out.push(MultiIndex([a, b, n - a - b]));
        }
    }
    out
}

/// Largest degree accepted by [`hermite_poly`].
pub const MAX_HERMITE_DEGREE: usize = 170;

/// Physicists' Hermite polynomial H_n(x) by the three-term recurrence.
///
/// Degrees above [`MAX_HERMITE_DEGREE`], or arguments where the value leaves
/// the double range, are reported as overflow.
pub fn hermite_poly(n: usize, x: f64) -> Result<f64> {
    if n > MAX_HERMITE_DEGREE {
        return Err(Error::HermiteOverflow(n));
    }
    let mut h0 = 1.0;
    if n == 0 {
        return Ok(h0);
    }
    let mut h1 = 2.0 * x;
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    if h1.is_finite() {
        Ok(h1)
    } else {
        Err(Error::HermiteOverflow(n))
    }
}

/// Normalized Hermite functions ψ_0..=ψ_nmax at x (unit L² norm in x).
pub fn hermite_functions(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for m in 0..=nmax {
        out.push(cur);
        let mf = m as f64;
        let next = (2.0 / (mf + 1.0)).sqrt() * x * cur - (mf / (mf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

/// Polynomial parts ψ_m(x)·e^{x²/2} for m = 0..=nmax.
pub fn hermite_function_polys(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for m in 0..=nmax {
        out.push(cur);
        let mf = m as f64;
        let next = (2.0 / (mf + 1.0)).sqrt() * x * cur - (mf / (mf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

/// One-axis eigenfunctions φ_0..=φ_nmax at physical coordinate u.
pub fn eigenfunctions_1d(nmax: usize, u: f64, omega: f64) -> Vec<f64> {
    let scale = (0.5 * omega).powf(0.25);
    let mut v = hermite_functions(nmax, (0.5 * omega).sqrt() * u);
    v.iter_mut().for_each(|p| *p *= scale);
    v
}

/// φ_n(y) for the three-dimensional oscillator.
pub fn eigenfunction_value(n: &MultiIndex, y: [f64; 3], params: &ModelParams) -> f64 {
    (0..3)
        .map(|i| eigenfunctions_1d(n.0[i], y[i], params.omega)[n.0[i]])
        .product()
}

/// ∫ e^{ixy} H_n(x) e^{−x²} dx = √π (iy)^n e^{−y²/4}.
pub fn hermite_gauss_ft(n: usize, y: f64) -> Complex64 {
    Complex64::i().powu(n as u32) * (PI.sqrt() * y.powi(n as i32) * (-0.25 * y * y).exp())
}

/// Exact linearization coefficients of H_j·H_k = Σ_m c_m H_{j+k−2m},
/// c_m = 2^m m! C(j,m) C(k,m), or `None` if a coefficient exceeds u128.
pub fn hermite_product_coefficients(j: usize, k: usize) -> Option<Vec<u128>> {
    let mut out = Vec::with_capacity(j.min(k) + 1);
    let mut c: u128 = 1;
    out.push(c);
    for m in 0..j.min(k) {
        let num = c.checked_mul(2 * (j - m) as u128)?.checked_mul((k - m) as u128)?;
        c = num / (m as u128 + 1);
        out.push(c);
    }
    Some(out)
}

fn product_coefficients_f64(j: usize, k: usize) -> Vec<f64> {
    if let Some(exact) = hermite_product_coefficients(j, k) {
        return exact.into_iter().map(|c| c as f64).collect();
    }
    let mut out = vec![1.0];
    let mut c = 1.0;
    for m in 0..j.min(k) {
        c *= 2.0 * (j - m) as f64 * (k - m) as f64 / (m as f64 + 1.0);
        out.push(c);
    }
    out
}

/// √(2^n n!) in floating point.
fn sqrt_hermite_norm(n: usize) -> f64 {
    (1..=n).map(|i| (2.0 * i as f64).sqrt()).product()
}

/// Scaled momentum q' = q·√(2/ω) used by the one-axis form factors.
pub fn scaled_momentum(q: f64, omega: f64) -> f64 {
    q * (2.0 / omega).sqrt()
}

/// One-axis form factor ∫ e^{−iqu} φ_j(u) φ_k(u) du from the Hermite product
/// expansion and [`hermite_gauss_ft`].
pub fn form_factor_1d(j: usize, k: usize, q: f64, omega: f64) -> Complex64 {
    let qs = scaled_momentum(q, omega);
    let norm = 1.0 / (sqrt_hermite_norm(j) * sqrt_hermite_norm(k) * PI.sqrt());
    product_coefficients_f64(j, k)
        .iter()
        .enumerate()
        .map(|(m, c)| hermite_gauss_ft(j + k - 2 * m, -qs) * *c)
        .sum::<Complex64>()
        * norm
}

/// ∫ e^{−iq·y} φ_n(y) φ_{n'}(y) dy.
pub fn form_factor(n: &MultiIndex, n2: &MultiIndex, q: [f64; 3], params: &ModelParams) -> Complex64 {
    (0..3)
        .map(|i| form_factor_1d(n.0[i], n2.0[i], q[i], params.omega))
        .product()
}

/// Monomial coefficients c_p of the one-axis form factor written as
/// Σ_p c_p q'^p · e^{−q'²/4}.
pub fn form_factor_poly(j: usize, k: usize) -> Vec<Complex64> {
    let norm = 1.0 / (sqrt_hermite_norm(j) * sqrt_hermite_norm(k));
    let mut out = vec![Complex64::new(0.0, 0.0); j + k + 1];
    for (m, c) in product_coefficients_f64(j, k).iter().enumerate() {
        let p = j + k - 2 * m;
        out[p] += Complex64::new(0.0, -1.0).powu(p as u32) * (c * norm);
    }
    out
}

/// Polynomial part of the one-axis form factor evaluated through the
/// generalized Laguerre representation; stable for large indices.
/// Returns P_{jk}(q)·e^{q'²/4} at scaled momentum q'.
pub fn form_factor_poly_value(j: usize, k: usize, qs: f64) -> Complex64 {
    let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
    let d = hi - lo;
    let ratio: f64 = ((lo + 1)..=hi).map(|i| 1.0 / (i as f64).sqrt()).product();
    let x = 0.5 * qs * qs;
    // generalized Laguerre L_lo^{(d)}(x)
    let a = d as f64;
    let mut l0 = 1.0;
    let mut l1 = 1.0 + a - x;
    let lag = if lo == 0 {
        1.0
    } else {
        for n in 1..lo {
            let nf = n as f64;
            let l2 = ((2.0 * nf + 1.0 + a - x) * l1 - (nf + a) * l0) / (nf + 1.0);
            l0 = l1;
            l1 = l2;
        }
        l1
    };
    let base = Complex64::new(0.0, -qs / 2f64.sqrt());
    base.powu(d as u32) * (ratio * lag)
}

/// Truncated tensor-product Hermite basis {φ_n : |n| ≤ cutoff}, ordered by
/// shell and lexicographically within a shell.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    pub cutoff: usize,
    pub quad_order: usize,
    pub indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl HermiteBasis {
    pub fn new(cutoff: usize) -> Self {
        Self::with_quad_order(cutoff, 2 * cutoff + 2)
    }

    pub fn with_quad_order(cutoff: usize, quad_order: usize) -> Self {
        let quad_order = quad_order.max(2 * cutoff + 2);
        let indices: Vec<MultiIndex> = (0..=cutoff).flat_map(enumerate_shell).collect();
        let lookup = indices.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        HermiteBasis { cutoff, quad_order, indices, lookup }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn position(&self, n: &MultiIndex) -> Option<usize> {
        self.lookup.get(n).copied()
    }

    /// Gram matrix ⟨φ_a, φ_b⟩ from the product Gauss–Hermite rule of the basis.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let rule = gauss_hermite(self.quad_order);
        let m = self.cutoff;
        let mut g1 = vec![vec![0.0; m + 1]; m + 1];
        for (x, w) in rule.iter() {
            let p = hermite_function_polys(m, x);
            for j in 0..=m {
                for k in 0..=m {
                    g1[j][k] += w * p[j] * p[k];
                }
            }
        }
        self.indices
            .iter()
            .map(|a| {
                self.indices
                    .iter()
                    .map(|b| (0..3).map(|i| g1[a.0[i]][b.0[i]]).product())
                    .collect()
            })
            .collect()
    }
}

/// Scattering channel: neutron momentum and oscillator state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub k: [f64; 3],
    pub n: MultiIndex,
}

impl Channel {
    pub fn new(k: [f64; 3], n: MultiIndex) -> Self {
        Channel { k, n }
    }

    pub fn momentum(&self) -> f64 {
        self.k.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn energy(&self, omega: f64) -> f64 {
        self.k.iter().map(|v| v * v).sum::<f64>() + omega * self.n.total() as f64
    }

    pub fn is_open(&self, mu: f64, omega: f64) -> bool {
        omega * (self.n.total() as f64) < mu
    }
}

/// Channel momentum √(μ − ω|n|) at total energy μ, if the channel is open.
pub fn channel_momentum(mu: f64, n_total: usize, omega: f64) -> Option<f64> {
    let e = mu - omega * n_total as f64;
    (e > 0.0).then(|| e.sqrt())
}
