//! Momentum-space integrals of polynomial × Gaussian × resolvent type.
//!
//! Everything reduces to the radial moments
//! `j_m(g) = ∫_0^∞ t^{2m} e^{−t²} / (t² + g) dt`,
//! evaluated from the Faddeeva function and an upward recurrence, or by
//! Gauss–Hermite quadrature when g is large and positive.

use std::f64::consts::PI;

use errorfunctions::{ComplexErrorFunctions, RealErrorFunctions};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::greens::BoundarySide;
use crate::oscillator::{form_factor_poly, HermiteBasis, MultiIndex};
use crate::quadrature::gauss_hermite;

/// Denominator constant g of `1/(t² + g)`, with the two rims of the cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    /// g off the negative real axis (principal branch).
    Complex(Complex64),
    /// g = −κ² − i0, the limit reached from z = μ + i0.
    BelowCut(f64),
    /// g = −κ² + i0, the limit reached from z = μ − i0.
    AboveCut(f64),
}

impl Shift {
    /// Shift for the denominator `p² + c` where `c = c_re − i·im` carries the
    /// spectral parameter of `side` (im is the imaginary part of z, already scaled).
    pub fn for_side(side: BoundarySide, c_re: f64, im_scaled: f64) -> Shift {
        match side {
            BoundarySide::Plus if c_re < 0.0 => Shift::BelowCut(-c_re),
            BoundarySide::Minus if c_re < 0.0 => Shift::AboveCut(-c_re),
            BoundarySide::OffAxis(_) => Shift::Complex(Complex64::new(c_re, -im_scaled)),
            _ => Shift::Complex(Complex64::new(c_re, 0.0)),
        }
    }

    pub fn scaled(self, s: f64) -> Shift {
        match self {
            Shift::Complex(g) => Shift::Complex(g * s),
            Shift::BelowCut(k) => Shift::BelowCut(k * s),
            Shift::AboveCut(k) => Shift::AboveCut(k * s),
        }
    }

    fn value(self) -> Complex64 {
        match self {
            Shift::Complex(g) => g,
            Shift::BelowCut(k) | Shift::AboveCut(k) => Complex64::new(-k, 0.0),
        }
    }
}

/// Γ(n/2) for positive integer n.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n > 0);
    let mut x = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut k = if n % 2 == 0 { 2 } else { 1 };
    while k < n {
        x *= k as f64 / 2.0;
        k += 2;
    }
    x
}

/// ∫_{S²} ω₁^{e₁} ω₂^{e₂} ω₃^{e₃} dΩ.
pub fn sphere_monomial(e: [usize; 3]) -> f64 {
    if e.iter().any(|v| v % 2 == 1) {
        return 0.0;
    }
    2.0 * gamma_half(e[0] + 1) * gamma_half(e[1] + 1) * gamma_half(e[2] + 1) / gamma_half(e[0] + e[1] + e[2] + 3)
}

const LARGE_SHIFT: f64 = 8.0;
const LARGE_SHIFT_ORDER: usize = 160;

/// j_0..=j_mmax at the shift g.
pub fn radial_moments(mmax: usize, g: Shift) -> Vec<Complex64> {
    let gv = g.value();
    if let Shift::Complex(c) = g {
        if c.im == 0.0 && c.re > LARGE_SHIFT {
            let rule = gauss_hermite(LARGE_SHIFT_ORDER);
            return (0..=mmax)
                .map(|m| {
                    let s: f64 = rule
                        .iter()
                        .map(|(x, w)| w * x.powi(2 * m as i32) / (x * x + c.re))
                        .sum();
                    Complex64::new(0.5 * s, 0.0)
                })
                .collect();
        }
    }
    let j0 = match g {
        Shift::Complex(c) if c.im == 0.0 && c.re > 0.0 => {
            let s = c.re.sqrt();
            Complex64::new(PI / (2.0 * s) * s.erfcx(), 0.0)
        }
        Shift::Complex(c) => {
            let s = c.sqrt();
            PI / (2.0 * s) * (Complex64::i() * s).w()
        }
        Shift::BelowCut(k2) => {
            let k = k2.sqrt();
            Complex64::new(0.0, PI / (2.0 * k)) * Complex64::new(k, 0.0).w()
        }
        Shift::AboveCut(k2) => {
            let k = k2.sqrt();
            (Complex64::new(0.0, PI / (2.0 * k)) * Complex64::new(k, 0.0).w()).conj()
        }
    };
    let mut out = Vec::with_capacity(mmax + 1);
    out.push(j0);
    let mut gauss = 0.5 * PI.sqrt(); // Γ(1/2)/2
    for m in 1..=mmax {
        let prev = out[m - 1];
        out.push(gauss - gv * prev);
        gauss *= m as f64 - 0.5;
    }
    out
}

/// ∫_0^∞ p^{2m} e^{−A p²} / (p² + g) dp for m = 0..=mmax.
pub fn weighted_radial_moments(mmax: usize, a: f64, g: Shift) -> Vec<Complex64> {
    radial_moments(mmax, g.scaled(a))
        .into_iter()
        .enumerate()
        .map(|(m, v)| v * a.powf(0.5 - m as f64))
        .collect()
}

/// ∫ d³p Π_i poly_i(p_i) e^{−A|p|²} / (|p|² + g) for monomial coefficient lists.
pub fn separable_resolvent_integral(polys: [&[Complex64]; 3], a: f64, g: Shift) -> Complex64 {
    let deg: usize = polys.iter().map(|p| p.len().saturating_sub(1)).sum();
    let radial = weighted_radial_moments(1 + deg / 2, a, g);
    let mut total = Complex64::new(0.0, 0.0);
    for (e1, c1) in polys[0].iter().enumerate().step_by(2) {
        if *c1 == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (e2, c2) in polys[1].iter().enumerate().step_by(2) {
            for (e3, c3) in polys[2].iter().enumerate().step_by(2) {
                let e = e1 + e2 + e3;
                total += c1 * c2 * c3 * sphere_monomial([e1, e2, e3]) * radial[1 + e / 2];
            }
        }
    }
    total
}

/// Product of two coefficient lists.
pub fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn poly_conj(a: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|c| c.conj()).collect()
}

/// Contribution of the single oscillator mode `n` to ⟨φ_a, K(z) φ_b⟩:
/// (2π)^{−3} ∫ d³p conj(P_{an}(p)) P_{nb}(p) / ((p² + ω|n| − z)(p² + ω|n| + λ)).
///
/// `side` and `mu` encode z; for `OffAxis(ε)` z = μ + iε.
pub fn mode_kernel_matrix(
    basis: &HermiteBasis,
    n: &MultiIndex,
    side: BoundarySide,
    mu: f64,
    lambda: f64,
    omega: f64,
) -> DMatrix<Complex64> {
    let cutoff = basis.cutoff;
    let eps = match side {
        BoundarySide::OffAxis(e) => e,
        _ => 0.0,
    };
    let nt = n.total() as f64;
    let g1 = Shift::for_side(side, 2.0 * (omega * nt - mu) / omega, 2.0 * eps / omega);
    let g2 = Shift::Complex(Complex64::new(2.0 * (omega * nt + lambda) / omega, 0.0));
    let diff = 2.0 * Complex64::new(lambda + mu, eps) / omega;
    let prefactor = (2.0 * PI).powi(-3) * (2.0 / omega).sqrt();

    // per axis, per (a_i, b_i): conj(poly_{a n}) · poly_{n b}
    let axis_polys: Vec<Vec<Vec<Vec<Complex64>>>> = (0..3)
        .map(|i| {
            (0..=cutoff)
                .map(|ai| {
                    let left = poly_conj(&form_factor_poly(ai, n.0[i]));
                    (0..=cutoff)
                        .map(|bi| poly_mul(&left, &form_factor_poly(n.0[i], bi)))
                        .collect()
                })
                .collect()
        })
        .collect();

    let dim = basis.dim();
    let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (ia, a) in basis.indices.iter().enumerate() {
        for (ib, b) in basis.indices.iter().enumerate().skip(ia) {
            if (0..3).any(|i| (a.0[i] + b.0[i]) % 2 == 1) {
                continue;
            }
            let polys = [
                axis_polys[0][a.0[0]][b.0[0]].as_slice(),
                axis_polys[1][a.0[1]][b.0[1]].as_slice(),
                axis_polys[2][a.0[2]][b.0[2]].as_slice(),
            ];
            let v = (separable_resolvent_integral(polys, 0.5, g1) - separable_resolvent_integral(polys, 0.5, g2))
                / diff
                * prefactor;
            out[(ia, ib)] = v;
            out[(ib, ia)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_real_to_inf;

    #[test]
    fn moments_match_direct_quadrature() {
        for &g in &[0.3, 1.7, 5.0, 12.0, 40.0] {
            let j = radial_moments(6, Shift::Complex(Complex64::new(g, 0.0)));
            for (m, v) in j.iter().enumerate() {
                let (exact, _) = integrate_real_to_inf(|t| t.powi(2 * m as i32) * (-t * t).exp() / (t * t + g), 0.0, 1e-15);
                assert!((v.re - exact).abs() < 1e-12 * exact.abs().max(1e-3), "g={g} m={m}: {} {}", v.re, exact);
            }
        }
    }

    #[test]
    fn boundary_moment_has_plemelj_imaginary_part() {
        // Im j_m(−κ² − i0) = π κ^{2m−1} e^{−κ²} / 2
        let k2: f64 = 1.44;
        let j = radial_moments(4, Shift::BelowCut(k2));
        for (m, v) in j.iter().enumerate() {
            let expected = 0.5 * PI * k2.sqrt().powi(2 * m as i32 - 1) * (-k2).exp();
            assert!((v.im - expected).abs() < 1e-13);
        }
        let jm = radial_moments(4, Shift::AboveCut(k2));
        for (a, b) in j.iter().zip(&jm) {
            assert!((a.conj() - b).norm() < 1e-15);
        }
        // the off-axis limit approaches the rim
        let near = radial_moments(4, Shift::Complex(Complex64::new(-k2, -1e-7)));
        for (a, b) in j.iter().zip(&near) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn sphere_monomials() {
        assert!((sphere_monomial([0, 0, 0]) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_monomial([2, 0, 0]) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((sphere_monomial([2, 2, 0]) - 4.0 * PI / 15.0).abs() < 1e-14);
        assert_eq!(sphere_monomial([1, 2, 0]), 0.0);
    }
}
