//! Oracle helpers shared by the integration tests. These use the quadrature
//! crates directly so the oracles do not run through the library's own rules.

#![allow(dead_code)]

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn crel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Composite Gauss–Legendre nodes on [a, b].
pub fn legendre_panels(order: usize, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order).unwrap());
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in rule.iter() {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

const KRONROD_X: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const KRONROD_W: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GAUSS7_W: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * KRONROD_W[7];
    let mut g = fc * GAUSS7_W[3];
    for i in 0..7 {
        let x = h * KRONROD_X[i];
        let s = f(c - x) + f(c + x);
        k += s * KRONROD_W[i];
        if i % 2 == 1 {
            g += s * GAUSS7_W[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss–Kronrod (7/15) with bisection until the local error
/// estimates sum below `tol`.
pub fn adaptive(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    let mut stack = vec![(a, b, tol)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut steps = 0;
    while let Some((lo, hi, t)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        steps += 1;
        if err <= t || steps > 200_000 || (hi - lo) < 1e-14 * (1.0 + lo.abs()) {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t));
            stack.push((mid, hi, 0.5 * t));
        }
    }
    total
}

pub fn adaptive_real(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive(&|x| Complex64::new(f(x), 0.0), a, b, tol).re
}

/// 1D physicists' Hermite function ψ_n(x) = (2^n n! √π)^{−1/2} H_n(x) e^{−x²/2},
/// by the stable normalized recurrence.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Oscillator eigenfunction with masses ½: (ω/2)^{1/4} ψ_n(√(ω/2) u) per axis.
pub fn phi(n: [usize; 3], y: [f64; 3], omega: f64) -> f64 {
    let s = (0.5 * omega).sqrt();
    (0..3).map(|i| (0.5 * omega).powf(0.25) * hermite_function(n[i], s * y[i])).product()
}

/// ∫ (e^{ia r}/r)(e^{−b s}/s) dx in spherical coordinates around y', with
/// s² = r² + d² − 2rd·t and t = 1 − u² to smooth the r = d corner.
pub fn product_integral_oracle(a: f64, b: f64, d: f64) -> Complex64 {
    let angular = |r: f64| {
        adaptive_real(
            &|u| {
                let t = 1.0 - u * u;
                let s = (r * r + d * d - 2.0 * r * d * t).max(0.0).sqrt();
                if s == 0.0 {
                    // limit of 2u e^{−bs}/s as u → 0 at r = d
                    return 2.0 / (r * d).sqrt() * (-b * s).exp();
                }
                2.0 * u * (-b * s).exp() / s
            },
            0.0,
            2f64.sqrt(),
            1e-10,
        )
    };
    let radial = |r: f64| Complex64::from_polar(2.0 * std::f64::consts::PI * r * angular(r), a * r);
    let cut = d + 40.0 / b;
    adaptive(&radial, 0.0, d, 1e-9) + adaptive(&radial, d, cut, 1e-9)
}
