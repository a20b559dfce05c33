//! Quadrature rules shared by the kernels: Gauss–Hermite and Gauss–Legendre
//! nodes (cached per order), a Lobatto × uniform sphere rule, and adaptive
//! double-exponential integration of real and complex integrands.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use once_cell::sync::Lazy;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

static HERMITE: Lazy<Mutex<HashMap<usize, Arc<Rule>>>> = Lazy::new(Default::default);
static LEGENDRE: Lazy<Mutex<HashMap<usize, Arc<Rule>>>> = Lazy::new(Default::default);
static LOBATTO: Lazy<Mutex<HashMap<usize, Arc<Rule>>>> = Lazy::new(Default::default);

/// Largest Gauss–Hermite order; beyond it the orthonormal recurrence used for
/// node polishing overflows.
pub const MAX_HERMITE_ORDER: usize = 240;

/// Gauss–Hermite rule for the weight e^{-x²} on the real line.
///
/// Nodes from Golub–Welsch are polished by Newton steps on the orthonormal
/// Hermite recurrence and the weights are recomputed as Christoffel numbers,
/// which brings them to full double precision.
pub fn gauss_hermite(order: usize) -> Arc<Rule> {
    assert!(
        (1..=MAX_HERMITE_ORDER).contains(&order),
        "Gauss-Hermite order {order} outside 1..={MAX_HERMITE_ORDER}"
    );
    let mut cache = HERMITE.lock().unwrap();
    cache
        .entry(order)
        .or_insert_with(|| Arc::new(build_hermite(order)))
        .clone()
}

fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    // returns (p_n(x), p_{n-1}(x), Σ_{k<n} p_k(x)²)
    let mut p_prev = 0.0;
    let mut p = std::f64::consts::PI.powf(-0.25);
    let mut sum = 0.0;
    for k in 0..n {
        sum += p * p;
        let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * p - (k as f64 / (k as f64 + 1.0)).sqrt() * p_prev;
        p_prev = p;
        p = next;
    }
    (p, p_prev, sum)
}

fn build_hermite(order: usize) -> Rule {
    let gh = GaussHermite::new(NonZeroUsize::new(order).unwrap());
    let mut nodes: Vec<f64> = gh.nodes().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut weights = Vec::with_capacity(order);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, p_prev, _) = orthonormal_hermite(order, *x);
            let dp = (2.0 * order as f64).sqrt() * p_prev;
            if dp == 0.0 {
                break;
            }
            *x -= p / dp;
        }
        let (_, _, sum) = orthonormal_hermite(order, *x);
        weights.push(1.0 / sum);
    }
    // enforce exact symmetry
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(order: usize) -> Arc<Rule> {
    assert!(order >= 1);
    let mut cache = LEGENDRE.lock().unwrap();
    cache
        .entry(order)
        .or_insert_with(|| {
            let gl = GaussLegendre::new(NonZeroUsize::new(order).unwrap());
            let mut pairs: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (*x, *w)).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Arc::new(Rule {
                nodes: pairs.iter().map(|p| p.0).collect(),
                weights: pairs.iter().map(|p| p.1).collect(),
            })
        })
        .clone()
}

/// Gauss–Legendre nodes and weights mapped onto [a, b].
pub fn legendre_on(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.iter().map(|(x, w)| (mid + half * x, half * w)).collect()
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64, f64) {
    // P_n, P_n', P_n''
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d1 = nf * (x * p1 - p0) / (x * x - 1.0);
    let d2 = (2.0 * x * d1 - nf * (nf + 1.0) * p1) / (1.0 - x * x);
    (p1, d1, d2)
}

/// Gauss–Lobatto rule on [-1, 1] with `points` nodes including both ends;
/// exact for polynomials of degree 2·points − 3.
pub fn gauss_lobatto(points: usize) -> Arc<Rule> {
    assert!(points >= 2);
    let mut cache = LOBATTO.lock().unwrap();
    cache
        .entry(points)
        .or_insert_with(|| {
            let n = points - 1;
            let nf = n as f64;
            let mut nodes = vec![0.0; points];
            nodes[0] = -1.0;
            nodes[n] = 1.0;
            for (i, node) in nodes.iter_mut().enumerate().take(n).skip(1) {
                let mut x = -(std::f64::consts::PI * i as f64 / nf).cos();
                for _ in 0..100 {
                    let (_, d1, d2) = legendre_and_derivative(n, x);
                    let dx = d1 / d2;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                *node = x;
            }
            for i in 0..points / 2 {
                let j = n - i;
                let x = 0.5 * (nodes[j] - nodes[i]);
                nodes[i] = -x;
                nodes[j] = x;
            }
            if points % 2 == 1 {
                nodes[n / 2] = 0.0;
            }
            let weights = nodes
                .iter()
                .map(|&x| {
                    let (p, _, _) = legendre_and_derivative(n, x);
                    2.0 / (nf * (nf + 1.0) * p * p)
                })
                .collect();
            Arc::new(Rule { nodes, weights })
        })
        .clone()
}

/// Product rule on the unit sphere: Gauss–Lobatto in cos θ times a uniform
/// grid in φ. Exact for spherical polynomials up to degree `order`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub order: usize,
    /// (θ, φ, weight); weights sum to 4π.
    pub points: Vec<(f64, f64, f64)>,
}

impl SphereRule {
    pub fn new(order: usize) -> Self {
        let n_theta = order.div_ceil(2) + 2;
        let n_phi = order + 1;
        let lob = gauss_lobatto(n_theta);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        // descending cos θ so that the first row is the forward direction
        for (c, w) in lob.iter().collect::<Vec<_>>().into_iter().rev() {
            let theta = c.clamp(-1.0, 1.0).acos();
            for j in 0..n_phi {
                points.push((theta, j as f64 * dphi, w * dphi));
            }
        }
        SphereRule { order, points }
    }

    pub fn unit_vectors(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points.iter().map(|&(t, p, w)| (direction(t, p), w))
    }

    pub fn integrate<F: FnMut([f64; 3]) -> f64>(&self, mut f: F) -> f64 {
        self.unit_vectors().map(|(u, w)| w * f(u)).sum()
    }
}

pub fn direction(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Adaptive double-exponential integral of a real function on [a, b].
/// Returns (value, error estimate).
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> (f64, f64) {
    let out = quadrature::double_exponential::integrate(f, a, b, abs_tol);
    (out.integral, out.error_estimate)
}

/// Complex version of [`integrate_real`], integrating real and imaginary parts separately.
pub fn integrate_complex<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, abs_tol: f64) -> (Complex64, f64) {
    let (re, e1) = integrate_real(|x| f(x).re, a, b, abs_tol);
    let (im, e2) = integrate_real(|x| f(x).im, a, b, abs_tol);
    (Complex64::new(re, im), e1.hypot(e2))
}

/// Integral over [a, ∞) via the map x = a + t/(1−t).
pub fn integrate_real_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64) -> (f64, f64) {
    integrate_real(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
    )
}

/// Gauss–Legendre panels on [a, b]: `panels` equal sub-intervals of `order` nodes each.
pub fn composite_legendre(order: usize, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| legendre_on(order, a + p as f64 * h, a + (p + 1) as f64 * h))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments_exact() {
        let r = gauss_hermite(20);
        let m0: f64 = r.weights.iter().sum();
        assert!((m0 - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        let m4: f64 = r.iter().map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn lobatto_exactness() {
        let r = gauss_lobatto(7);
        assert_eq!(r.nodes[0], -1.0);
        for deg in 0..=11 {
            let s: f64 = r.iter().map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((s - exact).abs() < 1e-14, "deg {deg}: {s} vs {exact}");
        }
    }

    #[test]
    fn sphere_rule_integrates_polynomials() {
        let s = SphereRule::new(10);
        let area = s.integrate(|_| 1.0);
        assert!((area - 4.0 * std::f64::consts::PI).abs() < 1e-13);
        let z4 = s.integrate(|u| u[2].powi(4));
        assert!((z4 - 4.0 * std::f64::consts::PI / 5.0).abs() < 1e-13);
        let x2y2 = s.integrate(|u| u[0] * u[0] * u[1] * u[1]);
        assert!((x2y2 - 4.0 * std::f64::consts::PI / 15.0).abs() < 1e-13);
    }
}
