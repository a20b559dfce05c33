//! Heat-kernel representation of the mode-summed Green's functions.
//!
//! With s = ωτ, the oscillator heat kernel on one axis is Mehler's kernel and
//! the free factor is a Gaussian, so every basis matrix element of
//! `h_τ(y'−y'') M_τ(y', y'')` is a two-dimensional Gaussian-polynomial integral,
//! done exactly with Gauss–Hermite. K(z) and the high-mode part of 𝒢(z) follow
//! from one τ-integral each. Short times use the closed Mehler form minus the
//! explicitly treated low modes; long times use the mode sum over high shells
//! directly, which avoids cancellation against the growing factor e^{τμ}.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::oscillator::{form_factor_poly_value, hermite_function_polys, hermite_functions, HermiteBasis};
use crate::quadrature::{composite_legendre, gauss_hermite, legendre_on};

/// Dimensionless switch time s* = ωτ* between the two representations.
pub const SWITCH_TIME: f64 = 1.0;

/// Long-time shells are summed until e^{−s·ΔN} drops below this.
const SHELL_DECAY: f64 = 40.0;

/// Node counts for the τ-integrals; `refined` gives the cross-check rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRule {
    pub short_order: usize,
    pub long_panel_order: usize,
}

impl TimeRule {
    pub const DEFAULT: TimeRule = TimeRule { short_order: 40, long_panel_order: 10 };

    pub fn refined(self) -> TimeRule {
        TimeRule {
            short_order: self.short_order + self.short_order / 2,
            long_panel_order: self.long_panel_order + self.long_panel_order / 2,
        }
    }
}

/// (e^x − 1)/x for complex x.
pub fn phi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.25 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..30 {
            term *= x / k as f64;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (x.exp() - 1.0) / x
    }
}

/// Weight (e^{τz} − e^{−τλ})/(z + λ) of the K(z) time integral.
pub fn kernel_weight(tau: f64, z: Complex64, lambda: f64) -> Complex64 {
    shifted_kernel_weight(tau, z, lambda, 0.0)
}

/// e^{−τ·shift} times [`kernel_weight`], without forming e^{τz} on its own.
pub fn shifted_kernel_weight(tau: f64, z: Complex64, lambda: f64, shift: f64) -> Complex64 {
    let x = (z + lambda) * tau;
    if x.norm() < 0.25 {
        (-(lambda + shift) * tau).exp() * tau * phi1(x)
    } else {
        (((z - shift) * tau).exp() - (-(lambda + shift) * tau).exp()) / (z + lambda)
    }
}

/// One-axis matrix ∫∫ φ_j(u) φ_k(v) h_τ(u−v) M_τ(u,v) du dv for j,k ≤ cutoff,
/// flattened row-major.
pub fn coincidence_overlap(cutoff: usize, s: f64, omega: f64) -> Vec<f64> {
    let n = cutoff + 1;
    let order = cutoff + 1;
    let rule = gauss_hermite(order);
    let th = (0.5 * s).tanh();
    let a_plus = 0.5 * (1.0 + th);
    let a_minus = 0.5 * (1.0 + 1.0 / th) + 1.0 / s;
    let pref = omega.sqrt() / (2.0 * PI) / (s * (-(-2.0 * s).exp_m1())).sqrt() / (a_plus * a_minus).sqrt();
    let mut out = vec![0.0; n * n];
    for (t1, w1) in rule.iter() {
        let eta = t1 / a_plus.sqrt();
        for (t2, w2) in rule.iter() {
            let delta = t2 / a_minus.sqrt();
            let x = (eta + delta) / 2f64.sqrt();
            let y = (eta - delta) / 2f64.sqrt();
            let px = hermite_function_polys(cutoff, x);
            let py = hermite_function_polys(cutoff, y);
            let w = w1 * w2 * pref;
            for j in 0..n {
                for k in 0..n {
                    out[j * n + k] += w * px[j] * py[k];
                }
            }
        }
    }
    out
}

/// Per-mode one-axis matrices
/// T^{(m)}_{jk} = e^{−sm} ∫∫ φ_jφ_m(u) h_τ(u−v) φ_mφ_k(v) du dv, m = 0..=mmax,
/// computed in momentum space from the Laguerre form factors. Without
/// `decayed` the factor e^{−sm} is left out.
pub fn mode_overlaps(cutoff: usize, mmax: usize, s: f64, omega: f64, decayed: bool) -> Vec<Vec<f64>> {
    let n = cutoff + 1;
    let order = mmax + cutoff + 1;
    let rule = gauss_hermite(order);
    let scale = (2.0 / (1.0 + s)).sqrt();
    let pref = omega.sqrt() / (2.0 * PI * (1.0 + s).sqrt());
    let nodes: Vec<(f64, f64)> = rule.iter().filter(|(t, _)| *t >= 0.0).collect();
    (0..=mmax)
        .map(|m| {
            let decay = if decayed { (-s * m as f64).exp() * pref } else { pref };
            let mut out = vec![0.0; n * n];
            if decay == 0.0 {
                return out;
            }
            for &(t, w) in &nodes {
                // even integrand: fold the negative half onto the positive one
                let wt = if t == 0.0 { w } else { 2.0 * w };
                let q = t * scale;
                let p: Vec<Complex64> = (0..n).map(|j| form_factor_poly_value(j, m, q)).collect();
                for j in 0..n {
                    for k in (j % 2..n).step_by(2) {
                        out[j * n + k] += wt * (p[j].conj() * p[k]).re;
                    }
                }
            }
            out.iter_mut().for_each(|v| *v *= decay);
            out
        })
        .collect()
}

/// Σ over n with |n| in (n0, nmax] of e^{−s(|n|−n0−1)} Π_i seq_i[n_i], via two
/// convolutions; also returns the weighted last shell.
pub fn high_shell_sum<T>(seqs: [&[T]; 3], n0: i64, nmax: usize, s: f64) -> (T, T)
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let len = nmax + 1;
    let mut c2 = vec![T::default(); len];
    for (i, a) in seqs[0].iter().take(len).enumerate() {
        for (j, b) in seqs[1].iter().take(len - i).enumerate() {
            c2[i + j] = c2[i + j] + *a * *b;
        }
    }
    let mut total = T::default();
    let mut last = T::default();
    for nn in 0..len {
        if (nn as i64) <= n0 {
            continue;
        }
        let mut shell = T::default();
        for k in 0..=nn.min(seqs[2].len() - 1) {
            shell = shell + c2[nn - k] * seqs[2][k];
        }
        let shell = shell * (-s * (nn as i64 - n0 - 1) as f64).exp();
        total = total + shell;
        last = shell;
    }
    (total, last)
}

/// Number of high shells needed at dimensionless time s.
pub fn shells_needed(n0: i64, s: f64) -> usize {
    ((n0 + 1).max(0) as usize) + (SHELL_DECAY / s).ceil() as usize + 2
}

/// τ-nodes (τ, weight) on [0, τ*] with τ = τ* t².
pub fn short_nodes(tau_star: f64, order: usize) -> Vec<(f64, f64)> {
    legendre_on(order, 0.0, 1.0)
        .into_iter()
        .map(|(t, w)| (tau_star * t * t, 2.0 * tau_star * t * w))
        .collect()
}

/// τ-nodes on [τ*, τ_max] with τ = τ* e^t, composite Gauss–Legendre in t.
pub fn long_nodes(tau_star: f64, tau_max: f64, panel_order: usize) -> Vec<(f64, f64)> {
    let t_max = (tau_max / tau_star).ln().max(1.0);
    let panels = (t_max / 1.5).ceil() as usize;
    composite_legendre(panel_order, 0.0, t_max, panels)
        .into_iter()
        .map(|(t, w)| {
            let tau = tau_star * t.exp();
            (tau, tau * w)
        })
        .collect()
}

/// Mode-decomposition parameters of a high-part computation.
#[derive(Debug, Clone, Copy)]
pub struct HighPart {
    /// Largest treated-as-low shell (−1 if none).
    pub n0: i64,
    /// Spectral parameter z (for boundary sides, its real part).
    pub z: Complex64,
    pub lambda: f64,
    pub omega: f64,
}

impl HighPart {
    /// ω(n0+1), the energy of the lowest high shell.
    fn first_high_energy(&self) -> f64 {
        self.omega * (self.n0 + 1) as f64
    }

    fn decay_rate(&self) -> f64 {
        self.omega * (self.n0 + 1) as f64 - self.z.re
    }

    fn tau_star(&self) -> f64 {
        SWITCH_TIME / self.omega
    }

    fn tau_max(&self) -> f64 {
        let rate = self.omega * (self.n0 + 1) as f64 - self.z.re.max(-self.lambda);
        45.0 / rate.max(1e-12)
    }
}

/// Per-node one-axis data for the matrix high part.
struct NodeData {
    weight: Complex64,
    s: f64,
    short: bool,
    full: Vec<f64>,
    modes: Vec<Vec<f64>>,
    nmax: usize,
}

/// High-mode part of ⟨φ_a, K(z) φ_b⟩ over the basis, plus a bound on the
/// neglected shells. Requires Re z < ω(n0+1).
pub fn high_kernel_matrix(basis: &HermiteBasis, hp: HighPart, rule: TimeRule) -> (DMatrix<Complex64>, f64) {
    assert!(hp.decay_rate() > 0.0, "high part requires Re z below the first high threshold");
    let cutoff = basis.cutoff;
    let n = cutoff + 1;
    let omega = hp.omega;
    let tau_star = hp.tau_star();
    let mut nodes: Vec<(f64, f64, bool)> = short_nodes(tau_star, rule.short_order)
        .into_iter()
        .map(|(t, w)| (t, w, true))
        .collect();
    nodes.extend(
        long_nodes(tau_star, hp.tau_max(), rule.long_panel_order)
            .into_iter()
            .map(|(t, w)| (t, w, false)),
    );

    let data: Vec<NodeData> = nodes
        .par_iter()
        .map(|&(tau, w, short)| {
            let s = omega * tau;
            if short {
                let weight = kernel_weight(tau, hp.z, hp.lambda) * w;
                let modes = if hp.n0 >= 0 { mode_overlaps(cutoff, hp.n0 as usize, s, omega, true) } else { Vec::new() };
                NodeData { weight, s, short, full: coincidence_overlap(cutoff, s, omega), modes, nmax: 0 }
            } else {
                // e^{−s(n0+1)} moves into the weight so neither factor overflows
                let weight = shifted_kernel_weight(tau, hp.z, hp.lambda, hp.first_high_energy()) * w;
                let nmax = shells_needed(hp.n0, s);
                NodeData { weight, s, short, full: Vec::new(), modes: mode_overlaps(cutoff, nmax, s, omega, false), nmax }
            }
        })
        .collect();

    let low_modes: Vec<[usize; 3]> = (0..=hp.n0.max(-1))
        .flat_map(|nn| crate::oscillator::enumerate_shell(nn as usize))
        .map(|m| m.0)
        .collect();

    let dim = basis.dim();
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|a| (a..dim).map(move |b| (a, b))).collect();
    let values: Vec<(Complex64, f64)> = pairs
        .par_iter()
        .map(|&(ia, ib)| {
            let a = basis.indices[ia].0;
            let b = basis.indices[ib].0;
            if (0..3).any(|i| (a[i] + b[i]) % 2 == 1) {
                return (Complex64::new(0.0, 0.0), 0.0);
            }
            let idx = [a[0] * n + b[0], a[1] * n + b[1], a[2] * n + b[2]];
            let mut acc = Complex64::new(0.0, 0.0);
            let mut tail = 0.0f64;
            let mut seq = [Vec::new(), Vec::new(), Vec::new()];
            for d in &data {
                let h = if d.short {
                    let mut v = d.full[idx[0]] * d.full[idx[1]] * d.full[idx[2]];
                    for m in &low_modes {
                        v -= d.modes[m[0]][idx[0]] * d.modes[m[1]][idx[1]] * d.modes[m[2]][idx[2]];
                    }
                    v
                } else {
                    for i in 0..3 {
                        seq[i].clear();
                        seq[i].extend(d.modes.iter().map(|t| t[idx[i]]));
                    }
                    let (total, last) = high_shell_sum([&seq[0], &seq[1], &seq[2]], hp.n0, d.nmax, d.s);
                    tail += (d.weight.norm() * last.abs()) / (1.0 - (-SWITCH_TIME).exp());
                    total
                };
                acc += d.weight * h;
            }
            (acc, tail)
        })
        .collect();

    let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut tail = 0.0f64;
    for (&(a, b), (v, t)) in pairs.iter().zip(values) {
        out[(a, b)] = v;
        out[(b, a)] = v;
        tail = tail.max(t);
    }
    (out, tail)
}

/// Per-axis pointwise data for the potential high part at one τ. Short times
/// (`with_full`) also return the full Mehler factor and keep e^{−sm} in the
/// modes; long times leave the decay to the shell sum.
fn axis_potential_data(
    cutoff: usize,
    nmax: usize,
    s: f64,
    omega: f64,
    x: f64,
    y: f64,
    with_full: bool,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sx = (0.5 * omega).sqrt() * x;
    let sy = (0.5 * omega).sqrt() * y;
    let front = (0.5 * omega).powf(0.25) * (omega / (4.0 * PI * s)).sqrt();

    let full = if with_full {
        // ∫ h_τ(x−v) M_τ(y,v) φ_b(v) dv
        let coth = 1.0 / s.tanh();
        let csch = 2.0 * (-s).exp() / (-(-2.0 * s).exp_m1());
        let a = 0.5 / s + 0.5 * coth + 0.5;
        let bl = sx / s + sy * csch;
        let c0 = -sx * sx / (2.0 * s) - 0.5 * sy * sy * coth;
        let mehler = (PI * (-(-2.0 * s).exp_m1())).powf(-0.5);
        let expo = (c0 + bl * bl / (4.0 * a)).exp() / a.sqrt();
        let center = bl / (2.0 * a);
        let rule = gauss_hermite(cutoff / 2 + 1);
        let mut out = vec![0.0; cutoff + 1];
        for (t, w) in rule.iter() {
            let p = hermite_function_polys(cutoff, center + t / a.sqrt());
            for b in 0..=cutoff {
                out[b] += w * p[b];
            }
        }
        out.iter_mut().for_each(|v| *v *= front * mehler * expo);
        out
    } else {
        Vec::new()
    };

    // e^{−sm} φ_m(y) ∫ h_τ(x−v) φ_m(v) φ_b(v) dv
    let a = 1.0 + 0.5 / s;
    let center = sx / (2.0 * s + 1.0);
    let gauss = (-sx * sx / (2.0 * s + 1.0)).exp() / a.sqrt();
    let psi_y = hermite_functions(nmax, sy);
    let rule = gauss_hermite((nmax + cutoff) / 2 + 1);
    let mut modes = vec![vec![0.0; cutoff + 1]; nmax + 1];
    for (t, w) in rule.iter() {
        let p = hermite_function_polys(nmax.max(cutoff), center + t / a.sqrt());
        for (m, row) in modes.iter_mut().enumerate() {
            for b in 0..=cutoff {
                row[b] += w * p[m] * p[b];
            }
        }
    }
    for (m, row) in modes.iter_mut().enumerate() {
        let decay = if with_full { (-s * m as f64).exp() } else { 1.0 };
        let f = decay * psi_y[m] * front * gauss;
        row.iter_mut().for_each(|v| *v *= f);
    }
    (full, modes)
}

/// High-mode part of (𝒢(z)ξ)(x,y) = ∫ dτ e^{τz} ∫ h_τ(x−y') M^>_τ(y,y') ξ(y') dy'
/// for ξ = Σ_b coef_b φ_b, plus a bound on the neglected shells.
pub fn high_potential(
    basis: &HermiteBasis,
    coef: &[Complex64],
    hp: HighPart,
    x: [f64; 3],
    y: [f64; 3],
    panel_order: usize,
) -> (Complex64, f64) {
    let cutoff = basis.cutoff;
    let omega = hp.omega;
    let tau_star = hp.tau_star();
    let d2: f64 = (0..3).map(|i| (x[i] - y[i]).powi(2)).sum();
    let tau_min = (d2 / 400.0).max(1e-14 / omega).min(0.5 * tau_star);
    let t_lo = (tau_min / tau_star).ln();
    let panels = ((-t_lo) / 1.0).ceil().max(1.0) as usize;
    let mut nodes: Vec<(f64, f64, bool)> = composite_legendre(panel_order, t_lo, 0.0, panels)
        .into_iter()
        .map(|(t, w)| {
            let tau = tau_star * t.exp();
            (tau, tau * w, true)
        })
        .collect();
    nodes.extend(
        long_nodes(tau_star, hp.tau_max(), panel_order)
            .into_iter()
            .map(|(t, w)| (t, w, false)),
    );
    let low_modes: Vec<[usize; 3]> = (0..=hp.n0.max(-1))
        .flat_map(|nn| crate::oscillator::enumerate_shell(nn as usize))
        .map(|m| m.0)
        .collect();

    let contributions: Vec<(Complex64, f64)> = nodes
        .par_iter()
        .map(|&(tau, w, short)| {
            let s = omega * tau;
            let (weight, nmax) = if short {
                ((hp.z * tau).exp() * w, hp.n0.max(0) as usize)
            } else {
                (((hp.z - hp.first_high_energy()) * tau).exp() * w, shells_needed(hp.n0, s))
            };
            let axes: Vec<(Vec<f64>, Vec<Vec<f64>>)> =
                (0..3).map(|i| axis_potential_data(cutoff, nmax, s, omega, x[i], y[i], short)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            let mut tail = 0.0;
            for (ib, b) in basis.indices.iter().enumerate() {
                if coef[ib] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let b = b.0;
                let h = if short {
                    let mut v = axes[0].0[b[0]] * axes[1].0[b[1]] * axes[2].0[b[2]];
                    if hp.n0 >= 0 {
                        for m in &low_modes {
                            v -= axes[0].1[m[0]][b[0]] * axes[1].1[m[1]][b[1]] * axes[2].1[m[2]][b[2]];
                        }
                    }
                    v
                } else {
                    let seqs: Vec<Vec<f64>> = (0..3).map(|i| axes[i].1.iter().map(|r| r[b[i]]).collect()).collect();
                    let (total, last) = high_shell_sum([&seqs[0], &seqs[1], &seqs[2]], hp.n0, nmax, s);
                    tail += coef[ib].norm() * last.abs() * weight.norm() / (1.0 - (-SWITCH_TIME).exp());
                    total
                };
                acc += coef[ib] * h;
            }
            (acc * weight, tail)
        })
        .collect();
    let mut value = Complex64::new(0.0, 0.0);
    let mut tail = 0.0;
    for (v, t) in contributions {
        value += v;
        tail += t;
    }
    (value, tail)
}

/// High-mode part of the pointwise kernel
/// K(z)(y', y'') = ∫ w_z(τ) h_τ(y'−y'') M^>_τ(y', y'') dτ, plus a shell-truncation bound.
pub fn high_kernel_point(hp: HighPart, y1: [f64; 3], y2: [f64; 3], panel_order: usize) -> (Complex64, f64) {
    let omega = hp.omega;
    let tau_star = hp.tau_star();
    let d2: f64 = (0..3).map(|i| (y1[i] - y2[i]).powi(2)).sum();
    let tau_min = (d2 / 400.0).max(1e-14 / omega).min(0.5 * tau_star);
    let t_lo = (tau_min / tau_star).ln();
    let panels = (-t_lo).ceil().max(1.0) as usize;
    let mut nodes: Vec<(f64, f64, bool)> = composite_legendre(panel_order, t_lo, 0.0, panels)
        .into_iter()
        .map(|(t, w)| {
            let tau = tau_star * t.exp();
            (tau, tau * w, true)
        })
        .collect();
    nodes.extend(
        long_nodes(tau_star, hp.tau_max(), panel_order)
            .into_iter()
            .map(|(t, w)| (t, w, false)),
    );
    let low_modes: Vec<[usize; 3]> = (0..=hp.n0.max(-1))
        .flat_map(|nn| crate::oscillator::enumerate_shell(nn as usize))
        .map(|m| m.0)
        .collect();
    let scale = (0.5 * omega).sqrt();
    let xs: Vec<f64> = y1.iter().map(|v| v * scale).collect();
    let ys: Vec<f64> = y2.iter().map(|v| v * scale).collect();

    let parts: Vec<(Complex64, f64)> = nodes
        .par_iter()
        .map(|&(tau, w, short)| {
            let s = omega * tau;
            let heat = (4.0 * PI * tau).powf(-1.5) * (-d2 / (4.0 * tau)).exp();
            let (weight, nmax) = if short {
                (kernel_weight(tau, hp.z, hp.lambda) * w * heat, hp.n0.max(0) as usize)
            } else {
                let shifted = shifted_kernel_weight(tau, hp.z, hp.lambda, hp.first_high_energy());
                (shifted * w * heat, shells_needed(hp.n0, s))
            };
            // the long branch carries the mode decay in the shell sum
            let rate = if short { s } else { 0.0 };
            let modes: Vec<Vec<f64>> = (0..3)
                .map(|i| {
                    let a = hermite_functions(nmax, xs[i]);
                    let b = hermite_functions(nmax, ys[i]);
                    (0..=nmax).map(|m| scale * (-rate * m as f64).exp() * a[m] * b[m]).collect()
                })
                .collect();
            if short {
                let mut v = 1.0;
                for i in 0..3 {
                    let (x, y) = (xs[i], ys[i]);
                    let expo = -0.5 * (x - y).powi(2) / s.tanh() - x * y * (0.5 * s).tanh();
                    v *= scale * (PI * (-(-2.0 * s).exp_m1())).powf(-0.5) * expo.exp();
                }
                if hp.n0 >= 0 {
                    for m in &low_modes {
                        v -= modes[0][m[0]] * modes[1][m[1]] * modes[2][m[2]];
                    }
                }
                (weight * v, 0.0)
            } else {
                let (total, last) = high_shell_sum([&modes[0], &modes[1], &modes[2]], hp.n0, nmax, s);
                (weight * total, weight.norm() * last.abs() / (1.0 - (-SWITCH_TIME).exp()))
            }
        })
        .collect();
    let mut value = Complex64::new(0.0, 0.0);
    let mut tail = 0.0;
    for (v, t) in parts {
        value += v;
        tail += t;
    }
    (value, tail)
}
