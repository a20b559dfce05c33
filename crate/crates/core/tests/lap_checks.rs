mod common;

use std::f64::consts::PI;

use common::rel;
use fermi_scatter::charge_kernel::*;
use fermi_scatter::error::Error;
use fermi_scatter::greens::BoundarySide;
use fermi_scatter::lap_checks::*;
use fermi_scatter::oscillator::*;
use fermi_scatter::scattering::{trace_source_projection, ScatteringProblem};
use num_complex::Complex64;
use proptest::prelude::*;

fn problem(cutoff: usize, alpha: f64) -> ScatteringProblem {
    let p = ModelParams::new(1.0, 10.0, alpha).unwrap();
    let basis = HermiteBasis::new(cutoff);
    let g = assemble_gamma_ref(&basis, &p, &GammaRefOptions::for_params(&p, 7)).unwrap();
    ScatteringProblem::new(p, basis, g).unwrap()
}

fn component(n: [usize; 3], re: f64, im: f64, beta: f64) -> PacketComponent {
    PacketComponent { n: MultiIndex(n), amplitude: Complex64::new(re, im), beta }
}

fn probes(pr: &ScatteringProblem, mu: f64) -> Vec<ChargeVector> {
    let k = mu.sqrt();
    [[0.0, 0.0, k], [k * 0.6, 0.0, k * 0.8], [0.0, -k, 0.0]]
        .iter()
        .map(|&kv| trace_source_projection(&Channel::new(kv, MultiIndex::GROUND), &pr.basis, &pr.params))
        .collect()
}

#[test]
fn gaussian_transform_is_the_unitary_fourier_transform() {
    // ∫ |f̂|² d³k = ∫ |f|² d³x = (π/(2β))^{3/2}
    for beta in [0.3f64, 1.0, 2.2] {
        let radial: f64 = common::legendre_panels(20, 0.0, 30.0 * beta.sqrt(), 8)
            .iter()
            .map(|&(k, w)| w * 4.0 * PI * k * k * gaussian_transform(beta, k * k).powi(2))
            .sum();
        assert!(rel(radial, (PI / (2.0 * beta)).powf(1.5)) <= 1e-12);
    }
}

#[test]
fn agmon_trace_identity_on_a_grid() {
    for mu in [0.2, 1.0, 3.5] {
        for beta in [0.25, 1.0, 4.0] {
            for side in [BoundarySide::Plus, BoundarySide::Minus] {
                let r = check_agmon(side, mu, beta, 1e-6).unwrap();
                assert!(r.passed(), "μ={mu} β={beta} {side:?}: {:e}", r.discrepancy);
                assert!(r.discrepancy <= 1e-6);
                let lhs = r.details["lhs"].as_f64().unwrap();
                assert_eq!(lhs > 0.0, side == BoundarySide::Plus);
            }
        }
    }
}

#[test]
fn agmon_rejects_bad_inputs() {
    assert!(matches!(check_agmon(BoundarySide::Plus, -0.5, 1.0, 1e-6), Err(Error::InvalidParams(_))));
    assert!(matches!(check_agmon(BoundarySide::Plus, 0.0, 1.0, 1e-6), Err(Error::InvalidParams(_))));
    assert!(check_agmon(BoundarySide::NegativeReal, -0.5, 1.0, 1e-6).is_err());
}

#[test]
fn free_density_one_and_two_channels() {
    let one = Packet::new(vec![component([0, 0, 0], 1.0, 0.0, 0.7)]).unwrap();
    let r = check_free_density(0.8, 1.0, &one, 16, 1e-6).unwrap();
    assert!(r.passed() && r.discrepancy <= 1e-6, "{:e}", r.discrepancy);

    let two = Packet::new(vec![component([0, 0, 0], 0.6, 0.3, 0.7), component([0, 1, 0], -0.2, 0.9, 1.4)]).unwrap();
    let r = check_free_density(1.6, 1.0, &two, 16, 1e-6).unwrap();
    assert!(r.passed() && r.discrepancy <= 1e-6, "{:e}", r.discrepancy);
    // both channels contribute
    let only_ground = Packet::new(vec![two.components[0]]).unwrap();
    let r1 = check_free_density(1.6, 1.0, &only_ground, 16, 1e-6).unwrap();
    assert!(r.details["lhs"].as_f64().unwrap() > 1.01 * r1.details["lhs"].as_f64().unwrap());
}

#[test]
fn free_density_vanishes_below_the_channel_threshold() {
    let excited = Packet::new(vec![component([1, 0, 0], 1.0, 0.0, 1.0)]).unwrap();
    let r = check_free_density(0.5, 1.0, &excited, 8, 1e-6).unwrap();
    assert_eq!(r.details["lhs"].as_f64().unwrap(), 0.0);
    assert_eq!(r.details["rhs"].as_f64().unwrap(), 0.0);
    assert!(r.passed());
}

#[test]
fn packets_reject_repeated_states_and_bad_widths() {
    assert!(Packet::new(vec![component([0, 0, 0], 1.0, 0.0, 1.0), component([0, 0, 0], 1.0, 0.0, 2.0)]).is_err());
    assert!(Packet::new(vec![component([0, 0, 0], 1.0, 0.0, 0.0)]).is_err());
    assert!(Packet::new(vec![component([0, 0, 0], 1.0, 0.0, -1.0)]).is_err());
}

#[test]
fn resolvent_identity_for_gamma_at_cutoff_four() {
    let basis = HermiteBasis::new(4);
    for (l1, l2) in [(5.0, 10.0), (10.0, 20.0)] {
        let r = check_ufficio(l1, l2, 1.0, &basis, 7, 10.0).unwrap();
        assert!(r.passed(), "({l1}, {l2}): {:e} > {:e}", r.discrepancy, r.tolerance);
        assert!(r.tolerance > 0.0);
        // the residual is small against the entries themselves
        assert!(r.discrepancy <= 1e-6 * r.details["scale"].as_f64().unwrap());
    }
    let same = check_ufficio(10.0, 10.0, 1.0, &HermiteBasis::new(1), 7, 10.0).unwrap();
    assert!(same.passed());
}

#[test]
fn lap_ladder_converges_for_large_alpha() {
    let pr = problem(2, 20.0);
    let mu = 1.3;
    let r = check_lap_convergence(mu, &pr, &probes(&pr, mu), &LapOptions::default()).unwrap();
    assert!(r.passed(), "{:e} {}", r.discrepancy, r.details);
    assert!(r.discrepancy <= 1e-4);
    assert_eq!(r.details["singular_candidate"], false);
    let gaps: Vec<f64> = r.details["ladder_gaps"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    // the raw gaps shrink roughly linearly in ε and the extrapolation beats the smallest of them
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(r.discrepancy < 0.1 * gaps.last().unwrap());
}

/// α placing an eigenvalue of Γ⁺(μ*)+α at zero in the isolated (1,1,1) parity sector.
fn singular_alpha(base: &ScatteringProblem, mu_star: f64) -> f64 {
    let gamma = base.gamma(BoundarySide::Plus, mu_star).unwrap();
    let i = base.basis.indices.iter().position(|n| *n == MultiIndex([1, 1, 1])).unwrap();
    -gamma.entries[(i, i)].re
}

#[test]
fn lap_ladder_fails_near_a_singular_energy() {
    let mu_star = 0.01;
    let base = problem(3, 1.0);
    let alpha = singular_alpha(&base, mu_star);
    let mut pr = base.clone();
    pr.params.alpha = alpha;
    // the scan flags the constructed energy
    let grid = [0.006, 0.008, 0.01, 0.012, 0.014];
    let scan = scan_singular_set(&grid, alpha, &pr.basis, &pr.params, &pr.gamma_ref, &ScanOptions::default()).unwrap();
    assert!(scan.iter().any(|s| s.flagged && (s.mu - mu_star).abs() < 1e-12), "{scan:?}");
    for mu in [mu_star, mu_star + 5e-5, mu_star - 8e-5] {
        let r = check_lap_convergence(mu, &pr, &probes(&pr, mu), &LapOptions::default()).unwrap();
        assert!(!r.passed(), "μ = {mu}");
        assert_eq!(r.details["singular_candidate"], true, "μ = {mu}");
    }
    // the same energy with a regular α passes
    let mut regular = base.clone();
    regular.params.alpha = 20.0;
    let r = check_lap_convergence(mu_star, &regular, &probes(&regular, mu_star), &LapOptions::default()).unwrap();
    assert_eq!(r.details["singular_candidate"], false);
}

#[test]
fn packet_trace_sides_are_conjugate_for_real_packets() {
    let basis = HermiteBasis::new(2);
    let packet = Packet::new(vec![component([0, 0, 0], 1.0, 0.0, 0.8), component([0, 0, 1], 0.5, 0.0, 1.2)]).unwrap();
    let plus = packet_trace(BoundarySide::Plus, 1.4, &packet, &basis, 1.0);
    let minus = packet_trace(BoundarySide::Minus, 1.4, &packet, &basis, 1.0);
    for (p, m) in plus.coefficients.iter().zip(&minus.coefficients) {
        assert!((p - m.conj()).norm() <= 1e-13 * plus.norm());
    }
    // parity: an even packet has no overlap with odd basis states
    let ground_only = Packet::new(vec![packet.components[0]]).unwrap();
    let t = packet_trace(BoundarySide::Plus, 1.4, &ground_only, &basis, 1.0);
    for (n, c) in basis.indices.iter().zip(&t.coefficients) {
        if n.0.iter().any(|m| m % 2 == 1) {
            assert!(c.norm() <= 1e-14 * t.norm(), "{n}");
        }
    }
}

#[test]
fn volta_identity_is_reported() {
    let pr = problem(3, 5.0);
    let packet = Packet::new(vec![component([0, 0, 0], 1.0, 0.0, 0.8)]).unwrap();
    let r = check_volta(0.6, &packet, &pr, 12, 1e-2).unwrap();
    assert_eq!(r.check, "volta");
    assert!(r.discrepancy.is_finite());
    let lhs = r.details["lhs"].as_f64().unwrap();
    let rhs = r.details["rhs"].as_f64().unwrap();
    assert!(lhs > 0.0 && rhs > 0.0);
    eprintln!("volta discrepancy {:e}", r.discrepancy);
}

#[test]
fn reports_serialize_with_status_and_units() {
    let r = check_agmon(BoundarySide::Plus, 1.0, 1.0, 1e-6).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["check"], "agmon");
    assert_eq!(v["units"], "relative");
    assert!(v["status"].is_string());
    assert!(v["runtime_s"].as_f64().unwrap() >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn agmon_holds_across_parameters(mu in 0.05f64..6.0, beta in 0.1f64..5.0) {
        let r = check_agmon(BoundarySide::Plus, mu, beta, 1e-6).unwrap();
        prop_assert!(r.discrepancy <= 1e-6, "{:e}", r.discrepancy);
    }

    #[test]
    fn free_density_is_nonnegative(mu in 0.1f64..3.0, beta in 0.3f64..3.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let packet = Packet::new(vec![component([0, 0, 0], re, im, beta), component([1, 0, 0], im, re, beta * 1.5)]).unwrap();
        let r = check_free_density(mu, 1.0, &packet, 16, 1e-6).unwrap();
        prop_assert!(r.details["lhs"].as_f64().unwrap() >= 0.0);
        prop_assert!(r.discrepancy <= 1e-6, "{:e}", r.discrepancy);
    }
}
