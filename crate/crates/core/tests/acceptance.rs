//! Acceptance suite: one line per criterion, nonzero exit if a gating criterion fails.

mod common;

use std::time::Instant;

use common::crel;
use fermi_scatter::charge_kernel::*;
use fermi_scatter::cli_io::cache::{decode, encode};
use fermi_scatter::cli_io::{cmd_born, cmd_solve, CacheEvent, CacheKey, ChannelRequest, KernelCache, RunConfig};
use fermi_scatter::greens::{product_integral, BoundarySide};
use fermi_scatter::lap_checks::*;
use fermi_scatter::oscillator::*;
use fermi_scatter::scattering::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: String) -> Outcome {
    Outcome { pass, summary }
}

fn problem(cutoff: usize, alpha: f64) -> ScatteringProblem {
    let p = ModelParams::new(1.0, 10.0, alpha).unwrap();
    let basis = HermiteBasis::new(cutoff);
    let g = assemble_gamma_ref(&basis, &p, &GammaRefOptions::for_params(&p, 7)).unwrap();
    ScatteringProblem::new(p, basis, g).unwrap()
}

fn total_elastic_cross_section() -> Outcome {
    let start = Instant::now();
    let (a, omega) = (0.8, 1.0);
    let mut worst = 0.0f64;
    for ratio in [0.1, 1.0, 10.0] {
        let e = ratio * omega;
        let kin = Kinematics { energy: e, scattering_length: a, angular_order: 64 };
        let table = xsec_born(XsecKind::Elastic, kin, omega).unwrap();
        let closed = sigma_total_elastic(e, a, omega).unwrap();
        worst = worst.max((table.sigma_total - closed).abs() / closed);
    }
    let t = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && t < 1.0, format!("max rel err {worst:.2e} (tol 1e-8), {t:.3} s (limit 1 s)"))
}

fn shell_sum_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_418);
    let (a, omega) = (0.6, 1.2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let q: [f64; 3] = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let q2: f64 = q.iter().map(|v| v * v).sum();
        for n in 0..=5 {
            let summed: f64 =
                enumerate_shell(n).iter().map(|m| state_cross_section_from_ground(m, q, 1.1, 1.7, a, omega)).sum();
            let closed = shell_cross_section(n, 1.1, 1.7, q2, a, omega);
            worst = worst.max((summed - closed).abs() / closed);
        }
    }
    outcome(worst <= 1e-10, format!("max rel err {worst:.2e} over N <= 5, 10 transfers (tol 1e-10)"))
}

fn product_integral_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for a in [0.5, 1.0, 2.0] {
        for b in [0.5, 1.0, 2.0] {
            for d in [0.5, 1.0, 2.0] {
                worst = worst.max(crel(product_integral(a, b, d), common::product_integral_oracle(a, b, d)));
            }
        }
    }
    outcome(worst <= 1e-6, format!("max rel err {worst:.2e} on 27 triples (tol 1e-6)"))
}

fn agmon_grid() -> Outcome {
    let mut worst = 0.0f64;
    for mu in [0.3, 1.0, 2.5] {
        for beta in [0.5, 1.0, 2.0] {
            worst = worst.max(check_agmon(BoundarySide::Plus, mu, beta, 1e-6).unwrap().discrepancy);
        }
    }
    outcome(worst <= 1e-6, format!("max discrepancy {worst:.2e} on 3x3 grid (tol 1e-6)"))
}

fn resolvent_identity() -> Outcome {
    let basis = HermiteBasis::new(4);
    let mut pass = true;
    let mut parts = Vec::new();
    for (l1, l2) in [(5.0, 10.0), (10.0, 20.0)] {
        let r = check_ufficio(l1, l2, 1.0, &basis, 7, 10.0).unwrap();
        pass &= r.passed();
        parts.push(format!("({l1},{l2}) residual {:.2e} vs {:.2e}", r.discrepancy, r.tolerance));
    }
    outcome(pass, format!("{} at cutoff 4", parts.join(", ")))
}

fn born_gap_slope(base: &ScatteringProblem, out: &Channel, inp: &Channel) -> f64 {
    let gamma = base.gamma(BoundarySide::Plus, inp.energy(base.params.omega)).unwrap();
    let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&alpha| {
            let mut pr = base.clone();
            pr.params.alpha = alpha;
            let g = pr.amplitude_general_with(out, inp, &gamma).unwrap().value;
            let b = t_born(out, inp, &pr.params).unwrap().value;
            (alpha.ln(), (g - b).norm().ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

fn born_convergence() -> Outcome {
    let base = problem(4, 1.0);
    let e: f64 = 1.3;
    let inp = Channel::new([0.0, 0.0, e.sqrt()], MultiIndex::GROUND);
    let d = [0.7f64.sin(), 0.0, 0.7f64.cos()];
    let scale = |s: f64| [d[0] * s, d[1] * s, d[2] * s];
    let elastic = born_gap_slope(&base, &Channel::new(scale(e.sqrt()), MultiIndex::GROUND), &inp);
    let inelastic = born_gap_slope(&base, &Channel::new(scale((e - 1.0).sqrt()), MultiIndex([0, 0, 1])), &inp);
    let ok = |s: f64| (1.8..=2.2).contains(&s);
    outcome(ok(elastic) && ok(inelastic), format!("slopes elastic {elastic:.4}, inelastic {inelastic:.4} (range [1.8, 2.2])"))
}

fn free_density() -> Outcome {
    let comp = |n: [usize; 3], re: f64, im: f64, beta: f64| PacketComponent {
        n: MultiIndex(n),
        amplitude: Complex64::new(re, im),
        beta,
    };
    let one = Packet::new(vec![comp([0, 0, 0], 1.0, 0.0, 0.7)]).unwrap();
    let two = Packet::new(vec![comp([0, 0, 0], 0.6, 0.3, 0.7), comp([0, 1, 0], -0.2, 0.9, 1.4)]).unwrap();
    let r1 = check_free_density(0.8, 1.0, &one, 16, 1e-6).unwrap();
    let r2 = check_free_density(1.6, 1.0, &two, 16, 1e-6).unwrap();
    outcome(
        r1.passed() && r2.passed(),
        format!("one channel {:.2e}, two channels {:.2e} (tol 1e-6)", r1.discrepancy, r2.discrepancy),
    )
}

fn lap_ladder() -> Outcome {
    let probes = |pr: &ScatteringProblem, mu: f64| -> Vec<ChargeVector> {
        let k = mu.sqrt();
        [[0.0, 0.0, k], [k * 0.6, 0.0, k * 0.8]]
            .iter()
            .map(|&kv| trace_source_projection(&Channel::new(kv, MultiIndex::GROUND), &pr.basis, &pr.params))
            .collect()
    };
    let regular = problem(2, 20.0);
    let r = check_lap_convergence(1.3, &regular, &probes(&regular, 1.3), &LapOptions::default()).unwrap();

    // α chosen so that Γ⁺(μ*)+α is singular in the isolated (1,1,1) sector
    let mu_star = 0.01;
    let mut near = problem(3, 1.0);
    let gamma = near.gamma(BoundarySide::Plus, mu_star).unwrap();
    let i = near.basis.indices.iter().position(|n| *n == MultiIndex([1, 1, 1])).unwrap();
    near.params.alpha = -gamma.entries[(i, i)].re;
    let grid = [0.006, 0.008, 0.01, 0.012, 0.014];
    let scan =
        scan_singular_set(&grid, near.params.alpha, &near.basis, &near.params, &near.gamma_ref, &ScanOptions::default())
            .unwrap();
    let flagged = scan.iter().any(|s| s.flagged && s.mu == mu_star);
    let mu = mu_star + 5e-5;
    let s = check_lap_convergence(mu, &near, &probes(&near, mu), &LapOptions::default()).unwrap();
    let fails_flagged = !s.passed() && s.details["singular_candidate"] == true;
    outcome(
        r.passed() && flagged && fails_flagged,
        format!(
            "gap {:.2e} at mu = 1.3 (tol 1e-4); scan flags mu* = {mu_star}: {flagged}; fails with flag at mu* + 5e-5: {fails_flagged}",
            r.discrepancy
        ),
    )
}

fn basis_hygiene() -> Outcome {
    let mut gram = 0.0f64;
    for cutoff in 0..=8 {
        let g = HermiteBasis::new(cutoff).gram_matrix();
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                gram = gram.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    let omega = 1.3;
    let p = ModelParams::new(omega, 10.0, 1.0).unwrap();
    let h = 1e-2;
    let d2 = |f: &dyn Fn(f64) -> f64, x: f64| {
        (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
    };
    let grid: Vec<f64> = (0..5).map(|i| -2.0 + 1.0 * i as f64).collect();
    let mut residual = 0.0f64;
    for nn in 0..=4 {
        for n in enumerate_shell(nn) {
            let (mut res2, mut norm2) = (0.0, 0.0);
            for &a in &grid {
                for &b in &grid {
                    for &c in &grid {
                        let y = [a, b, c];
                        let value = eigenfunction_value(&n, y, &p);
                        let lap: f64 = (0..3)
                            .map(|i| {
                                let f = |t: f64| {
                                    let mut z = y;
                                    z[i] = t;
                                    eigenfunction_value(&n, z, &p)
                                };
                                d2(&f, y[i])
                            })
                            .sum();
                        let r2 = a * a + b * b + c * c;
                        let h_phi = -lap + 0.25 * omega * omega * r2 * value - 1.5 * omega * value;
                        res2 += (h_phi - omega * nn as f64 * value).powi(2);
                        norm2 += (omega * value).powi(2);
                    }
                }
            }
            residual = residual.max((res2 / norm2).sqrt());
        }
    }
    let counts = (0..=12).all(|n| enumerate_shell(n).len() == (n + 1) * (n + 2) / 2 && shell_size(n) == (n + 1) * (n + 2) / 2);
    outcome(
        gram <= 1e-12 && residual <= 1e-6 && counts,
        format!("gram {gram:.2e} (tol 1e-12), eigen residual {residual:.2e} (tol 1e-6), shell counts exact: {counts}"),
    )
}

fn coercivity_trend() -> Outcome {
    let basis = HermiteBasis::new(4);
    let mins: Vec<f64> = [5.0, 10.0, 20.0]
        .iter()
        .map(|&l| {
            let p = ModelParams::new(1.0, l, 1.0).unwrap();
            let g = assemble_gamma_ref(&basis, &p, &GammaRefOptions::for_params(&p, 7)).unwrap();
            min_hermitian_eigenvalue(&g.entries)
        })
        .collect();
    let increasing = mins.windows(2).all(|w| w[1] > w[0]);
    outcome(increasing, format!("smallest eigenvalues {:.4} < {:.4} < {:.4} at lambda 5, 10, 20", mins[0], mins[1], mins[2]))
}

fn determinism_and_persistence() -> Outcome {
    let runs: Vec<(Vec<u8>, Vec<u8>, Vec<u8>)> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = RunConfig { out_dir: dir.path().to_path_buf(), cutoff: 2, seed: 17, alpha: 5.0, ..RunConfig::default() };
            let born = cmd_born(&cfg, XsecKind::Elastic).unwrap();
            let solve = cmd_solve(&cfg, &[ChannelRequest::parse("0,0,0>0,0,0@0.6,0.2").unwrap()]).unwrap();
            (
                std::fs::read(born.csv.unwrap()).unwrap(),
                std::fs::read(born.json).unwrap(),
                std::fs::read(solve.json).unwrap(),
            )
        })
        .collect();
    let identical = runs[0] == runs[1];

    let p = ModelParams::new(1.0, 10.0, 1.0).unwrap();
    let k = assemble_K(BoundarySide::Plus, 1.3, &HermiteBasis::new(2), &p, &KernelOptions::default()).unwrap();
    let bytes = encode(&k).unwrap();
    let back = decode(&bytes).unwrap();
    let bit_exact = encode(&back).unwrap() == bytes
        && k.entries.iter().zip(back.entries.iter()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());

    let dir = tempfile::tempdir().unwrap();
    let cache = KernelCache::new(dir.path());
    let key = CacheKey {
        tag: k.meta.tag,
        mu: k.meta.energy,
        side: k.meta.side,
        lambda: k.meta.lambda,
        omega: k.meta.omega,
        cutoff: k.meta.cutoff,
        quad_order: k.meta.quad_order,
        tolerances: vec![],
    };
    cache.store(&key, &k).unwrap();
    std::fs::write(cache.path(&key), &bytes[..bytes.len() - 9]).unwrap();
    let rebuilt = match cache.get_or_build(&key, || Ok(k.clone())) {
        Ok((m, CacheEvent::Rebuilt)) => encode(&m).unwrap() == bytes && std::fs::read(cache.path(&key)).unwrap() == bytes,
        _ => false,
    };
    outcome(
        identical && bit_exact && rebuilt,
        format!("repeat runs identical: {identical}; cache round trip bit-exact: {bit_exact}; corrupted entry rebuilt: {rebuilt}"),
    )
}

fn volta_report() -> Outcome {
    let pr = problem(3, 5.0);
    let packet = Packet::new(vec![PacketComponent { n: MultiIndex::GROUND, amplitude: Complex64::new(1.0, 0.0), beta: 0.8 }])
        .unwrap();
    let r = check_volta(0.6, &packet, &pr, 12, 1e-2).unwrap();
    outcome(r.passed(), format!("relative gap {:.2e} (target 1e-2)", r.discrepancy))
}

fn main() {
    let criteria: Vec<(&str, bool, fn() -> Outcome)> = vec![
        ("1 total elastic cross section", true, total_elastic_cross_section),
        ("2 shell-sum identity", true, shell_sum_identity),
        ("3 two-center product integral", true, product_integral_oracle),
        ("4 free trace identity", true, agmon_grid),
        ("5 resolvent identity for gamma", true, resolvent_identity),
        ("6 Born convergence", true, born_convergence),
        ("7 free spectral density", true, free_density),
        ("8 limiting absorption ladder", true, lap_ladder),
        ("9 basis hygiene", true, basis_hygiene),
        ("10 coercivity trend", true, coercivity_trend),
        ("11 determinism and persistence", true, determinism_and_persistence),
        ("spectral density with interaction (non-gating)", false, volta_report),
    ];
    let mut failed = 0;
    for (name, gating, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let label = match (result.pass, gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        if !result.pass && gating {
            failed += 1;
        }
        println!("{label} [{name}] {} ({:.2} s)", result.summary, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
