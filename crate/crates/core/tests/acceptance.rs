//! Acceptance gate. Every criterion prints one `PASS`/`FAIL` line to stderr
//! (uncaptured, so it shows up in plain `cargo test` output) and then
//! asserts.

use std::f64::consts::TAU;
use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thermolab::analysis::*;
use thermolab::dynamics::*;
use thermolab::ergodicity::*;
use thermolab::integrators::*;
use thermolab::sections::*;

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    let line = format!(
        "[acceptance] {} criterion {id:>2} ({title}): {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn eps(e: f64) -> Epsilon {
    Epsilon::new(e).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn round_trip<const N: usize, S: Stepper<N>>(stepper: &S, x0: [f64; N], dt: f64, n: usize) -> [f64; N] {
    let mut x = x0;
    for _ in 0..n {
        x = stepper.step(&x, dt);
    }
    x = reflect(&x);
    for _ in 0..n {
        x = stepper.step(&x, dt);
    }
    reflect(&x)
}

#[test]
fn criterion_01_reversibility() {
    const DT: f64 = 2.5e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for e in [0.1, 1.0] {
        let (nh, nhc) = (NhSplitting(eps(e)), NhcSplitting(eps(e)));
        for _ in 0..100 {
            let x: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let x3 = [x[0], x[1], x[2]];
            worst = worst.max(max_abs_diff(&round_trip(&nh, x3, DT, 1000), &x3));
            worst = worst.max(max_abs_diff(&round_trip(&nhc, x, DT, 1000), &x));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "reversibility",
        worst < 1e-8 && elapsed < Duration::from_secs(1),
        format!(
            "max deviation {worst:.3e} (< 1e-8), {} ms (< 1000 ms)",
            elapsed.as_millis()
        ),
    );
}

#[test]
fn criterion_02_invariant_measure() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = DIVERGENCE_STEP;
    let mut worst: f64 = 0.0;
    let mut controls = Vec::new();

    // scalar oscillator forms with Q = 1/ε²
    let e = eps(0.7);
    let q_mass = 1.0 / e.squared();
    let nh = |z: &[f64]| nh_field(PhysState::new(z[0], z[1], z[2]), e).to_array().to_vec();
    let nhc = |z: &[f64]| {
        nhc_field(ChainState::new(z[0], z[1], z[2], z[3]), e)
            .to_array()
            .to_vec()
    };
    let rho_nh = |beta: f64| move |z: &[f64]| gibbs_density_nh(PhysState::new(z[0], z[1], z[2]), q_mass, beta);
    let rho_nhc =
        |beta: f64| move |z: &[f64]| gibbs_density_nhc(ChainState::new(z[0], z[1], z[2], z[3]), [q_mass; 2], beta);
    let mut control_nh: f64 = 0.0;
    let mut control_nhc: f64 = 0.0;
    for _ in 0..100 {
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        worst = worst.max(measure_divergence(nh, rho_nh(1.0), &z[..3], h).abs());
        worst = worst.max(measure_divergence(nhc, rho_nhc(1.0), &z, h).abs());
        control_nh = control_nh.max(measure_divergence(nh, rho_nh(2.0), &z[..3], h).abs());
        control_nhc = control_nhc.max(measure_divergence(nhc, rho_nhc(2.0), &z, h).abs());
    }
    controls.push(control_nh);
    controls.push(control_nhc);

    // two degrees of freedom, anharmonic coupling, β ≠ 1, chains of 2 and 3
    let potential = || {
        Arc::new(FnPotential::new(
            |q: &[f64]| 0.5 * q[0] * q[0] + 0.25 * q[1].powi(4) + 0.3 * q[0] * q[1],
            |q: &[f64], g: &mut [f64]| {
                g[0] = q[0] + 0.3 * q[1];
                g[1] = q[1].powi(3) + 0.3 * q[0];
            },
        ))
    };
    for chain in [vec![1.3], vec![1.3, 0.6], vec![1.3, 0.6, 2.2]] {
        let m = chain.len();
        let sys = GeneralSystem::new(vec![1.0, 2.5], 0.8, chain.clone(), potential()).unwrap();
        let wrong = GeneralSystem::new(vec![1.0, 2.5], 1.6, chain, potential()).unwrap();
        let field = |z: &[f64]| {
            if m == 1 {
                sys.nh_flat_field(z).unwrap()
            } else {
                sys.nhc_flat_field(z).unwrap()
            }
        };
        let mut control: f64 = 0.0;
        for _ in 0..100 {
            let z: Vec<f64> = (0..4 + m).map(|_| rng.random_range(-1.5..1.5)).collect();
            worst = worst.max(measure_divergence(field, |z: &[f64]| sys.flat_density(z), &z, h).abs());
            control = control.max(measure_divergence(field, |z: &[f64]| wrong.flat_density(z), &z, h).abs());
        }
        controls.push(control);
    }
    let weakest_control = controls.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        2,
        "invariant measure",
        worst < 1e-6 && weakest_control > 1e-2,
        format!("max |div| {worst:.3e} (< 1e-6), weakest wrong-β control {weakest_control:.3e} (> 1e-2)"),
    );
}

#[test]
fn criterion_03_first_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = IntegratorSpec::new(1e-3, 100_000, 1, Scheme::Rk4).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x0 = [rng.random_range(0.2..3.0), rng.random_range(-1.5..1.5)];
        let g0 = integral_g(x0[0], x0[1]).unwrap();
        let mut dev: f64 = 0.0;
        let mut obs = FnObserver(|_t: f64, x: &[f64; 2]| {
            dev = dev.max((integral_g(x[0], x[1]).unwrap() - g0).abs());
        });
        integrate(&Rk4(Averaged), x0, &spec, &mut [&mut obs]).unwrap();
        worst = worst.max(dev);
    }
    verdict(
        3,
        "first integral",
        worst < 1e-9,
        format!("max |ΔG| {worst:.3e} over t ∈ [0, 100] (< 1e-9)"),
    );
}

#[test]
fn criterion_04_period_and_twist() {
    let start = Instant::now();
    let small = period_quadrature(1e-8).unwrap().period;
    let harmonic_ok = (small - TAU).abs() <= 1e-4;

    let mut worst_rel: f64 = 0.0;
    for g in [0.01, 0.1, 1.0, 4.0] {
        let a = period_quadrature(g).unwrap().period;
        let b = period_ode_oracle(g).unwrap().period;
        worst_rel = worst_rel.max((a - b).abs() / b);
    }

    let grid: Vec<f64> = (0..50).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 49.0)).collect();
    let twist = twist_check(&grid).unwrap();

    let mut chicone_min = f64::INFINITY;
    let mut s: f64 = -3.0;
    while s <= 3.0 + 1e-12 {
        if s.abs() >= 1e-3 {
            chicone_min = chicone_min.min(chicone_criterion(s));
        }
        s += 1e-3;
    }
    let elapsed = start.elapsed();
    verdict(
        4,
        "period and twist",
        harmonic_ok && worst_rel < 1e-8 && twist.monotone && chicone_min > 0.0 && elapsed < Duration::from_secs(10),
        format!(
            "T(1e-8) − 2π = {:.2e}, quadrature/ODE rel {worst_rel:.2e} (< 1e-8), monotone {} (margin {:.3e}), \
             min Chicone {chicone_min:.3e}, {} ms",
            small - TAU,
            twist.monotone,
            twist.margin,
            elapsed.as_millis()
        ),
    );
}

#[test]
fn criterion_05_kam_confinement() {
    let flow = Rk4(NoseHooverAA(eps(0.1)));
    let spec = IntegratorSpec::new(0.01, 100_000_000, 1, Scheme::Rk4).unwrap();
    let taus = [0.5, 1.5, 2.0, 2.42, 3.0, 4.0];
    let results: Vec<(f64, f64, bool)> = taus
        .par_iter()
        .map(|tau| {
            let orbit = section_crossings(&flow, [0.0, *tau, 0.0], SectionSpec::angle(0), &spec, 2000).unwrap();
            let g0 = integral_g(*tau, 0.0).unwrap();
            let dev = orbit
                .states
                .iter()
                .map(|x| (integral_g(x[1], x[2]).unwrap() - g0).abs())
                .fold(0.0, f64::max);
            (*tau, dev, orbit.complete)
        })
        .collect();
    let pass = results.iter().all(|(_, d, c)| *c && *d <= 0.05);
    let detail = results
        .iter()
        .map(|(t, d, _)| format!("τ₀={t}: {d:.2e}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        5,
        "KAM confinement",
        pass,
        format!("max |G − G₀| per orbit (≤ 0.05): {detail}"),
    );
}

#[test]
fn criterion_06_island_chain_and_ring() {
    // reference run: 10⁶ splitting steps of 10⁻³ from (2.2, 0, 0)
    const QP_MIN: f64 = 0.18175900718447127;
    const QP_MAX: f64 = 9.186921626399643;

    let flow = Rk4(NoseHooverAA(eps(1.0)));
    let spec = IntegratorSpec::new(0.01, 100_000_000, 1, Scheme::Rk4).unwrap();
    let orbit = section_crossings(&flow, [0.0, 2.42, 0.0], SectionSpec::angle(0), &spec, 700).unwrap();
    let chain = island_clusters(&orbit.planar(1, 2), 12);

    let ring_spec = IntegratorSpec::new(1e-3, 1_000_000, 1, Scheme::Splitting).unwrap();
    let mut conf = Confinement::cartesian(0, 1);
    let run = integrate(&NhSplitting(eps(1.0)), [2.2, 0.0, 0.0], &ring_spec, &mut [&mut conf]).unwrap();
    let r = conf.report();
    let ring_ok = run.steps_taken == 1_000_000
        && r.qp_min > 0.0
        && (r.qp_min / QP_MIN - 1.0).abs() < 1e-9
        && (r.qp_max / QP_MAX - 1.0).abs() < 1e-9;
    verdict(
        6,
        "island chain",
        orbit.complete && orbit.len() >= 700 && chain.k == 7 && ring_ok,
        format!(
            "{} returns, k = {} (stride {}), ring q²+p² ∈ [{:.6}, {:.6}]",
            orbit.len(),
            chain.k,
            chain.stride,
            r.qp_min,
            r.qp_max
        ),
    );
}

#[test]
fn criterion_07_chain_action_floor() {
    let mut averaged = Confinement::action(0);
    let spec = IntegratorSpec::new(1e-3, 1_000_000, 1, Scheme::Rk4).unwrap();
    integrate(&Rk4(ChainAveraged), [0.605, 0.0, 0.0], &spec, &mut [&mut averaged]).unwrap();
    let floor_avg = averaged.report().tau_min;

    let mut full = Confinement::cartesian(0, 1);
    let spec = IntegratorSpec::new(2.5e-3, 1_000_000, 1, Scheme::Splitting).unwrap();
    integrate(
        &NhcSplitting(eps(1.0 / 10f64.sqrt())),
        [1.1, 0.0, 0.0, 0.0],
        &spec,
        &mut [&mut full],
    )
    .unwrap();
    let floor_full = full.report().tau_min;

    verdict(
        7,
        "chain action floor",
        (floor_avg - 0.188).abs() <= 0.01 && (floor_full - 0.194).abs() <= 0.01,
        format!("averaged τ_min {floor_avg:.5} (0.188 ± 0.01), full τ_min {floor_full:.5} (0.194 ± 0.01)"),
    );
}

const ENSEMBLE_STEPS: u64 = 10_000_000;
const CHECKPOINTS: [u64; 5] = [100_000, 300_000, 1_000_000, 3_000_000, 10_000_000];
const ENSEMBLE_Q0: [f64; 8] = [0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.8, 2.2];

struct Member {
    q0: f64,
    curve: Vec<(u64, f64)>,
    histograms: PhaseHistograms,
    kinetic: KineticAverage,
}

/// Unit-coupling chain runs shared by the distribution and discrepancy
/// criteria; the initial state counts as the first sample.
fn ensemble() -> &'static [Member] {
    static RUNS: OnceLock<Vec<Member>> = OnceLock::new();
    RUNS.get_or_init(|| {
        ENSEMBLE_Q0
            .par_iter()
            .map(|q0| {
                let spec = IntegratorSpec::new(2.5e-3, ENSEMBLE_STEPS - 1, 1, Scheme::Splitting).unwrap();
                let mut disc = DiscrepancyObserver::new(DiscrepancyGrid::default(), &CHECKPOINTS).unwrap();
                let mut histograms = PhaseHistograms::new(100, DEFAULT_R_CUTOFF).unwrap();
                let mut kinetic = KineticAverage::default();
                integrate(
                    &NhcSplitting(eps(1.0)),
                    [*q0, 0.0, 0.0, 0.0],
                    &spec,
                    &mut [&mut disc, &mut histograms, &mut kinetic],
                )
                .unwrap();
                Member {
                    q0: *q0,
                    curve: disc.entries().to_vec(),
                    histograms,
                    kinetic,
                }
            })
            .collect()
    })
}

#[test]
fn criterion_08_gibbs_marginals() {
    let run = ensemble().iter().find(|m| m.q0 == 1.1).unwrap();
    let angular = distribution_error(&run.histograms.angle, theo_angular_pdf, Normalization::Total);
    let amplitude = distribution_error(&run.histograms.amplitude, theo_amplitude_pdf, Normalization::InRange);
    let kinetic = run.kinetic.mean().unwrap();
    verdict(
        8,
        "Gibbs marginals",
        angular <= 0.004 && amplitude < 0.01 && (kinetic - 1.0).abs() <= 0.02,
        format!(
            "{} samples: angular sup error {angular:.4e} (≤ 0.004), amplitude sup error {amplitude:.4e} (< 0.01), ⟨p²⟩ {kinetic:.5} (1 ± 0.02)",
            run.kinetic.count()
        ),
    );
}

#[test]
fn criterion_09_discrepancy_decay() {
    let runs = ensemble();
    let complete = runs.iter().all(|m| m.curve.len() == CHECKPOINTS.len());
    let mean: Vec<(u64, f64)> = CHECKPOINTS
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, runs.iter().map(|m| m.curve[i].1).sum::<f64>() / runs.len() as f64))
        .collect();
    let fit = lms_fit(&mean).unwrap();
    verdict(
        9,
        "discrepancy decay",
        complete && (0.40..=0.60).contains(&fit.a),
        format!(
            "mean D_N ≈ {:.3}/N^{:.4} (a ± {:.4}), a ∈ [0.40, 0.60]",
            fit.c, fit.a, fit.a_stderr
        ),
    );
}

#[test]
fn criterion_10_power_law_fit() {
    let entries: Vec<(u64, f64)> = [1e7f64, 3e7, 1e8, 3e8, 1e9]
        .iter()
        .map(|n| (*n as u64, 11.1 / n.powf(0.483)))
        .collect();
    let fit = lms_fit(&entries).unwrap();
    let (dc, da) = ((fit.c - 11.1).abs(), (fit.a - 0.483).abs());
    verdict(
        10,
        "power-law fit",
        dc < 1e-6 && da < 1e-6,
        format!("C = {:.10}, a = {:.10} (errors {dc:.1e}, {da:.1e})", fit.c, fit.a),
    );
}

/// Direct count over every grid corner and every sample.
fn brute_force_discrepancy(samples: &[AngleRadiusSample], grid: DiscrepancyGrid) -> f64 {
    let kept: Vec<&AngleRadiusSample> = samples.iter().filter(|s| s.r <= grid.r_cutoff).collect();
    let total = kept.len() as f64;
    let mut sup: f64 = 0.0;
    for k in 1..=grid.n {
        let theta = grid.theta(k);
        for l in 1..=grid.n {
            let r = grid.radius(l);
            let inside = kept.iter().filter(|s| s.theta <= theta && s.r <= r).count();
            sup = sup.max((inside as f64 / total - theo_cdf(theta, r)).abs());
        }
    }
    sup
}

#[test]
fn criterion_11_discrepancy_oracle() {
    let grid = DiscrepancyGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=1000);
        let samples: Vec<AngleRadiusSample> = (0..n)
            .map(|_| {
                // a quarter of the samples sit exactly on grid lines
                let theta = if rng.random_bool(0.25) {
                    grid.theta(rng.random_range(1..grid.n))
                } else {
                    rng.random_range(0.0..TAU)
                };
                let r = if rng.random_bool(0.25) {
                    grid.radius(rng.random_range(1..=grid.n))
                } else {
                    rng.random_range(0.0..4.5)
                };
                AngleRadiusSample::new(theta, r)
            })
            .collect();
        if !samples.iter().any(|s| s.r <= grid.r_cutoff) {
            continue;
        }
        let fast = star_discrepancy(&samples, grid).unwrap();
        if fast.to_bits() != brute_force_discrepancy(&samples, grid).to_bits() {
            mismatches += 1;
        }
    }
    verdict(
        11,
        "discrepancy oracle",
        mismatches == 0,
        format!("{mismatches} of 50 samples disagree"),
    );
}
