//! Invariant and structure tables. The same computation backs
//! `thermolab check`.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thermolab::analysis::{
    chicone_criterion, chicone_criterion_third, period_ode_oracle, period_quadrature, twist_check,
};
use thermolab::dynamics::*;
use thermolab::integrators::*;
use thermolab::sections::*;

use super::{scheme_name, Context, Ctx, RunResult};
use crate::output::{OutputDir, Table};

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

struct Report {
    tables: Vec<(&'static str, Table)>,
    checks: Vec<CheckResult>,
}

impl Report {
    fn check(&mut self, name: &'static str, pass: bool, detail: String) {
        self.checks.push(CheckResult { name, pass, detail });
    }
}

const REVERSIBILITY_DT: f64 = 2.5e-3;
const REVERSIBILITY_STEPS: usize = 1000;
const REVERSIBILITY_TOL: f64 = 1e-8;
const DIVERGENCE_TOL: f64 = 1e-6;
const CONTROL_MIN: f64 = 1e-2;
const FIRST_INTEGRAL_TOL: f64 = 1e-9;
const PERIOD_REL_TOL: f64 = 1e-8;
const ROTATION_REL_TOL: f64 = 0.05;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn round_trip<const N: usize, S: Stepper<N>>(stepper: &S, x0: [f64; N]) -> [f64; N] {
    let mut x = x0;
    for _ in 0..REVERSIBILITY_STEPS {
        x = stepper.step(&x, REVERSIBILITY_DT);
    }
    x = reflect(&x);
    for _ in 0..REVERSIBILITY_STEPS {
        x = stepper.step(&x, REVERSIBILITY_DT);
    }
    reflect(&x)
}

fn reversibility(r: &mut Report, rng: &mut ChaCha8Rng, n: usize, eps: &[Epsilon]) {
    let mut t = Table::new(&[("system", "-"), ("eps", "1"), ("ics", "count"), ("max_error", "1")]);
    let mut worst: f64 = 0.0;
    for e in eps {
        let (mut nh, mut nhc): (f64, f64) = (0.0, 0.0);
        for _ in 0..n {
            let x: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let x3 = [x[0], x[1], x[2]];
            nh = nh.max(max_abs_diff(&round_trip(&NhSplitting(*e), x3), &x3));
            nhc = nhc.max(max_abs_diff(&round_trip(&NhcSplitting(*e), x), &x));
        }
        t.row(vec!["nh-splitting".into(), e.get().into(), n.into(), nh.into()]);
        t.row(vec!["nhc-splitting".into(), e.get().into(), n.into(), nhc.into()]);
        worst = worst.max(nh).max(nhc);
    }
    r.tables.push(("reversibility.csv", t));
    r.check(
        "reversibility",
        worst < REVERSIBILITY_TOL,
        format!("forward/reflect/forward/reflect deviation {worst:.3e} (< {REVERSIBILITY_TOL:e})"),
    );
}

fn divergence(r: &mut Report, rng: &mut ChaCha8Rng, n: usize) {
    let h = DIVERGENCE_STEP;
    let mut t = Table::new(&[
        ("system", "-"),
        ("beta", "1"),
        ("density_beta", "1"),
        ("points", "count"),
        ("max_abs_div", "1"),
    ]);
    let mut worst: f64 = 0.0;
    let mut weakest_control = f64::INFINITY;

    let e = Epsilon::new(0.7).expect("valid");
    let q_mass = 1.0 / e.squared();
    let nh = |z: &[f64]| nh_field(PhysState::new(z[0], z[1], z[2]), e).to_array().to_vec();
    let nhc = |z: &[f64]| {
        nhc_field(ChainState::new(z[0], z[1], z[2], z[3]), e)
            .to_array()
            .to_vec()
    };
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    for density_beta in [1.0, 2.0] {
        let rho_nh = |z: &[f64]| gibbs_density_nh(PhysState::new(z[0], z[1], z[2]), q_mass, density_beta);
        let rho_nhc = |z: &[f64]| gibbs_density_nhc(ChainState::new(z[0], z[1], z[2], z[3]), [q_mass; 2], density_beta);
        let d_nh = points
            .iter()
            .map(|z| measure_divergence(nh, rho_nh, &z[..3], h).abs())
            .fold(0.0, f64::max);
        let d_nhc = points
            .iter()
            .map(|z| measure_divergence(nhc, rho_nhc, z, h).abs())
            .fold(0.0, f64::max);
        t.row(vec![
            "nh".into(),
            1.0.into(),
            density_beta.into(),
            n.into(),
            d_nh.into(),
        ]);
        t.row(vec![
            "nhc".into(),
            1.0.into(),
            density_beta.into(),
            n.into(),
            d_nhc.into(),
        ]);
        if density_beta == 1.0 {
            worst = worst.max(d_nh).max(d_nhc);
        } else {
            weakest_control = weakest_control.min(d_nh).min(d_nhc);
        }
    }

    // two anharmonically coupled degrees of freedom at β = 0.8
    let beta = 0.8;
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
        let sys = GeneralSystem::new(vec![1.0, 2.5], beta, chain.clone(), potential()).expect("valid system");
        let field = |z: &[f64]| {
            if m == 1 {
                sys.nh_flat_field(z).expect("arity")
            } else {
                sys.nhc_flat_field(z).expect("arity")
            }
        };
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4 + m).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        for density_beta in [beta, 2.0 * beta] {
            let rho =
                GeneralSystem::new(vec![1.0, 2.5], density_beta, chain.clone(), potential()).expect("valid system");
            let d = points
                .iter()
                .map(|z| measure_divergence(field, |z: &[f64]| rho.flat_density(z), z, h).abs())
                .fold(0.0, f64::max);
            t.row(vec![
                format!("2dof-chain{m}").into(),
                beta.into(),
                density_beta.into(),
                n.into(),
                d.into(),
            ]);
            if density_beta == beta {
                worst = worst.max(d);
            } else {
                weakest_control = weakest_control.min(d);
            }
        }
    }
    r.tables.push(("divergence.csv", t));
    r.check(
        "invariant measure",
        worst < DIVERGENCE_TOL,
        format!("max |div(rho f)| {worst:.3e} (< {DIVERGENCE_TOL:e})"),
    );
    r.check(
        "wrong-temperature control",
        weakest_control > CONTROL_MIN,
        format!("smallest |div| with the wrong beta {weakest_control:.3e} (> {CONTROL_MIN:e})"),
    );
}

fn first_integral(r: &mut Report, rng: &mut ChaCha8Rng) -> thermolab::Result<()> {
    let spec = IntegratorSpec::new(1e-3, 100_000, 1, Scheme::Rk4)?;
    let ics: Vec<[f64; 2]> = (0..10)
        .map(|_| [rng.random_range(0.2..3.0), rng.random_range(-1.5..1.5)])
        .collect();
    let devs = ics
        .par_iter()
        .map(|x0| {
            let g0 = integral_g(x0[0], x0[1])?;
            let mut dev: f64 = 0.0;
            let mut bad = None;
            let mut obs = FnObserver(|_t: f64, x: &[f64; 2]| match integral_g(x[0], x[1]) {
                Ok(g) => dev = dev.max((g - g0).abs()),
                Err(e) => bad = Some(e),
            });
            integrate(&Rk4(Averaged), *x0, &spec, &mut [&mut obs])?;
            match bad {
                Some(e) => Err(e),
                None => Ok((g0, dev)),
            }
        })
        .collect::<Vec<_>>();
    let mut t = Table::new(&[
        ("tau0", "1"),
        ("alpha0", "1"),
        ("G0", "1"),
        ("t_end", "time"),
        ("max_abs_dG", "1"),
    ]);
    let mut worst: f64 = 0.0;
    for (x0, d) in ics.iter().zip(devs) {
        let (g0, dev) = d?;
        worst = worst.max(dev);
        t.row(vec![
            x0[0].into(),
            x0[1].into(),
            g0.into(),
            spec.duration().into(),
            dev.into(),
        ]);
    }
    r.tables.push(("first_integral.csv", t));
    r.check(
        "first integral",
        worst < FIRST_INTEGRAL_TOL,
        format!("max |G - G0| over t in [0, 100] {worst:.3e} (< {FIRST_INTEGRAL_TOL:e})"),
    );
    Ok(())
}

fn period(r: &mut Report) -> thermolab::Result<()> {
    let small = period_quadrature(1e-8)?.period;
    r.check(
        "small-amplitude period",
        (small - TAU).abs() <= 1e-4,
        format!("T(1e-8) - 2 pi = {:.3e} (|.| <= 1e-4)", small - TAU),
    );

    let mut t = Table::new(&[
        ("G", "1"),
        ("T_quadrature", "time"),
        ("T_ode", "time"),
        ("rel_diff", "1"),
    ]);
    let mut worst: f64 = 0.0;
    for g in [0.01, 0.1, 1.0, 4.0] {
        let a = period_quadrature(g)?.period;
        let b = period_ode_oracle(g)?.period;
        let rel = (a - b).abs() / b;
        worst = worst.max(rel);
        t.row(vec![g.into(), a.into(), b.into(), rel.into()]);
    }
    r.tables.push(("period.csv", t));
    r.check(
        "period oracle",
        worst < PERIOD_REL_TOL,
        format!("quadrature vs ODE relative difference {worst:.3e} (< {PERIOD_REL_TOL:e})"),
    );

    let grid: Vec<f64> = (0..50).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 49.0)).collect();
    let mut t = Table::new(&[("G", "1"), ("T", "time")]);
    for g in &grid {
        t.row(vec![(*g).into(), period_quadrature(*g)?.period.into()]);
    }
    r.tables.push(("twist.csv", t));
    let twist = twist_check(&grid)?;
    r.check(
        "twist",
        twist.monotone,
        format!(
            "T strictly increasing on [1e-3, 10], smallest step {:.3e}",
            twist.margin
        ),
    );

    let mut t = Table::new(&[("sigma", "1"), ("chicone", "1"), ("chicone_third_derivative", "1")]);
    let mut min = f64::INFINITY;
    for i in -3000..=3000 {
        let s = i as f64 * 1e-3;
        if s.abs() < 1e-3 {
            continue;
        }
        let c = chicone_criterion(s);
        min = min.min(c);
        if i % 10 == 0 {
            t.row(vec![s.into(), c.into(), chicone_criterion_third(s).into()]);
        }
    }
    r.tables.push(("chicone.csv", t));
    r.check(
        "convexity criterion",
        min > 0.0,
        format!("min over sigma in [-3, 3], |sigma| >= 1e-3: {min:.3e} (> 0)"),
    );
    Ok(())
}

fn diophantine(r: &mut Report) -> thermolab::Result<()> {
    const C0: f64 = 1e-3;
    const MU: f64 = 2.5;
    const L_MAX: u64 = 100;
    let eps = Epsilon::new(0.1)?;
    let flow = Rk4(NoseHooverAA(eps));
    let map = ReturnMap::new(
        flow,
        SectionSpec::angle(0),
        IntegratorSpec::new(1e-3, 100_000, 1, Scheme::Rk4)?,
    )?;
    let center = fixed_point(&map, [1.0, 0.0], FIXED_POINT_TOL)?.location;
    let spec = IntegratorSpec::new(1e-3, 100_000_000, 1, Scheme::Rk4)?;
    let taus = [1.1, 1.3, 1.5, 2.0];
    let rows = taus
        .par_iter()
        .map(|tau0| {
            let orbit = section_crossings(&flow, [0.0, *tau0, 0.0], SectionSpec::angle(0), &spec, 500)?;
            let w = rotation_number(&orbit.planar(1, 2), center)?;
            let g0 = integral_g(*tau0, 0.0)?;
            let predicted = TAU * eps.get() / period_quadrature(g0)?.period;
            Ok((*tau0, g0, w, predicted))
        })
        .collect::<Vec<thermolab::Result<_>>>();
    let mut t = Table::new(&[
        ("tau0", "1"),
        ("G0", "1"),
        ("omega", "1"),
        ("omega_stderr", "1"),
        ("omega_averaged", "1"),
        ("diophantine", "-"),
    ]);
    let mut worst: f64 = 0.0;
    for row in rows {
        let (tau0, g0, w, predicted) = row?;
        worst = worst.max((w.omega / predicted - 1.0).abs());
        let dio = diophantine_check(w.omega, C0, MU, L_MAX);
        t.row(vec![
            tau0.into(),
            g0.into(),
            w.omega.into(),
            w.stderr.into(),
            predicted.into(),
            dio.into(),
        ]);
    }
    r.tables.push(("diophantine.csv", t));
    r.check(
        "rotation numbers",
        worst < ROTATION_REL_TOL,
        format!(
            "eps = 0.1 rotation numbers vs 2 pi eps / T(G0): worst relative gap {worst:.3e} (< {ROTATION_REL_TOL}); \
             center ({:.6}, {:.6})",
            center[0], center[1]
        ),
    );
    Ok(())
}

fn compute(seed: u64, n: usize, eps: &[Epsilon]) -> thermolab::Result<Report> {
    let mut r = Report {
        tables: Vec::new(),
        checks: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reversibility(&mut r, &mut rng, n, eps);
    divergence(&mut r, &mut rng, n);
    first_integral(&mut r, &mut rng)?;
    period(&mut r)?;
    diophantine(&mut r)?;
    Ok(r)
}

/// The default diagnostics suite.
pub fn run_checks() -> RunResult<Vec<CheckResult>> {
    let eps = [Epsilon::new(0.1).expect("valid"), Epsilon::new(1.0).expect("valid")];
    Ok(compute(0, 100, &eps).ctx("diagnostics")?.checks)
}

pub fn run(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let seed = ctx.seed(0);
    let n = ctx.samples(100, 1)?;
    let eps = ctx.eps_list(&[0.1, 1.0])?;
    ctx.params
        .insert("scheme".into(), serde_json::json!(scheme_name(Scheme::Splitting)));
    let report = compute(seed, n, &eps).ctx("diagnostics")?;
    for (name, t) in &report.tables {
        out.table(name, t)?;
    }
    let mut t = Table::new(&[("check", "-"), ("pass", "-"), ("detail", "-")]);
    for c in &report.checks {
        // details are free text; keep the CSV single-column-safe
        t.row(vec![c.name.into(), c.pass.into(), c.detail.replace(',', ";").into()]);
        if !c.pass {
            ctx.warn(format!("check failed: {}: {}", c.name, c.detail));
        }
    }
    out.table("checks.csv", &t)?;
    Ok(())
}
