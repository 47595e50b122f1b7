use std::f64::consts::TAU;

use thermolab::dynamics::{integral_g, NoseHooverAA};
use thermolab::integrators::{Rk4, Scheme};
use thermolab::sections::{island_clusters, section_crossings, SectionSpec};

use super::{label, par_map, spec, Context, Ctx, InitialDefault, RunResult};
use crate::output::{OutputDir, Table};

const TAUS: &[f64] = &[0.2, 0.5, 1.0, 1.5, 2.0, 2.42, 3.0, 4.0];

/// Step budget per orbit, generous against the `2π + O(ε)` return time.
fn budget(n_crossings: usize, dt: f64) -> u64 {
    (20.0 * TAU / dt).ceil() as u64 * n_crossings as u64
}

pub fn run(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let eps = ctx.eps_list(&[0.1, 1.0])?;
    let inits = ctx.initial::<3>(InitialDefault::Tau(TAUS), Some(|t| [0.0, t, 0.0]), None)?;
    ctx.scheme(Scheme::Rk4, &[Scheme::Rk4])?;
    let dt = ctx.dt(0.01)?;
    let n_crossings = ctx.n_crossings(2000, 100_000)?;
    let n_steps = ctx.n_steps(budget(n_crossings, dt), budget(n_crossings, dt))?;
    let k_max = ctx.k_max(12)?;
    let spec = spec(dt, n_steps, 1, Scheme::Rk4);

    let runs: Vec<_> = eps
        .iter()
        .flat_map(|e| inits.iter().map(move |i| (*e, i.clone())))
        .collect();
    let orbits = par_map(&runs, |(e, init)| {
        let name = label(*e, &init.label);
        let orbit = section_crossings(
            &Rk4(NoseHooverAA(*e)),
            init.state,
            SectionSpec::angle(0),
            &spec,
            n_crossings,
        )
        .ctx(&name)?;
        Ok((name, orbit))
    })?;

    let mut summary = Table::new(&[
        ("eps", "1"),
        ("tau0", "1"),
        ("alpha0", "1"),
        ("G0", "1"),
        ("returns", "count"),
        ("complete", "-"),
        ("max_abs_dG", "1"),
        ("islands", "count"),
        ("island_stride", "count"),
        ("skipped_tangential", "count"),
        ("skipped_backward", "count"),
        ("file", "-"),
    ]);
    for ((e, init), (name, orbit)) in runs.iter().zip(&orbits) {
        let [_, tau0, alpha0] = init.state;
        let g0 = integral_g(tau0, alpha0).ctx(name)?;
        let mut t = Table::new(&[("n", "count"), ("t", "time"), ("tau", "1"), ("alpha", "1"), ("G", "1")]);
        let mut max_dg: f64 = 0.0;
        for (n, (x, time)) in orbit.states.iter().zip(&orbit.times).enumerate() {
            let g = integral_g(x[1], x[2]).ctx(name)?;
            max_dg = max_dg.max((g - g0).abs());
            t.row(vec![n.into(), (*time).into(), x[1].into(), x[2].into(), g.into()]);
        }
        let file = format!("orbit_{name}.csv");
        out.table(&file, &t)?;
        let chain = island_clusters(&orbit.planar(1, 2), k_max);
        if !orbit.complete {
            ctx.warn(format!(
                "{name}: {} of {n_crossings} returns within {n_steps} steps",
                orbit.len()
            ));
        }
        if orbit.skipped_tangential + orbit.skipped_backward > 0 {
            ctx.warn(format!(
                "{name}: skipped {} tangential and {} backward crossings",
                orbit.skipped_tangential, orbit.skipped_backward
            ));
        }
        summary.row(vec![
            e.get().into(),
            tau0.into(),
            alpha0.into(),
            g0.into(),
            orbit.len().into(),
            orbit.complete.into(),
            max_dg.into(),
            chain.k.into(),
            chain.stride.into(),
            orbit.skipped_tangential.into(),
            orbit.skipped_backward.into(),
            file.into(),
        ]);
    }
    out.table("orbits.csv", &summary)?;
    Ok(())
}
