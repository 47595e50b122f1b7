use thermolab::ergodicity::{lms_fit, DiscrepancyGrid, DiscrepancyObserver, DEFAULT_GRID, DEFAULT_R_CUTOFF};
use thermolab::integrators::{integrate, Scheme};

use super::{label, par_map, q_axis, spec, Context, Ctx, InitialDefault, Nhc, RunResult};
use crate::output::{OutputDir, Table};

const Q0: &[f64] = &[0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.8, 2.2];

const CHECKPOINTS: &[u64] = &[
    100_000,
    300_000,
    1_000_000,
    3_000_000,
    10_000_000,
    30_000_000,
    100_000_000,
    300_000_000,
    1_000_000_000,
];

pub fn run(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let eps = ctx.eps_list(&[1.0])?;
    let inits = ctx.initial::<4>(InitialDefault::Q0(Q0), None, Some(q_axis::<4>))?;
    let scheme = ctx.scheme(Scheme::Splitting, &[Scheme::Splitting, Scheme::Rk4])?;
    let dt = ctx.dt(2.5e-3)?;
    // the initial state is a sample too
    let n_steps = ctx.n_steps(10_000_000 - 1, 1_000_000_000 - 1)?;
    let checkpoints = ctx.checkpoints(CHECKPOINTS, n_steps + 1)?;
    let grid_n = ctx.grid_n(DEFAULT_GRID)?;
    let r_cutoff = ctx.r_cutoff(DEFAULT_R_CUTOFF)?;
    let grid = DiscrepancyGrid::new(grid_n, r_cutoff).map_err(|e| ctx.err("analysis.grid_n", e.to_string()))?;
    let spec = spec(dt, n_steps, 1, scheme);

    let runs: Vec<_> = eps
        .iter()
        .flat_map(|e| inits.iter().map(move |i| (label(*e, &i.label), *e, i.clone())))
        .collect();
    let curves = par_map(&runs, |(name, e, init)| {
        let mut obs = DiscrepancyObserver::new(grid, &checkpoints).ctx(name)?;
        integrate(&Nhc::new(scheme, *e), init.state, &spec, &mut [&mut obs]).ctx(name)?;
        Ok(obs.entries().to_vec())
    })?;

    let mut all = Table::new(&[("run", "-"), ("N", "count"), ("D", "1")]);
    for ((name, _, _), curve) in runs.iter().zip(&curves) {
        for (n, d) in curve {
            all.row(vec![name.as_str().into(), (*n).into(), (*d).into()]);
        }
    }
    out.table("curves.csv", &all)?;

    let mean: Vec<(u64, f64)> = checkpoints
        .iter()
        .enumerate()
        .map(|(k, n)| (*n, curves.iter().map(|c| c[k].1).sum::<f64>() / curves.len() as f64))
        .collect();
    let fit = if mean.len() >= 3 {
        Some(lms_fit(&mean).ctx("mean discrepancy fit")?)
    } else {
        ctx.warn(format!("{} checkpoint(s): too few for a power-law fit", mean.len()));
        None
    };

    let mut t = Table::new(&[("N", "count"), ("mean_D", "1"), ("fit_D", "1")]);
    for (n, d) in &mean {
        let f = fit.map_or(f64::NAN, |f| f.c / (*n as f64).powf(f.a));
        t.row(vec![(*n).into(), (*d).into(), f.into()]);
    }
    out.table("mean.csv", &t)?;

    if let Some(f) = fit {
        let mut t = Table::new(&[
            ("C", "1"),
            ("a", "1"),
            ("C_stderr", "1"),
            ("a_stderr", "1"),
            ("runs", "count"),
        ]);
        t.row(vec![
            f.c.into(),
            f.a.into(),
            f.c_stderr.into(),
            f.a_stderr.into(),
            runs.len().into(),
        ]);
        out.table("fit.csv", &t)?;
    }
    Ok(())
}
