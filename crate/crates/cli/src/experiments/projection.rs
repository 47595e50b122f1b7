use thermolab::analysis::Confinement;
use thermolab::integrators::{integrate, Scheme, Stepper};

use super::{label, par_map, q_axis, spec, Context, Ctx, Initial, InitialDefault, Nh, Nhc, RunResult, Thinned};
use crate::output::{OutputDir, Table};

/// Integrates every `(ε, IC)` pair, writing thinned `(t, q, p, ξ…)` samples
/// and the running extrema of `q² + p²` over every step.
#[allow(clippy::too_many_arguments)]
fn project<const N: usize, S: Stepper<N> + Sync>(
    ctx: &mut Ctx,
    out: &mut OutputDir,
    runs: Vec<(String, S, Initial<N>)>,
    dt: f64,
    n_steps: u64,
    stride: u64,
    scheme: Scheme,
    xi_names: &[&str],
) -> RunResult<()> {
    let spec = spec(dt, n_steps, 1, scheme);
    let results = par_map(&runs, |(name, stepper, init)| {
        let mut conf = Confinement::cartesian(0, 1);
        let mut thin = Thinned::<N>::new(stride);
        integrate(stepper, init.state, &spec, &mut [&mut conf, &mut thin]).ctx(name)?;
        Ok((conf.report(), thin))
    })?;

    let mut bounds = Table::new(&[
        ("run", "-"),
        ("qp_min", "1"),
        ("qp_max", "1"),
        ("tau_min", "1"),
        ("tau_max", "1"),
        ("steps", "count"),
        ("file", "-"),
    ]);
    let mut columns = vec![("t", "time"), ("q", "1"), ("p", "1")];
    columns.extend(xi_names.iter().map(|n| (*n, "1")));
    for ((name, _, _), (report, thin)) in runs.iter().zip(&results) {
        let mut t = Table::new(&columns);
        for (time, x) in thin.times.iter().zip(&thin.states) {
            let mut row = vec![(*time).into()];
            row.extend(x.iter().map(|v| (*v).into()));
            t.row(row);
        }
        let file = format!("projection_{name}.csv");
        out.table(&file, &t)?;
        if !(report.qp_min > 0.0) {
            ctx.warn(format!("{name}: the trajectory reaches the origin of the (q, p) plane"));
        }
        bounds.row(vec![
            name.as_str().into(),
            report.qp_min.into(),
            report.qp_max.into(),
            report.tau_min.into(),
            report.tau_max.into(),
            (report.samples - 1).into(),
            file.into(),
        ]);
    }
    out.table("bounds.csv", &bounds)?;
    Ok(())
}

pub fn run_nh(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let eps = ctx.eps_list(&[1.0])?;
    let inits = ctx.initial::<3>(InitialDefault::Q0(&[2.2]), None, Some(q_axis::<3>))?;
    let scheme = ctx.scheme(Scheme::Splitting, &[Scheme::Splitting, Scheme::Rk4])?;
    let dt = ctx.dt(1e-3)?;
    let n_steps = ctx.n_steps(1_000_000, 50_000_000)?;
    let stride = ctx.sample_stride(50)?;
    let runs = eps
        .iter()
        .flat_map(|e| {
            inits
                .iter()
                .map(move |i| (label(*e, &i.label), Nh::new(scheme, *e), i.clone()))
        })
        .collect();
    project(ctx, out, runs, dt, n_steps, stride, scheme, &["xi"])
}

pub fn run_nhc(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let eps = ctx.eps_list(&[1.0 / 10f64.sqrt()])?;
    let inits = ctx.initial::<4>(InitialDefault::Q0(&[1.1]), None, Some(q_axis::<4>))?;
    let scheme = ctx.scheme(Scheme::Splitting, &[Scheme::Splitting, Scheme::Rk4])?;
    let dt = ctx.dt(2.5e-3)?;
    let n_steps = ctx.n_steps(1_000_000, 50_000_000)?;
    let stride = ctx.sample_stride(50)?;
    let runs = eps
        .iter()
        .flat_map(|e| {
            inits
                .iter()
                .map(move |i| (label(*e, &i.label), Nhc::new(scheme, *e), i.clone()))
        })
        .collect();
    project(ctx, out, runs, dt, n_steps, stride, scheme, &["xi1", "xi2"])
}
