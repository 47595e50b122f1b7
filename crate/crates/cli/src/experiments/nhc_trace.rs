use thermolab::analysis::Confinement;
use thermolab::dynamics::to_action_angle;
use thermolab::integrators::{integrate, Scheme};
use thermolab::sections::{Direction, SectionDetector, SectionSpec};

use super::{label, par_map, q_axis, spec, Context, Ctx, InitialDefault, Nhc, RunResult};
use crate::output::{OutputDir, Table};

pub fn run(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let eps = ctx.eps_list(&[1.0 / 10f64.sqrt()])?;
    let inits = ctx.initial::<4>(InitialDefault::Q0(&[1.1]), None, Some(q_axis::<4>))?;
    let scheme = ctx.scheme(Scheme::Splitting, &[Scheme::Splitting, Scheme::Rk4])?;
    let dt = ctx.dt(2.5e-3)?;
    let n_steps = ctx.n_steps(1_000_000, 50_000_000)?;
    let direction = ctx.direction(Direction::Both)?;
    // the trace records every crossing unless a cap is configured
    let cap = match (ctx.paper_scale, &ctx.cfg.section) {
        (false, s) if s.n_crossings.is_some() => Some(ctx.n_crossings(usize::MAX, usize::MAX)?),
        (true, s) if s.paper_n_crossings.is_some() => Some(ctx.n_crossings(usize::MAX, usize::MAX)?),
        _ => None,
    };
    let spec = spec(dt, n_steps, 1, scheme);
    // ξ₂ = 0 is α₂ = 0 for ε > 0
    let section = SectionSpec::hyperplane(3, 0.0, direction);

    let runs: Vec<_> = eps
        .iter()
        .flat_map(|e| inits.iter().map(move |i| (label(*e, &i.label), *e, i.clone())))
        .collect();
    let results = par_map(&runs, |(name, e, init)| {
        let flow = Nhc::new(scheme, *e);
        let mut det = SectionDetector::new(&flow, section, &spec, cap.unwrap_or(usize::MAX)).ctx(name)?;
        let mut conf = Confinement::cartesian(0, 1);
        integrate(&flow, init.state, &spec, &mut [&mut det, &mut conf]).ctx(name)?;
        Ok((det.orbit, conf.report()))
    })?;

    let mut summary = Table::new(&[
        ("run", "-"),
        ("eps", "1"),
        ("crossings", "count"),
        ("tau_min", "1"),
        ("tau_max", "1"),
        ("file", "-"),
    ]);
    for ((name, e, _), (orbit, report)) in runs.iter().zip(&results) {
        let mut t = Table::new(&[
            ("n", "count"),
            ("t", "time"),
            ("theta", "rad"),
            ("tau", "1"),
            ("alpha1", "1"),
            ("direction", "sign"),
        ]);
        for (n, ((x, time), dir)) in orbit.states.iter().zip(&orbit.times).zip(&orbit.directions).enumerate() {
            let (theta, tau) = to_action_angle(x[0], x[1]).ctx(name)?;
            t.row(vec![
                n.into(),
                (*time).into(),
                theta.into(),
                tau.into(),
                (e.get() * x[2]).into(),
                (*dir).into(),
            ]);
        }
        let file = format!("trace_{name}.csv");
        out.table(&file, &t)?;
        if orbit.skipped_tangential > 0 {
            ctx.warn(format!(
                "{name}: skipped {} tangential crossings",
                orbit.skipped_tangential
            ));
        }
        if cap.is_some() && !orbit.complete {
            ctx.warn(format!("{name}: {} crossings within {n_steps} steps", orbit.len()));
        }
        summary.row(vec![
            name.as_str().into(),
            e.get().into(),
            orbit.len().into(),
            report.tau_min.into(),
            report.tau_max.into(),
            file.into(),
        ]);
    }
    out.table("orbits.csv", &summary)?;
    Ok(())
}
