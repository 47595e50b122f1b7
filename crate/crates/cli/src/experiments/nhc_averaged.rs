use thermolab::analysis::Confinement;
use thermolab::dynamics::ChainAveraged;
use thermolab::integrators::{integrate, Rk4, Scheme};
use thermolab::sections::{Direction, SectionDetector, SectionSpec};

use super::{par_map, spec, Context, Ctx, InitialDefault, RunResult};
use crate::output::{OutputDir, Table};

const Q0: &[f64] = &[0.5, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0, 1.1, 1.3, 1.5];

/// `(τ, α₁, α₂) = (q₀²/2, 0, 0)`.
fn from_q0(q0: f64) -> [f64; 3] {
    [0.5 * q0 * q0, 0.0, 0.0]
}

fn from_tau(tau: f64) -> [f64; 3] {
    [tau, 0.0, 0.0]
}

/// Slow-time budget per crossing.
const TIME_PER_CROSSING: f64 = 200.0;

pub fn run(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let inits = ctx.initial::<3>(InitialDefault::Q0(Q0), Some(from_tau), Some(from_q0))?;
    ctx.scheme(Scheme::Rk4, &[Scheme::Rk4])?;
    let dt = ctx.dt(1e-3)?;
    let n_crossings = ctx.n_crossings(1000, 50_000)?;
    let budget = (TIME_PER_CROSSING / dt).ceil() as u64 * n_crossings as u64;
    let n_steps = ctx.n_steps(budget, budget)?;
    let direction = ctx.direction(Direction::Both)?;
    let spec = spec(dt, n_steps, 1, Scheme::Rk4);
    let section = SectionSpec::hyperplane(2, 0.0, direction);
    let flow = Rk4(ChainAveraged);

    let results = par_map(&inits, |init| {
        let mut det = SectionDetector::new(&flow, section, &spec, n_crossings).ctx(&init.label)?;
        let mut conf = Confinement::action(0);
        integrate(&flow, init.state, &spec, &mut [&mut det, &mut conf]).ctx(&init.label)?;
        Ok((det.orbit, conf.report()))
    })?;

    let mut summary = Table::new(&[
        ("run", "-"),
        ("tau0", "1"),
        ("alpha1_0", "1"),
        ("alpha2_0", "1"),
        ("crossings", "count"),
        ("complete", "-"),
        ("tau_min", "1"),
        ("tau_max", "1"),
        ("file", "-"),
    ]);
    for (init, (orbit, report)) in inits.iter().zip(&results) {
        let mut t = Table::new(&[
            ("n", "count"),
            ("t", "time"),
            ("tau", "1"),
            ("alpha1", "1"),
            ("direction", "sign"),
        ]);
        for (n, ((x, time), dir)) in orbit.states.iter().zip(&orbit.times).zip(&orbit.directions).enumerate() {
            t.row(vec![n.into(), (*time).into(), x[0].into(), x[1].into(), (*dir).into()]);
        }
        let file = format!("section_{}.csv", init.label);
        out.table(&file, &t)?;
        if !orbit.complete {
            ctx.warn(format!(
                "{}: {} of {n_crossings} crossings within {n_steps} steps",
                init.label,
                orbit.len()
            ));
        }
        if orbit.skipped_tangential > 0 {
            ctx.warn(format!(
                "{}: skipped {} tangential crossings",
                init.label, orbit.skipped_tangential
            ));
        }
        summary.row(vec![
            init.label.as_str().into(),
            init.state[0].into(),
            init.state[1].into(),
            init.state[2].into(),
            orbit.len().into(),
            orbit.complete.into(),
            report.tau_min.into(),
            report.tau_max.into(),
            file.into(),
        ]);
    }
    out.table("orbits.csv", &summary)?;
    Ok(())
}
