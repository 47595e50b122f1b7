use std::f64::consts::FRAC_PI_2;

use thermolab::analysis::{period_quadrature, turning_points};
use thermolab::dynamics::{integral_g, potential_v};

use super::{Context, Ctx, RunResult};
use crate::output::{OutputDir, Table};

const LEVELS: &[f64] = &[0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0];

/// Closed polyline of `G = g` in the `(τ, α)` plane. With `σ = ln τ` the
/// curve is `α = ±√(2(g − V(σ)))` between the turning points, sampled at
/// `σ = m + h sin φ` so the points crowd where the curve turns.
pub fn level_curve(g: f64, n_half: usize) -> thermolab::Result<Vec<[f64; 2]>> {
    let (lo, hi) = turning_points(g)?;
    let (m, h) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    let point = |phi: f64, sign: f64| {
        let sigma = m + h * phi.sin();
        let alpha = sign * (2.0 * (g - potential_v(sigma).value)).max(0.0).sqrt();
        [sigma.exp(), alpha]
    };
    let phis: Vec<f64> = (0..=n_half)
        .map(|i| -FRAC_PI_2 + std::f64::consts::PI * i as f64 / n_half as f64)
        .collect();
    let mut curve: Vec<[f64; 2]> = phis.iter().map(|p| point(*p, 1.0)).collect();
    curve.extend(phis.iter().rev().skip(1).map(|p| point(*p, -1.0)));
    Ok(curve)
}

pub fn run(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let levels = ctx.levels(LEVELS)?;
    let samples = ctx.samples(400, 4)?;
    let tau_range = ctx.range("tau_range", ctx.cfg.analysis.tau_range, [0.02, 5.0])?;
    let alpha_range = ctx.range("alpha_range", ctx.cfg.analysis.alpha_range, [-3.0, 3.0])?;
    if !(tau_range[0] > 0.0) {
        return Err(ctx.err("analysis.tau_range", "the action must stay > 0"));
    }
    let n = ctx.resolution(101)?;

    let mut grid = Table::new(&[("tau", "1"), ("alpha", "1"), ("G", "1")]);
    for i in 0..n {
        let tau = tau_range[0] + (tau_range[1] - tau_range[0]) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let alpha = alpha_range[0] + (alpha_range[1] - alpha_range[0]) * j as f64 / (n - 1) as f64;
            let g = integral_g(tau, alpha).ctx("grid")?;
            grid.row(vec![tau.into(), alpha.into(), g.into()]);
        }
    }
    out.table("grid.csv", &grid)?;

    let mut index = Table::new(&[
        ("G", "1"),
        ("tau_min", "1"),
        ("tau_max", "1"),
        ("alpha_max", "1"),
        ("period", "time"),
        ("file", "-"),
    ]);
    for g in levels {
        let curve = level_curve(g, samples / 2).ctx(format!("level {g}"))?;
        let mut t = Table::new(&[("tau", "1"), ("alpha", "1")]);
        for p in &curve {
            t.row(vec![p[0].into(), p[1].into()]);
        }
        let name = format!("level_G{g}.csv");
        out.table(&name, &t)?;
        let (lo, hi) = turning_points(g).ctx(format!("level {g}"))?;
        let period = period_quadrature(g).ctx(format!("level {g}"))?.period;
        index.row(vec![
            g.into(),
            lo.exp().into(),
            hi.exp().into(),
            (2.0 * g).sqrt().into(),
            period.into(),
            name.into(),
        ]);
    }
    out.table("levels.csv", &index)?;
    Ok(())
}
