use thermolab::ergodicity::{
    distribution_error, theo_amplitude_pdf, theo_angular_pdf, Histogram, KineticAverage, Normalization,
    PhaseHistograms, DEFAULT_R_CUTOFF,
};
use thermolab::integrators::{integrate, Scheme};

use super::{label, par_map, q_axis, spec, Context, Ctx, InitialDefault, Nhc, RunResult};
use crate::output::{OutputDir, Table};

fn histogram_table(h: &Histogram, pdf: impl Fn(f64) -> f64, norm: Normalization, unit: &str, name: &str) -> Table {
    let mut t = Table::new(&[
        (name, unit),
        ("count", "count"),
        ("f_num", &format!("1/{unit}")),
        ("f_theo", &format!("1/{unit}")),
        ("abs_err", &format!("1/{unit}")),
    ]);
    for i in 0..h.n_bins() {
        let x = h.midpoint(i);
        let (num, theo) = (h.density(i, norm), pdf(x));
        t.row(vec![
            x.into(),
            h.counts()[i].into(),
            num.into(),
            theo.into(),
            (num - theo).abs().into(),
        ]);
    }
    t
}

pub fn run(ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    let eps = ctx.eps_list(&[1.0])?;
    let inits = ctx.initial::<4>(InitialDefault::Q0(&[1.1]), None, Some(q_axis::<4>))?;
    let scheme = ctx.scheme(Scheme::Splitting, &[Scheme::Splitting, Scheme::Rk4])?;
    let dt = ctx.dt(2.5e-3)?;
    let n_steps = ctx.n_steps(20_000_000, 1_000_000_000)?;
    let bins = ctx.bins(100)?;
    let r_cutoff = ctx.r_cutoff(DEFAULT_R_CUTOFF)?;
    let spec = spec(dt, n_steps, 1, scheme);

    let runs: Vec<_> = eps
        .iter()
        .flat_map(|e| inits.iter().map(move |i| (label(*e, &i.label), *e, i.clone())))
        .collect();
    let results = par_map(&runs, |(name, e, init)| {
        let mut hist = PhaseHistograms::new(bins, r_cutoff).ctx(name)?;
        let mut kin = KineticAverage::default();
        integrate(&Nhc::new(scheme, *e), init.state, &spec, &mut [&mut hist, &mut kin]).ctx(name)?;
        Ok((hist, kin))
    })?;

    let mut summary = Table::new(&[
        ("run", "-"),
        ("samples", "count"),
        ("angular_sup_err", "1/rad"),
        ("amplitude_sup_err", "1"),
        ("amplitude_beyond_cutoff", "count"),
        ("kinetic_average", "1"),
    ]);
    for ((name, _, _), (hist, kin)) in runs.iter().zip(&results) {
        // the angle histogram covers the whole circle; the amplitude one is
        // renormalized over [0, r_c]
        out.table(
            &format!("angular_{name}.csv"),
            &histogram_table(&hist.angle, theo_angular_pdf, Normalization::Total, "rad", "theta"),
        )?;
        out.table(
            &format!("amplitude_{name}.csv"),
            &histogram_table(&hist.amplitude, theo_amplitude_pdf, Normalization::InRange, "1", "r"),
        )?;
        summary.row(vec![
            name.as_str().into(),
            kin.count().into(),
            distribution_error(&hist.angle, theo_angular_pdf, Normalization::Total).into(),
            distribution_error(&hist.amplitude, theo_amplitude_pdf, Normalization::InRange).into(),
            hist.amplitude.out_of_range().into(),
            kin.mean().unwrap_or(f64::NAN).into(),
        ]);
    }
    out.table("summary.csv", &summary)?;
    Ok(())
}
