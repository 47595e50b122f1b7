//! Experiment catalog and the parameter plumbing shared by its entries.

use std::fmt;
use std::io;
use std::ops::ControlFlow;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thermolab::dynamics::{Epsilon, NoseHoover, NoseHooverChain, VectorField};
use thermolab::integrators::{IntegratorSpec, NhSplitting, NhcSplitting, Observer, Rk4, Scheme, Stepper};
use thermolab::sections::Direction;

use crate::config::{ConfigError, DirectionName, ExperimentConfig, SchemeName};
use crate::output::OutputDir;

mod contours;
mod diagnostics;
mod discrepancy;
mod distributions;
mod nhc_averaged;
mod nhc_trace;
mod poincare_nh;
mod projection;

pub use diagnostics::run_checks;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numeric { context: String, source: thermolab::Error },
    Io(io::Error),
}

impl RunError {
    /// Step index of a non-finite abort.
    pub fn nan_step(&self) -> Option<u64> {
        match self {
            RunError::Numeric {
                source: thermolab::Error::NonFinite { step },
                ..
            } => Some(*step),
            _ => None,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numeric { context, source } => write!(f, "{context}: {source}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

pub type RunResult<T> = Result<T, RunError>;

/// Attaches a run label to numerical errors.
pub trait Context<T> {
    fn ctx(self, context: impl fmt::Display) -> RunResult<T>;
}

impl<T> Context<T> for thermolab::Result<T> {
    fn ctx(self, context: impl fmt::Display) -> RunResult<T> {
        self.map_err(|source| RunError::Numeric {
            context: context.to_string(),
            source,
        })
    }
}

pub struct Entry {
    pub id: &'static str,
    pub summary: &'static str,
    run: fn(&mut Ctx, &mut OutputDir) -> RunResult<()>,
}

pub const CATALOG: &[Entry] = &[
    Entry {
        id: "g-contours",
        summary: "level curves of the averaged first integral G(tau, alpha)",
        run: contours::run,
    },
    Entry {
        id: "poincare-nh",
        summary: "Poincare sections theta = 0 of the Nose-Hoover oscillator, with island detection",
        run: poincare_nh::run,
    },
    Entry {
        id: "ring-projection",
        summary: "(q, p) projection of one Nose-Hoover trajectory and its ring bounds",
        run: projection::run_nh,
    },
    Entry {
        id: "poincare-nhc-averaged",
        summary: "sections alpha2 = 0 of the averaged Nose-Hoover chain",
        run: nhc_averaged::run,
    },
    Entry {
        id: "nhc-section-trace",
        summary: "trace of a Nose-Hoover chain trajectory on the plane xi2 = 0",
        run: nhc_trace::run,
    },
    Entry {
        id: "nhc-projection",
        summary: "(q, p) projection of a Nose-Hoover chain trajectory and its action floor",
        run: projection::run_nhc,
    },
    Entry {
        id: "nhc-distributions",
        summary: "angle and amplitude histograms of a Nose-Hoover chain trajectory against the Gibbs marginals",
        run: distributions::run,
    },
    Entry {
        id: "nhc-discrepancy",
        summary: "checkpointed star discrepancy over several trajectories and its power-law fit",
        run: discrepancy::run,
    },
    Entry {
        id: "diagnostics",
        summary: "reversibility, invariant measure, first integral, period/twist and Diophantine tables",
        run: diagnostics::run,
    },
];

pub fn find(id: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.id == id)
}

/// Runs one catalog entry into `out`.
pub fn run(entry: &Entry, ctx: &mut Ctx, out: &mut OutputDir) -> RunResult<()> {
    (entry.run)(ctx, out)
}

/// A labelled initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Initial<const N: usize> {
    pub label: String,
    pub state: [f64; N],
}

/// Resolved view of a config: defaults, desk/paper budgets, validation,
/// and a record of every value actually used.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    text: &'a str,
    path: &'a Path,
    pub paper_scale: bool,
    pub warnings: Vec<String>,
    pub params: Map<String, Value>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a ExperimentConfig, text: &'a str, path: &'a Path, paper_scale: bool) -> Self {
        Self {
            cfg,
            text,
            path,
            paper_scale,
            warnings: Vec::new(),
            params: Map::new(),
        }
    }

    pub fn err(&self, field: &str, message: impl Into<String>) -> RunError {
        RunError::Config(ConfigError::at(self.path, self.text, field, message))
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    fn record(&mut self, key: &str, value: Value) {
        self.params.insert(key.to_string(), value);
    }

    /// Coupling strengths from `system.eps` or `system.q_mass`.
    pub fn eps_list(&mut self, default: &[f64]) -> RunResult<Vec<Epsilon>> {
        let sys = &self.cfg.system;
        let list: Vec<Epsilon> = match (&sys.eps, &sys.q_mass) {
            (Some(_), Some(_)) => return Err(self.err("system.q_mass", "give either `eps` or `q_mass`, not both")),
            (Some(e), None) => {
                non_empty(self, "system.eps", e)?;
                e.iter()
                    .map(|x| {
                        if *x > 0.0 {
                            Epsilon::new(*x).map_err(|err| self.err("system.eps", err.to_string()))
                        } else {
                            Err(self.err("system.eps", format!("must be > 0, got {x}")))
                        }
                    })
                    .collect::<RunResult<_>>()?
            }
            (None, Some(q)) => {
                non_empty(self, "system.q_mass", q)?;
                q.iter()
                    .map(|x| {
                        Epsilon::from_thermostat_mass(*x).map_err(|err| self.err("system.q_mass", err.to_string()))
                    })
                    .collect::<RunResult<_>>()?
            }
            (None, None) => default
                .iter()
                .map(|x| Epsilon::new(*x).expect("valid default"))
                .collect(),
        };
        if sys.beta.is_some_and(|b| b != 1.0) {
            return Err(self.err(
                "system.beta",
                "this experiment uses the reduced form with beta = 1; other temperatures are a rescaling of time and amplitude",
            ));
        }
        self.record("eps", json!(list.iter().map(|e| e.get()).collect::<Vec<_>>()));
        Ok(list)
    }

    /// Initial conditions of arity `N` from `initial.tau`, `initial.q0` or
    /// `initial.states`. `tau` and `q0` are accepted when the experiment
    /// supplies a generator for them; `states` are taken verbatim.
    pub fn initial<const N: usize>(
        &mut self,
        default: InitialDefault,
        from_tau: Option<fn(f64) -> [f64; N]>,
        from_q0: Option<fn(f64) -> [f64; N]>,
    ) -> RunResult<Vec<Initial<N>>> {
        let init = &self.cfg.initial;
        let given = [init.tau.is_some(), init.q0.is_some(), init.states.is_some()];
        if given.iter().filter(|b| **b).count() > 1 {
            return Err(self.err("initial.states", "give only one of `tau`, `q0` or `states`"));
        }
        let generate = |values: &[f64], prefix: &str, f: fn(f64) -> [f64; N]| -> Vec<Initial<N>> {
            values
                .iter()
                .map(|&v| Initial {
                    label: format!("{prefix}{v}"),
                    state: f(v),
                })
                .collect()
        };
        let list = if let Some(t) = &init.tau {
            non_empty(self, "initial.tau", t)?;
            let Some(f) = from_tau else {
                return Err(self.err("initial.tau", "this experiment takes `q0` or `states`"));
            };
            if let Some(bad) = t.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                return Err(self.err("initial.tau", format!("actions must be finite and > 0, got {bad}")));
            }
            generate(t, "tau", f)
        } else if let Some(q) = &init.q0 {
            non_empty(self, "initial.q0", q)?;
            let Some(f) = from_q0 else {
                return Err(self.err("initial.q0", "this experiment takes `tau` or `states`"));
            };
            if let Some(bad) = q.iter().find(|x| !x.is_finite()) {
                return Err(self.err("initial.q0", format!("must be finite, got {bad}")));
            }
            generate(q, "q", f)
        } else if let Some(s) = &init.states {
            non_empty(self, "initial.states", s)?;
            let mut out = Vec::with_capacity(s.len());
            for (i, row) in s.iter().enumerate() {
                if row.len() != N {
                    return Err(self.err(
                        "initial.states",
                        format!("state {i} has {} components, expected {N}", row.len()),
                    ));
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(self.err("initial.states", format!("state {i} is not finite")));
                }
                out.push(Initial {
                    label: format!("ic{i}"),
                    state: std::array::from_fn(|j| row[j]),
                });
            }
            out
        } else {
            match default {
                InitialDefault::Tau(t) => generate(t, "tau", from_tau.expect("default needs a tau generator")),
                InitialDefault::Q0(q) => generate(q, "q", from_q0.expect("default needs a q0 generator")),
            }
        };
        self.record(
            "initial",
            json!(list
                .iter()
                .map(|i| json!({"label": i.label, "state": i.state.to_vec()}))
                .collect::<Vec<_>>()),
        );
        Ok(list)
    }

    pub fn dt(&mut self, default: f64) -> RunResult<f64> {
        let dt = self.cfg.integrator.dt.unwrap_or(default);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(self.err("integrator.dt", format!("must be finite and > 0, got {dt}")));
        }
        self.record("dt", json!(dt));
        Ok(dt)
    }

    /// Step budget: `n_steps` at desk scale, `paper_n_steps` under
    /// `--paper-scale`.
    pub fn n_steps(&mut self, desk: u64, paper: u64) -> RunResult<u64> {
        let i = &self.cfg.integrator;
        let (n, field) = if self.paper_scale {
            (i.paper_n_steps.unwrap_or(paper), "integrator.paper_n_steps")
        } else {
            (i.n_steps.unwrap_or(desk), "integrator.n_steps")
        };
        if n == 0 {
            return Err(self.err(field, "must be >= 1"));
        }
        self.record("n_steps", json!(n));
        Ok(n)
    }

    pub fn sample_stride(&mut self, default: u64) -> RunResult<u64> {
        let s = self.cfg.integrator.sample_stride.unwrap_or(default);
        if s == 0 {
            return Err(self.err("integrator.sample_stride", "must be >= 1"));
        }
        self.record("sample_stride", json!(s));
        Ok(s)
    }

    pub fn scheme(&mut self, default: Scheme, allowed: &[Scheme]) -> RunResult<Scheme> {
        let s = match self.cfg.integrator.scheme {
            Some(SchemeName::Rk4) => Scheme::Rk4,
            Some(SchemeName::Splitting) => Scheme::Splitting,
            None => default,
        };
        if !allowed.contains(&s) {
            return Err(self.err(
                "integrator.scheme",
                format!("scheme {} is not available here", scheme_name(s)),
            ));
        }
        self.record("scheme", json!(scheme_name(s)));
        Ok(s)
    }

    /// Crossing count: `n_crossings` at desk scale, `paper_n_crossings`
    /// under `--paper-scale`.
    pub fn n_crossings(&mut self, desk: usize, paper: usize) -> RunResult<usize> {
        let s = &self.cfg.section;
        let (n, field) = if self.paper_scale {
            (s.paper_n_crossings.unwrap_or(paper), "section.paper_n_crossings")
        } else {
            (s.n_crossings.unwrap_or(desk), "section.n_crossings")
        };
        if n == 0 {
            return Err(self.err(field, "must be >= 1"));
        }
        self.record("n_crossings", json!(n));
        Ok(n)
    }

    pub fn direction(&mut self, default: Direction) -> RunResult<Direction> {
        let d = match self.cfg.section.direction {
            Some(DirectionName::Positive) => Direction::Positive,
            Some(DirectionName::Negative) => Direction::Negative,
            Some(DirectionName::Both) => Direction::Both,
            None => default,
        };
        let name = match d {
            Direction::Positive => "positive",
            Direction::Negative => "negative",
            Direction::Both => "both",
        };
        self.record("direction", json!(name));
        Ok(d)
    }

    pub fn k_max(&mut self, default: usize) -> RunResult<usize> {
        let k = self.cfg.section.k_max.unwrap_or(default);
        if k < 2 {
            return Err(self.err("section.k_max", "must be >= 2"));
        }
        self.record("k_max", json!(k));
        Ok(k)
    }

    pub fn bins(&mut self, default: usize) -> RunResult<usize> {
        let b = self.cfg.analysis.bins.unwrap_or(default);
        if b == 0 {
            return Err(self.err("analysis.bins", "must be >= 1"));
        }
        self.record("bins", json!(b));
        Ok(b)
    }

    pub fn r_cutoff(&mut self, default: f64) -> RunResult<f64> {
        let r = self.cfg.analysis.r_cutoff.unwrap_or(default);
        if !(r > 0.0) || !r.is_finite() {
            return Err(self.err("analysis.r_cutoff", format!("must be finite and > 0, got {r}")));
        }
        self.record("r_cutoff", json!(r));
        Ok(r)
    }

    pub fn grid_n(&mut self, default: usize) -> RunResult<usize> {
        let n = self.cfg.analysis.grid_n.unwrap_or(default);
        if n == 0 {
            return Err(self.err("analysis.grid_n", "must be >= 1"));
        }
        self.record("grid_n", json!(n));
        Ok(n)
    }

    pub fn resolution(&mut self, default: usize) -> RunResult<usize> {
        let n = self.cfg.analysis.resolution.unwrap_or(default);
        if n < 2 {
            return Err(self.err("analysis.resolution", "must be >= 2"));
        }
        self.record("resolution", json!(n));
        Ok(n)
    }

    pub fn samples(&mut self, default: usize, min: usize) -> RunResult<usize> {
        let n = self.cfg.analysis.samples.unwrap_or(default);
        if n < min {
            return Err(self.err("analysis.samples", format!("must be >= {min}")));
        }
        self.record("samples", json!(n));
        Ok(n)
    }

    /// An increasing `[lo, hi]` window from `analysis.<name>`.
    pub fn range(&mut self, name: &str, value: Option<[f64; 2]>, default: [f64; 2]) -> RunResult<[f64; 2]> {
        let r = value.unwrap_or(default);
        if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
            return Err(self.err(&format!("analysis.{name}"), format!("need finite lo < hi, got {r:?}")));
        }
        self.record(name, json!(r));
        Ok(r)
    }

    pub fn seed(&mut self, default: u64) -> u64 {
        let s = self.cfg.seed.unwrap_or(default);
        self.record("seed", json!(s));
        s
    }

    pub fn levels(&mut self, default: &[f64]) -> RunResult<Vec<f64>> {
        let l = self.cfg.analysis.levels.clone().unwrap_or_else(|| default.to_vec());
        non_empty(self, "analysis.levels", &l)?;
        if let Some(bad) = l.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(self.err("analysis.levels", format!("levels must be finite and > 0, got {bad}")));
        }
        self.record("levels", json!(l));
        Ok(l)
    }

    pub fn checkpoints(&mut self, default: &[u64], max_samples: u64) -> RunResult<Vec<u64>> {
        let c = self
            .cfg
            .analysis
            .checkpoints
            .clone()
            .unwrap_or_else(|| default.to_vec());
        if c.first() == Some(&0) || c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(self.err("analysis.checkpoints", "must be positive and strictly increasing"));
        }
        // the list may extend past a desk-scale budget
        let kept: Vec<u64> = c.iter().copied().filter(|n| *n <= max_samples).collect();
        if kept.is_empty() {
            return Err(self.err(
                "analysis.checkpoints",
                format!("no checkpoint within {max_samples} samples"),
            ));
        }
        self.record("checkpoints", json!(kept));
        Ok(kept)
    }
}

fn non_empty<T>(ctx: &Ctx, field: &str, list: &[T]) -> RunResult<()> {
    if list.is_empty() {
        Err(ctx.err(field, "must not be empty"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum InitialDefault {
    Tau(&'static [f64]),
    Q0(&'static [f64]),
}

/// `(q0, 0, …, 0)`.
pub fn q_axis<const N: usize>(q0: f64) -> [f64; N] {
    let mut x = [0.0; N];
    x[0] = q0;
    x
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Rk4 => "rk4",
        Scheme::Splitting => "splitting",
    }
}

pub fn spec(dt: f64, n_steps: u64, stride: u64, scheme: Scheme) -> IntegratorSpec {
    IntegratorSpec::new(dt, n_steps, stride, scheme).expect("parameters validated")
}

/// Runs `f` on every item in parallel; results come back in input order and
/// the first error by position wins.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> RunResult<R> + Sync + Send) -> RunResult<Vec<R>> {
    let results: Vec<RunResult<R>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Records every `stride`-th sample it is shown.
pub struct Thinned<const N: usize> {
    stride: u64,
    seen: u64,
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

impl<const N: usize> Thinned<N> {
    pub fn new(stride: u64) -> Self {
        Self {
            stride,
            seen: 0,
            times: Vec::new(),
            states: Vec::new(),
        }
    }
}

impl<const N: usize> Observer<N> for Thinned<N> {
    fn observe(&mut self, t: f64, x: &[f64; N]) -> ControlFlow<()> {
        if self.seen.is_multiple_of(self.stride) {
            self.times.push(t);
            self.states.push(*x);
        }
        self.seen += 1;
        ControlFlow::Continue(())
    }
}

macro_rules! cartesian_stepper {
    ($name:ident, $n:literal, $split:ident, $field:ident) => {
        /// Cartesian stepper chosen by scheme.
        #[derive(Debug, Clone, Copy)]
        pub enum $name {
            Split($split),
            Rk4(Rk4<$field>),
        }

        impl $name {
            pub fn new(scheme: Scheme, eps: Epsilon) -> Self {
                match scheme {
                    Scheme::Splitting => Self::Split($split(eps)),
                    Scheme::Rk4 => Self::Rk4(Rk4($field(eps))),
                }
            }
        }

        impl Stepper<$n> for $name {
            fn step(&self, x: &[f64; $n], dt: f64) -> [f64; $n] {
                match self {
                    Self::Split(s) => s.step(x, dt),
                    Self::Rk4(s) => s.step(x, dt),
                }
            }
        }

        impl VectorField<$n> for $name {
            fn eval(&self, x: &[f64; $n]) -> [f64; $n] {
                match self {
                    Self::Split(s) => s.eval(x),
                    Self::Rk4(s) => s.eval(x),
                }
            }
        }
    };
}

cartesian_stepper!(Nh, 3, NhSplitting, NoseHoover);
cartesian_stepper!(Nhc, 4, NhcSplitting, NoseHooverChain);

/// Run label combining a coupling strength and an initial condition.
pub fn label(eps: Epsilon, init: &str) -> String {
    format!("eps{}_{init}", eps.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_ids_are_unique() {
        for (i, a) in CATALOG.iter().enumerate() {
            assert!(CATALOG[i + 1..].iter().all(|b| b.id != a.id), "{}", a.id);
        }
        assert_eq!(CATALOG.len(), 9);
    }

    #[test]
    fn thinned_keeps_every_kth_sample() {
        let mut t = Thinned::<1>::new(3);
        for i in 0..10 {
            let _ = t.observe(i as f64, &[i as f64]);
        }
        assert_eq!(t.times, vec![0.0, 3.0, 6.0, 9.0]);
    }

    #[test]
    fn par_map_keeps_order_and_first_error() {
        let items: Vec<u64> = (0..64).collect();
        let out = par_map(&items, |i| Ok(i * 2)).unwrap();
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
        let err = par_map(&items, |i| {
            if *i >= 10 {
                Err(thermolab::Error::NonFinite { step: *i }).ctx("run")
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert_eq!(err.nan_step(), Some(10));
    }
}
