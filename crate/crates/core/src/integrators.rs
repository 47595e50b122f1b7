//! Fixed-step integration.
//!
//! Two families of steppers: classical RK4 for any [`VectorField`], and
//! symmetric compositions of exactly solvable sub-flows for the Cartesian
//! thermostatted oscillators. The splitting steps are second order and
//! exactly time-reversible under `(q, p, ξ…) ↦ (q, −p, −ξ…)`.
//!
//! [`integrate`] streams samples to observers so that long runs need O(1)
//! memory; [`TrajectoryRecorder`] keeps the samples when they are wanted.

use std::ops::ControlFlow;

use crate::dynamics::{nh_field, nhc_field, ChainState, Epsilon, PhysState, VectorField};
use crate::error::{invalid, Error, Result};

/// One step of a fixed-step scheme.
pub trait Stepper<const N: usize> {
    fn step(&self, x: &[f64; N], dt: f64) -> [f64; N];
}

impl<const N: usize, S: Stepper<N> + ?Sized> Stepper<N> for &S {
    fn step(&self, x: &[f64; N], dt: f64) -> [f64; N] {
        (**self).step(x, dt)
    }
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

fn all_finite<const N: usize>(x: &[f64; N]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Classical four-stage Runge-Kutta over a vector field.
#[derive(Debug, Clone, Copy)]
pub struct Rk4<F>(pub F);

impl<const N: usize, F: VectorField<N>> Stepper<N> for Rk4<F> {
    fn step(&self, x: &[f64; N], dt: f64) -> [f64; N] {
        let f = &self.0;
        let k1 = f.eval(x);
        let k2 = f.eval(&axpy(x, 0.5 * dt, &k1));
        let k3 = f.eval(&axpy(x, 0.5 * dt, &k2));
        let k4 = f.eval(&axpy(x, dt, &k3));
        let mut out = *x;
        for i in 0..N {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

impl<const N: usize, F: VectorField<N>> VectorField<N> for Rk4<F> {
    fn eval(&self, x: &[f64; N]) -> [f64; N] {
        self.0.eval(x)
    }
}

/// A single RK4 step; non-finite output is an error.
pub fn rk4_step<const N: usize, F: VectorField<N>>(field: &F, x: &[f64; N], dt: f64) -> Result<[f64; N]> {
    let out = Rk4(|y: &[f64; N]| field.eval(y)).step(x, dt);
    if all_finite(&out) {
        Ok(out)
    } else {
        Err(Error::NonFinite { step: 0 })
    }
}

// Exact sub-flows shared by both splitting schemes.

#[inline]
fn drift(q: &mut f64, p: f64, h: f64) {
    *q += h * p;
}

#[inline]
fn kick(p: &mut f64, q: f64, h: f64) {
    *p -= h * q;
}

/// `ξ̇ = drive` with `drive` frozen.
#[inline]
fn shift(xi: &mut f64, drive: f64, h: f64) {
    *xi += h * drive;
}

/// `ẋ = −rate·x` with `rate` frozen.
#[inline]
fn scale(x: &mut f64, rate: f64, h: f64) {
    *x *= (-rate * h).exp();
}

/// Symmetric splitting for `(q, p, ξ)`:
/// `C1(h/2) C2(h/2) B(h/2) A(h) B(h/2) C2(h/2) C1(h/2)` with
/// `A: q̇ = p`, `B: ṗ = −q`, `C1: ξ̇ = p² − 1`, `C2: ṗ = −ε²ξp`.
#[derive(Debug, Clone, Copy)]
pub struct NhSplitting(pub Epsilon);

impl Stepper<3> for NhSplitting {
    fn step(&self, x: &[f64; 3], dt: f64) -> [f64; 3] {
        let e2 = self.0.squared();
        let [mut q, mut p, mut xi] = *x;
        let h = 0.5 * dt;
        shift(&mut xi, p * p - 1.0, h);
        scale(&mut p, e2 * xi, h);
        kick(&mut p, q, h);
        drift(&mut q, p, dt);
        kick(&mut p, q, h);
        scale(&mut p, e2 * xi, h);
        shift(&mut xi, p * p - 1.0, h);
        [q, p, xi]
    }
}

impl VectorField<3> for NhSplitting {
    fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        nh_field(PhysState::from_array(*x), self.0).to_array()
    }
}

/// Symmetric splitting for `(q, p, ξ₁, ξ₂)`. The outer layers are the
/// second thermostat (`D1: ξ̇₂ = ε²ξ₁² − 1`, `D2: ξ̇₁ = −ε²ξ₂ξ₁`), then the
/// single-thermostat layers as in [`NhSplitting`].
#[derive(Debug, Clone, Copy)]
pub struct NhcSplitting(pub Epsilon);

impl Stepper<4> for NhcSplitting {
    fn step(&self, x: &[f64; 4], dt: f64) -> [f64; 4] {
        let e2 = self.0.squared();
        let [mut q, mut p, mut xi1, mut xi2] = *x;
        let h = 0.5 * dt;
        shift(&mut xi2, e2 * xi1 * xi1 - 1.0, h);
        scale(&mut xi1, e2 * xi2, h);
        shift(&mut xi1, p * p - 1.0, h);
        scale(&mut p, e2 * xi1, h);
        kick(&mut p, q, h);
        drift(&mut q, p, dt);
        kick(&mut p, q, h);
        scale(&mut p, e2 * xi1, h);
        shift(&mut xi1, p * p - 1.0, h);
        scale(&mut xi1, e2 * xi2, h);
        shift(&mut xi2, e2 * xi1 * xi1 - 1.0, h);
        [q, p, xi1, xi2]
    }
}

impl VectorField<4> for NhcSplitting {
    fn eval(&self, x: &[f64; 4]) -> [f64; 4] {
        nhc_field(ChainState::from_array(*x), self.0).to_array()
    }
}

pub fn nh_splitting_step(s: PhysState, eps: Epsilon, dt: f64) -> Result<PhysState> {
    let out = NhSplitting(eps).step(&s.to_array(), dt);
    if all_finite(&out) {
        Ok(PhysState::from_array(out))
    } else {
        Err(Error::NonFinite { step: 0 })
    }
}

pub fn nhc_splitting_step(s: ChainState, eps: Epsilon, dt: f64) -> Result<ChainState> {
    let out = NhcSplitting(eps).step(&s.to_array(), dt);
    if all_finite(&out) {
        Ok(ChainState::from_array(out))
    } else {
        Err(Error::NonFinite { step: 0 })
    }
}

/// The momentum-reversing involution: negates every component but the first.
pub fn reflect<const N: usize>(x: &[f64; N]) -> [f64; N] {
    let mut out = x.map(|v| -v);
    out[0] = x[0];
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Rk4,
    Splitting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub n_steps: u64,
    pub sample_stride: u64,
    pub scheme: Scheme,
}

impl IntegratorSpec {
    pub fn new(dt: f64, n_steps: u64, sample_stride: u64, scheme: Scheme) -> Result<Self> {
        let spec = Self {
            dt,
            n_steps,
            sample_stride,
            scheme,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be finite and > 0, got {}", self.dt)));
        }
        if self.sample_stride < 1 {
            return Err(invalid("sample_stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Receives samples `(t, x)` from [`integrate`]. Returning `Break` stops the
/// run after the current sample.
pub trait Observer<const N: usize> {
    fn observe(&mut self, t: f64, x: &[f64; N]) -> ControlFlow<()>;
}

/// Outcome of a streamed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary<const N: usize> {
    pub final_state: [f64; N],
    pub final_time: f64,
    pub steps_taken: u64,
    pub stopped_early: bool,
}

/// Integrates `x0` for `spec.n_steps` steps, handing every `sample_stride`-th
/// state (including the initial one) to each observer.
///
/// Sample times are `i·dt`, never accumulated. Any non-finite component
/// aborts the run with the index of the offending step.
pub fn integrate<const N: usize, S: Stepper<N>>(
    stepper: &S,
    x0: [f64; N],
    spec: &IntegratorSpec,
    observers: &mut [&mut dyn Observer<N>],
) -> Result<RunSummary<N>> {
    spec.validate()?;
    if !all_finite(&x0) {
        return Err(Error::NonFinite { step: 0 });
    }
    let mut x = x0;
    let mut stop = notify(observers, 0.0, &x);
    let mut i = 0u64;
    while i < spec.n_steps && !stop {
        x = stepper.step(&x, spec.dt);
        i += 1;
        if !all_finite(&x) {
            return Err(Error::NonFinite { step: i });
        }
        if i.is_multiple_of(spec.sample_stride) {
            stop = notify(observers, i as f64 * spec.dt, &x);
        }
    }
    Ok(RunSummary {
        final_state: x,
        final_time: i as f64 * spec.dt,
        steps_taken: i,
        stopped_early: stop,
    })
}

fn notify<const N: usize>(observers: &mut [&mut dyn Observer<N>], t: f64, x: &[f64; N]) -> bool {
    let mut stop = false;
    for obs in observers.iter_mut() {
        stop |= obs.observe(t, x).is_break();
    }
    stop
}

/// Sampled trajectory with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub field_id: String,
    pub spec: IntegratorSpec,
}

impl<const N: usize> Trajectory<N> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Observer that keeps every sample it sees.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecorder<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

impl<const N: usize> Observer<N> for TrajectoryRecorder<N> {
    fn observe(&mut self, t: f64, x: &[f64; N]) -> ControlFlow<()> {
        self.times.push(t);
        self.states.push(*x);
        ControlFlow::Continue(())
    }
}

/// Runs [`integrate`] and also retains the sampled trajectory.
pub fn integrate_recorded<const N: usize, S: Stepper<N>>(
    stepper: &S,
    x0: [f64; N],
    spec: &IntegratorSpec,
    field_id: impl Into<String>,
    observers: &mut [&mut dyn Observer<N>],
) -> Result<Trajectory<N>> {
    let mut rec = TrajectoryRecorder::default();
    {
        let mut all: Vec<&mut dyn Observer<N>> = Vec::with_capacity(observers.len() + 1);
        all.push(&mut rec);
        for o in observers.iter_mut() {
            all.push(&mut **o);
        }
        integrate(stepper, x0, spec, &mut all)?;
    }
    Ok(Trajectory {
        times: rec.times,
        states: rec.states,
        field_id: field_id.into(),
        spec: *spec,
    })
}

/// Adapts a closure into an [`Observer`] that never stops the run.
pub struct FnObserver<F>(pub F);

impl<const N: usize, F: FnMut(f64, &[f64; N])> Observer<N> for FnObserver<F> {
    fn observe(&mut self, t: f64, x: &[f64; N]) -> ControlFlow<()> {
        (self.0)(t, x);
        ControlFlow::Continue(())
    }
}
