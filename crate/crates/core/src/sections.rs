//! Poincaré sections of fixed-step flows and analysis of the resulting
//! return maps.
//!
//! Crossings are bracketed by consecutive integration steps and located by
//! bisection of the sub-step length, re-integrating from the start of the
//! bracketing step. For angle sections only increasing crossings of a new
//! level `2πk` count; backward crossings are tallied and skipped.

use std::f64::consts::{PI, TAU};
use std::ops::ControlFlow;

use crate::dynamics::VectorField;
use crate::error::{invalid, Error, Result};
use crate::integrators::{integrate, IntegratorSpec, Observer, Stepper};

/// Maximum bisections of a bracketing step.
pub const MAX_BISECTIONS: usize = 60;
/// Required accuracy of the section function at a recorded crossing.
pub const LOCATOR_TOL: f64 = 1e-10;
/// Crossings slower than this transversal speed are skipped.
pub const MIN_TRANSVERSAL_SPEED: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectionKind {
    /// `x[index] = 0 mod 2π`, crossed with `x[index]` increasing.
    AngleMod2Pi { index: usize },
    /// `x[index] = level`.
    Hyperplane { index: usize, level: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub direction: Direction,
}

impl SectionSpec {
    pub fn angle(index: usize) -> Self {
        Self {
            kind: SectionKind::AngleMod2Pi { index },
            direction: Direction::Positive,
        }
    }

    pub fn hyperplane(index: usize, level: f64, direction: Direction) -> Self {
        Self {
            kind: SectionKind::Hyperplane { index, level },
            direction,
        }
    }

    pub fn index(&self) -> usize {
        match self.kind {
            SectionKind::AngleMod2Pi { index } | SectionKind::Hyperplane { index, .. } => index,
        }
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        if self.index() >= arity {
            return Err(invalid(
                "section.index",
                format!(
                    "coordinate {} out of range for a {arity}-dimensional flow",
                    self.index()
                ),
            ));
        }
        Ok(())
    }

    /// Coordinates of `x` with the section coordinate removed.
    pub fn project<const N: usize>(&self, x: &[f64; N]) -> Vec<f64> {
        let i = self.index();
        x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect()
    }

    /// Inverse of [`SectionSpec::project`] for a point on the section.
    pub fn lift<const N: usize>(&self, coords: &[f64]) -> Result<[f64; N]> {
        if coords.len() + 1 != N {
            return Err(Error::DimensionMismatch {
                what: "section coordinates",
                expected: N - 1,
                got: coords.len(),
            });
        }
        let i = self.index();
        let mut out = [0.0; N];
        let mut it = coords.iter();
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = if j == i {
                match self.kind {
                    SectionKind::AngleMod2Pi { .. } => 0.0,
                    SectionKind::Hyperplane { level, .. } => level,
                }
            } else {
                *it.next().expect("length checked")
            };
        }
        Ok(out)
    }
}

/// Section-ordered crossings of one trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoincareOrbit<const N: usize> {
    /// Full states at the crossings.
    pub states: Vec<[f64; N]>,
    pub times: Vec<f64>,
    /// Sign of the transversal velocity, `+1` or `-1`.
    pub directions: Vec<i8>,
    /// Crossings dropped because the transversal speed was below
    /// [`MIN_TRANSVERSAL_SPEED`].
    pub skipped_tangential: usize,
    /// Backward crossings of an angle section.
    pub skipped_backward: usize,
    /// `false` when the step budget ran out before the requested count.
    pub complete: bool,
}

impl<const N: usize> PoincareOrbit<N> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Section-restricted coordinates of every crossing.
    pub fn points(&self, section: &SectionSpec) -> Vec<Vec<f64>> {
        self.states.iter().map(|x| section.project(x)).collect()
    }

    /// Two chosen state components of every crossing.
    pub fn planar(&self, i: usize, j: usize) -> Vec<[f64; 2]> {
        self.states.iter().map(|x| [x[i], x[j]]).collect()
    }
}

/// Observer that detects section crossings between consecutive samples.
/// Requires `sample_stride = 1` so that every step is seen.
pub struct SectionDetector<'a, S, const N: usize> {
    stepper: &'a S,
    section: SectionSpec,
    dt: f64,
    target: usize,
    prev: Option<(f64, [f64; N])>,
    /// Highest `2πk` level already crossed (angle sections).
    level: i64,
    pub orbit: PoincareOrbit<N>,
}

impl<'a, S, const N: usize> SectionDetector<'a, S, N>
where
    S: Stepper<N> + VectorField<N>,
{
    pub fn new(stepper: &'a S, section: SectionSpec, spec: &IntegratorSpec, target: usize) -> Result<Self> {
        section.validate(N)?;
        spec.validate()?;
        if spec.sample_stride != 1 {
            return Err(invalid(
                "sample_stride",
                "section detection needs every step (stride 1)",
            ));
        }
        Ok(Self {
            stepper,
            section,
            dt: spec.dt,
            target,
            prev: None,
            level: 0,
            orbit: PoincareOrbit::default(),
        })
    }

    fn angle_level(x: f64) -> i64 {
        (x / TAU).floor() as i64
    }

    /// Bisects `g(step(x0, s))` on `s ∈ [0, dt]`; `g(x0)` and `g(x1)` have
    /// opposite signs (or `g(x1) = 0`).
    fn locate(&self, x0: &[f64; N], x1: &[f64; N], g: impl Fn(&[f64; N]) -> f64) -> (f64, [f64; N]) {
        let g0 = g(x0);
        let (mut lo, mut hi) = (0.0, self.dt);
        let mut x_hi = *x1;
        let mut g_hi = g(x1);
        for _ in 0..MAX_BISECTIONS {
            if g_hi == 0.0 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let xm = self.stepper.step(x0, mid);
            let gm = g(&xm);
            if (gm < 0.0) == (g0 < 0.0) && gm != 0.0 {
                lo = mid;
            } else {
                hi = mid;
                x_hi = xm;
                g_hi = gm;
            }
        }
        (hi, x_hi)
    }

    fn record(&mut self, t: f64, x: [f64; N], dir: i8) {
        self.orbit.times.push(t);
        self.orbit.states.push(x);
        self.orbit.directions.push(dir);
    }

    fn transversal_speed(&self, x: &[f64; N]) -> f64 {
        self.stepper.eval(x)[self.section.index()]
    }

    fn process(&mut self, t0: f64, x0: [f64; N], x1: [f64; N]) {
        let i = self.section.index();
        match self.section.kind {
            SectionKind::AngleMod2Pi { .. } => {
                let l1 = Self::angle_level(x1[i]);
                if l1 < Self::angle_level(x0[i]) {
                    self.orbit.skipped_backward += 1;
                }
                if l1 > self.level {
                    let target = (self.level + 1) as f64 * TAU;
                    let (s, xc) = self.locate(&x0, &x1, |x| x[i] - target);
                    self.level += 1;
                    if self.transversal_speed(&xc).abs() < MIN_TRANSVERSAL_SPEED {
                        self.orbit.skipped_tangential += 1;
                    } else {
                        self.record(t0 + s, xc, 1);
                    }
                }
            }
            SectionKind::Hyperplane { level, .. } => {
                let (g0, g1) = (x0[i] - level, x1[i] - level);
                let dir = if g0 < 0.0 && g1 >= 0.0 {
                    1
                } else if g0 > 0.0 && g1 <= 0.0 {
                    -1
                } else {
                    return;
                };
                let wanted = match self.section.direction {
                    Direction::Both => true,
                    Direction::Positive => dir > 0,
                    Direction::Negative => dir < 0,
                };
                if !wanted {
                    return;
                }
                let (s, xc) = self.locate(&x0, &x1, |x| x[i] - level);
                if self.transversal_speed(&xc).abs() < MIN_TRANSVERSAL_SPEED {
                    self.orbit.skipped_tangential += 1;
                } else {
                    self.record(t0 + s, xc, dir);
                }
            }
        }
    }
}

impl<S, const N: usize> Observer<N> for SectionDetector<'_, S, N>
where
    S: Stepper<N> + VectorField<N>,
{
    fn observe(&mut self, t: f64, x: &[f64; N]) -> ControlFlow<()> {
        match self.prev {
            None => {
                if let SectionKind::AngleMod2Pi { index } = self.section.kind {
                    self.level = Self::angle_level(x[index]);
                }
            }
            Some((t0, x0)) => self.process(t0, x0, *x),
        }
        self.prev = Some((t, *x));
        if self.orbit.len() >= self.target {
            self.orbit.complete = true;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
}

/// Integrates from `x0` until `n_crossings` crossings are recorded or the
/// step budget `spec.n_steps` is spent (then `complete` is `false`).
pub fn section_crossings<const N: usize, S>(
    flow: &S,
    x0: [f64; N],
    section: SectionSpec,
    spec: &IntegratorSpec,
    n_crossings: usize,
) -> Result<PoincareOrbit<N>>
where
    S: Stepper<N> + VectorField<N>,
{
    let mut det = SectionDetector::new(flow, section, spec, n_crossings)?;
    if n_crossings == 0 {
        det.orbit.complete = true;
        return Ok(det.orbit);
    }
    integrate(flow, x0, spec, &mut [&mut det])?;
    Ok(det.orbit)
}

/// A map of the plane to itself.
pub trait PlanarMap {
    fn apply(&self, x: [f64; 2]) -> Result<[f64; 2]>;
}

impl<F: Fn([f64; 2]) -> Result<[f64; 2]>> PlanarMap for F {
    fn apply(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        self(x)
    }
}

/// First-return map of a section; `spec.n_steps` bounds a single return.
pub struct ReturnMap<S, const N: usize> {
    pub flow: S,
    pub section: SectionSpec,
    pub spec: IntegratorSpec,
}

/// One evaluation of a [`ReturnMap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Return<const N: usize> {
    /// State at the crossing; angle coordinates are reduced back to 0.
    pub state: [f64; N],
    pub time: f64,
    pub direction: i8,
}

impl<S, const N: usize> ReturnMap<S, N>
where
    S: Stepper<N> + VectorField<N>,
{
    pub fn new(flow: S, section: SectionSpec, spec: IntegratorSpec) -> Result<Self> {
        section.validate(N)?;
        spec.validate()?;
        Ok(Self { flow, section, spec })
    }

    /// Follows the flow from `x` (a point on the section) to its next crossing.
    pub fn next(&self, x: [f64; N]) -> Result<Return<N>> {
        let orbit = section_crossings(&self.flow, x, self.section, &self.spec, 1)?;
        if !orbit.complete {
            return Err(Error::SectionNotReached {
                steps: self.spec.n_steps,
            });
        }
        let mut state = orbit.states[0];
        if let SectionKind::AngleMod2Pi { index } = self.section.kind {
            state[index] -= TAU * (state[index] / TAU).round();
        }
        Ok(Return {
            state,
            time: orbit.times[0],
            direction: orbit.directions[0],
        })
    }

    /// Return map in section coordinates, with the return time.
    pub fn eval(&self, coords: &[f64]) -> Result<(Vec<f64>, f64)> {
        let r = self.next(self.section.lift(coords)?)?;
        Ok((self.section.project(&r.state), r.time))
    }

    pub fn return_time(&self, coords: &[f64]) -> Result<f64> {
        Ok(self.eval(coords)?.1)
    }

    /// `n` successive returns starting from section coordinates `coords`.
    pub fn iterate(&self, coords: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(n);
        let mut x = coords.to_vec();
        for _ in 0..n {
            x = self.eval(&x)?.0;
            out.push(x.clone());
        }
        Ok(out)
    }
}

impl<S: Stepper<3> + VectorField<3>> PlanarMap for ReturnMap<S, 3> {
    fn apply(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (y, _) = self.eval(&x)?;
        Ok([y[0], y[1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointResult {
    pub location: [f64; 2],
    /// `|P(x) − x|` at `location`.
    pub residual: f64,
    /// Central-difference Jacobian of `P` at `location`.
    pub jacobian: [[f64; 2]; 2],
    pub iterations: usize,
}

pub const FIXED_POINT_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 50;
const JACOBIAN_STEP: f64 = 1e-6;

fn jacobian(map: &impl PlanarMap, x: [f64; 2]) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let h = JACOBIAN_STEP * x[j].abs().max(1.0);
        let mut xp = x;
        let mut xm = x;
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (map.apply(xp)?, map.apply(xm)?);
        for i in 0..2 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Newton iteration on `P(x) − x` with a finite-difference Jacobian.
///
/// The Jacobian of `P − I` is checked at the converged point too, so a
/// degenerate (non-isolated) fixed point is an error even if the residual
/// vanishes.
pub fn fixed_point(map: &impl PlanarMap, guess: [f64; 2], tol: f64) -> Result<FixedPointResult> {
    let mut x = guess;
    for it in 0..=NEWTON_MAX_ITER {
        let px = map.apply(x)?;
        let f = [px[0] - x[0], px[1] - x[1]];
        let residual = f[0].hypot(f[1]);
        let jac = jacobian(map, x)?;
        let a = [[jac[0][0] - 1.0, jac[0][1]], [jac[1][0], jac[1][1] - 1.0]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let scale = (a[0][0].abs() + a[0][1].abs()).max(a[1][0].abs() + a[1][1].abs());
        if !(det.abs() > 1e-12 * scale * scale) || det == 0.0 {
            return Err(Error::SingularJacobian { det });
        }
        if residual < tol {
            return Ok(FixedPointResult {
                location: x,
                residual,
                jacobian: jac,
                iterations: it,
            });
        }
        if it == NEWTON_MAX_ITER || !residual.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                residual,
            });
        }
        let dx0 = (a[1][1] * f[0] - a[0][1] * f[1]) / det;
        let dx1 = (-a[1][0] * f[0] + a[0][0] * f[1]) / det;
        x = [x[0] - dx0, x[1] - dx1];
    }
    unreachable!("loop returns on the last iteration")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationEstimate {
    pub omega: f64,
    pub stderr: f64,
}

/// Rotation number of a planar orbit about `center`: least-squares slope of
/// the unwrapped polar angle against iterate index, divided by 2π.
pub fn rotation_number(points: &[[f64; 2]], center: [f64; 2]) -> Result<RotationEstimate> {
    const MIN_POINTS: usize = 50;
    if points.len() < MIN_POINTS {
        return Err(Error::NotEnoughData {
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    let mut angles = Vec::with_capacity(points.len());
    let mut prev = 0.0;
    for (n, p) in points.iter().enumerate() {
        let a = (p[1] - center[1]).atan2(p[0] - center[0]);
        let unwrapped = if n == 0 {
            a
        } else {
            let d = (a - prev + PI).rem_euclid(TAU) - PI;
            angles[n - 1] + d
        };
        prev = a;
        angles.push(unwrapped);
    }
    let range =
        angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - angles.iter().cloned().fold(f64::INFINITY, f64::min);
    if range < TAU {
        return Err(Error::NoWinding { range });
    }
    let xs: Vec<f64> = (0..angles.len()).map(|i| i as f64).collect();
    let (slope, _, se, _) = linear_fit(&xs, &angles);
    Ok(RotationEstimate {
        omega: slope / TAU,
        stderr: se / TAU,
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, se_a, se_b)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let s2 = if xs.len() > 2 { ssr / (n - 2.0) } else { 0.0 };
    let se_slope = (s2 / sxx).sqrt();
    let se_intercept = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    (slope, intercept, se_slope, se_intercept)
}

/// Brute-force check of `|lω − k| ≥ c₀/l^μ` for `1 ≤ l ≤ l_max` and the
/// nearest integer `k`.
pub fn diophantine_check(omega: f64, c0: f64, mu: f64, l_max: u64) -> bool {
    debug_assert!(c0 > 0.0 && mu >= 2.0 && l_max >= 1);
    (1..=l_max).all(|l| {
        let lw = l as f64 * omega;
        (lw - lw.round()).abs() >= c0 / (l as f64).powf(mu)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IslandChain {
    /// Number of clusters; 1 means a single curve.
    pub k: usize,
    /// Clusters advanced per iterate, counted in increasing polar angle.
    pub stride: usize,
}

/// Smallest-to-next gap ratio required to accept a cluster split.
const GAP_RATIO: f64 = 3.0;

/// Detects an island chain: points split into `k` angularly separated
/// clusters about the centroid, visited with a fixed stride.
pub fn island_clusters(points: &[[f64; 2]], k_max: usize) -> IslandChain {
    let single = IslandChain { k: 1, stride: 0 };
    let n = points.len();
    if k_max < 2 || n < 10 * k_max {
        return single;
    }
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let angles: Vec<f64> = points
        .iter()
        .map(|p| (p[1] - cy).atan2(p[0] - cx).rem_euclid(TAU))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    // gap[j]: from sorted point j to sorted point j+1 (wrapping)
    let gaps: Vec<f64> = (0..n)
        .map(|j| {
            let a = angles[order[j]];
            let b = angles[order[(j + 1) % n]];
            (b - a).rem_euclid(TAU)
        })
        .collect();
    let mut by_size: Vec<usize> = (0..n).collect();
    by_size.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]));

    for k in 2..=k_max {
        let kth = gaps[by_size[k - 1]];
        let next = gaps[by_size[k]];
        if kth < GAP_RATIO * next {
            continue;
        }
        let mut cuts: Vec<usize> = by_size[..k].to_vec();
        cuts.sort_unstable();
        // label sorted positions; cluster c spans (cuts[c-1], cuts[c]]
        let mut label = vec![0usize; n];
        let mut c = 0;
        let first = (cuts[k - 1] + 1) % n;
        for step in 0..n {
            let j = (first + step) % n;
            label[order[j]] = c;
            if cuts.contains(&j) {
                c += 1;
            }
        }
        let stride = (label[1] + k - label[0]) % k;
        let consistent = stride != 0 && (1..n).all(|i| (label[i] + k - label[i - 1]) % k == stride);
        if consistent {
            return IslandChain { k, stride };
        }
    }
    single
}
