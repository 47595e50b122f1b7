//! Structure of the averaged system `σ′ = −α, α′ = e^σ − 1`: energy levels,
//! the period function `T(G)`, the twist property, and confinement of
//! trajectories in the action variable.

use std::ops::ControlFlow;

use crate::dynamics::{potential_v, HamiltonianForm};
use crate::error::{invalid, Error, Result};
use crate::integrators::{IntegratorSpec, Observer, Rk4, Scheme};
use crate::sections::{section_crossings, Direction, SectionSpec};

/// Roots `σ₋ < 0 < σ₊` of `V(σ) = G`.
pub fn turning_points(g: f64) -> Result<(f64, f64)> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(invalid("G", format!("energy level must be finite and > 0, got {g}")));
    }
    let minus = bracketed_root(g, -g - 2.0, 0.0)?;
    let plus = bracketed_root(g, 0.0, (g + 2.0).ln() + 1.0)?;
    Ok((minus, plus))
}

/// Safeguarded Newton for `V(σ) = g` on a bracket with one endpoint at 0.
/// The outer endpoint is pushed out geometrically if it does not bracket.
fn bracketed_root(g: f64, a: f64, b: f64) -> Result<f64> {
    let f = |s: f64| potential_v(s).value - g;
    let (mut lo, mut hi) = (a, b);
    let outer_is_lo = lo < 0.0;
    let mut widenings = 0;
    while (f(lo) < 0.0) == (f(hi) < 0.0) {
        if widenings == 10 {
            return Err(invalid("G", format!("could not bracket the turning point for G = {g}")));
        }
        if outer_is_lo {
            lo *= 2.0;
        } else {
            hi *= 2.0;
        }
        widenings += 1;
    }
    // keep f(lo) > 0 > f(hi) orientation explicit
    let lo_positive = f(lo) > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = potential_v(x);
        let fx = v.value - g;
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / v.first;
        let next = if newton > lo.min(hi) && newton < lo.max(hi) && v.first != 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodMethod {
    Quadrature,
    OdeOracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSample {
    pub g: f64,
    pub period: f64,
    pub method: PeriodMethod,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const QUAD_START_ORDER: usize = 16;
const QUAD_MAX_ORDER: usize = 4096;
const QUAD_REL_TOL: f64 = 1e-10;

/// `T(G) = 2∫ dσ / √(2(G − V(σ)))` between the turning points, with
/// `σ = c + h sin u` removing the endpoint singularities.
pub fn period_quadrature(g: f64) -> Result<PeriodSample> {
    let (sm, sp) = turning_points(g)?;
    let c = 0.5 * (sp + sm);
    let h = 0.5 * (sp - sm);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let integral = |order: usize| {
        let (x, w) = gauss_legendre(order);
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let u = half_pi * xi;
                let (su, cu) = u.sin_cos();
                let gap = g - potential_v(c + h * su).value;
                wi * half_pi * h * cu / (2.0 * gap.max(0.0)).sqrt()
            })
            .sum::<f64>()
            * 2.0
    };
    let mut order = QUAD_START_ORDER;
    let mut prev = integral(order);
    while order < QUAD_MAX_ORDER {
        order *= 2;
        let next = integral(order);
        if (next - prev).abs() <= QUAD_REL_TOL * next.abs() {
            return Ok(PeriodSample {
                g,
                period: next,
                method: PeriodMethod::Quadrature,
            });
        }
        prev = next;
    }
    Err(Error::NoConvergence {
        iterations: order,
        residual: prev,
    })
}

/// Period by integrating the Hamiltonian form from `(σ₊, 0)` around the
/// orbit with RK4, halving the step until two refinements agree to 1e-9.
pub fn period_ode_oracle(g: f64) -> Result<PeriodSample> {
    let (_, sp) = turning_points(g)?;
    // α increases through 0 at (σ₊, 0), once per period
    let section = SectionSpec::hyperplane(1, 0.0, Direction::Positive);
    let first_return = |dt: f64| -> Result<f64> {
        let guess = 200.0 + 10.0 * g;
        let spec = IntegratorSpec::new(dt, (guess / dt) as u64, 1, Scheme::Rk4)?;
        let orbit = section_crossings(&Rk4(HamiltonianForm), [sp, 0.0], section, &spec, 1)?;
        orbit
            .times
            .first()
            .copied()
            .ok_or(Error::SectionNotReached { steps: spec.n_steps })
    };
    let mut dt = 1e-2;
    let mut prev = first_return(dt)?;
    for _ in 0..8 {
        dt *= 0.5;
        let next = first_return(dt)?;
        if (next - prev).abs() < 1e-9 * next {
            return Ok(PeriodSample {
                g,
                period: next,
                method: PeriodMethod::OdeOracle,
            });
        }
        prev = next;
    }
    Err(Error::NoConvergence {
        iterations: 8,
        residual: prev,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistReport {
    pub monotone: bool,
    /// Smallest adjacent period difference (`+∞` for fewer than two levels).
    pub margin: f64,
}

/// Strict monotonicity of a sequence of period samples ordered by `G`.
pub fn twist_check_samples(samples: &[PeriodSample]) -> TwistReport {
    let margin = samples
        .windows(2)
        .map(|w| w[1].period - w[0].period)
        .fold(f64::INFINITY, f64::min);
    TwistReport {
        monotone: margin > 0.0,
        margin,
    }
}

/// Checks `T′(G) > 0` on an increasing grid of energy levels.
pub fn twist_check(g_grid: &[f64]) -> Result<TwistReport> {
    if g_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("G_grid", "energy grid must be strictly increasing"));
    }
    let samples = g_grid
        .iter()
        .map(|g| period_quadrature(*g))
        .collect::<Result<Vec<_>>>()?;
    Ok(twist_check_samples(&samples))
}

/// `6VV″² − 3V′²V″ − 2VV′V″`, as printed.
pub fn chicone_criterion(sigma: f64) -> f64 {
    let v = potential_v(sigma);
    6.0 * v.value * v.second * v.second - 3.0 * v.first * v.first * v.second - 2.0 * v.value * v.first * v.second
}

/// Same expression with `V‴` in the last term.
pub fn chicone_criterion_third(sigma: f64) -> f64 {
    let v = potential_v(sigma);
    6.0 * v.value * v.second * v.second - 3.0 * v.first * v.first * v.second - 2.0 * v.value * v.first * v.third
}

/// Running extrema of the action along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfinementReport {
    pub tau_min: f64,
    pub tau_max: f64,
    pub qp_min: f64,
    pub qp_max: f64,
    pub samples: u64,
}

impl ConfinementReport {
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            tau_min: self.tau_min.min(other.tau_min),
            tau_max: self.tau_max.max(other.tau_max),
            qp_min: self.qp_min.min(other.qp_min),
            qp_max: self.qp_max.max(other.qp_max),
            samples: self.samples + other.samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ActionSource {
    Cartesian { q: usize, p: usize },
    Action { tau: usize },
}

/// O(1)-memory observer of `τ = (q² + p²)/2`.
#[derive(Debug, Clone)]
pub struct Confinement {
    source: ActionSource,
    tau_min: f64,
    tau_max: f64,
    samples: u64,
}

impl Confinement {
    /// For Cartesian states with `q` and `p` at the given indices.
    pub fn cartesian(q: usize, p: usize) -> Self {
        Self::with(ActionSource::Cartesian { q, p })
    }

    /// For action-angle states with `τ` at `tau`.
    pub fn action(tau: usize) -> Self {
        Self::with(ActionSource::Action { tau })
    }

    fn with(source: ActionSource) -> Self {
        Self {
            source,
            tau_min: f64::INFINITY,
            tau_max: f64::NEG_INFINITY,
            samples: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        let tau = match self.source {
            ActionSource::Cartesian { q, p } => 0.5 * (x[q] * x[q] + x[p] * x[p]),
            ActionSource::Action { tau } => x[tau],
        };
        self.tau_min = self.tau_min.min(tau);
        self.tau_max = self.tau_max.max(tau);
        self.samples += 1;
    }

    pub fn report(&self) -> ConfinementReport {
        ConfinementReport {
            tau_min: self.tau_min,
            tau_max: self.tau_max,
            qp_min: 2.0 * self.tau_min,
            qp_max: 2.0 * self.tau_max,
            samples: self.samples,
        }
    }
}

impl<const N: usize> Observer<N> for Confinement {
    fn observe(&mut self, _t: f64, x: &[f64; N]) -> ControlFlow<()> {
        self.push(x);
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, TAU};

    #[test]
    fn turning_points_small_energy() {
        let g = 1e-8;
        let (m, p) = turning_points(g).unwrap();
        let lead = (2.0 * g).sqrt();
        assert!((p / lead - 1.0).abs() < 1e-3 && (-m / lead - 1.0).abs() < 1e-3);
    }

    #[test]
    fn turning_points_exact_level() {
        let (m, p) = turning_points(E - 2.0).unwrap();
        assert!((p - 1.0).abs() < 1e-14);
        assert!(m < 0.0);
        for g in [1e-6, 0.01, 1.0, 4.0, 50.0, 500.0] {
            let (m, p) = turning_points(g).unwrap();
            assert!(m < 0.0 && p > 0.0);
            assert!((potential_v(m).value - g).abs() <= 1e-12 * g.max(1.0));
            assert!((potential_v(p).value - g).abs() <= 1e-12 * g.max(1.0));
        }
    }

    #[test]
    fn turning_points_reject_nonpositive_energy() {
        assert!(turning_points(0.0).is_err());
        assert!(turning_points(-1.0).is_err());
        assert!(period_quadrature(0.0).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg + 1) as f64 } else { 0.0 };
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((approx - exact).abs() < 1e-13, "n={n}");
            let even = 2 * (n - 1);
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((approx - 2.0 / (even + 1) as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn period_harmonic_limit() {
        let t = period_quadrature(1e-8).unwrap();
        assert!((t.period - TAU).abs() < 1e-4);
        assert_eq!(t.method, PeriodMethod::Quadrature);
    }

    #[test]
    fn period_matches_high_precision_values() {
        // 40-digit quadrature of the same integral, computed independently
        let reference = [
            (0.01, 6.288_422_382_957_876),
            (0.1, 6.335_651_454_341_921),
            (1.0, 6.814_865_364_474_816),
            (4.0, 8.391_907_012_350_428),
        ];
        for (g, t) in reference {
            let q = period_quadrature(g).unwrap().period;
            assert!((q - t).abs() < 1e-9 * t, "G={g}: {q} vs {t}");
        }
    }

    #[test]
    fn period_ode_oracle_agrees() {
        for g in [0.01, 1.0, 4.0] {
            let q = period_quadrature(g).unwrap().period;
            let o = period_ode_oracle(g).unwrap();
            assert_eq!(o.method, PeriodMethod::OdeOracle);
            assert!((q - o.period).abs() < 1e-8 * q, "G={g}: {q} vs {}", o.period);
        }
    }

    #[test]
    fn period_increases() {
        let t = |g: f64| period_quadrature(g).unwrap().period;
        assert!(t(4.0) > t(1.0) && t(1.0) > t(0.01));
    }

    #[test]
    fn twist_examples() {
        let r = twist_check(&[0.01, 0.1, 0.5, 1.0, 2.0, 5.0]).unwrap();
        assert!(r.monotone && r.margin > 0.0);
        let r = twist_check(&[0.3]).unwrap();
        assert!(r.monotone);
        let fake = |g, period| PeriodSample {
            g,
            period,
            method: PeriodMethod::Quadrature,
        };
        let r = twist_check_samples(&[fake(0.1, 6.3), fake(0.2, 6.5), fake(0.3, 6.4)]);
        assert!(!r.monotone);
        assert!((r.margin + 0.1).abs() < 1e-12);
        assert!(twist_check(&[1.0, 0.5]).is_err());
    }

    #[test]
    fn chicone_examples() {
        assert_eq!(chicone_criterion(0.0), 0.0);
        // 40-digit evaluation: 1.0575641239743511
        assert!((chicone_criterion(1.0) - 1.057_564_123_974_351).abs() < 1e-13);
        assert!((chicone_criterion(1.0) - 1.058).abs() < 1e-3);
        assert!((chicone_criterion(-3.0) - 0.089_570_512_998_612_36).abs() < 1e-14);
        assert!((chicone_criterion(1e-3) - 1.669_669_446_207_21e-13).abs() < 1e-20);
        let mut s: f64 = -3.0;
        while s <= 3.0 {
            if s.abs() >= 1e-3 {
                assert!(chicone_criterion(s) > 0.0, "σ = {s}");
            }
            s += 1e-3;
        }
    }

    #[test]
    fn chicone_variants_coincide_for_exponential_potential() {
        // V″ = V‴ = e^σ for this potential
        for s in [-2.0, -0.5, 0.3, 2.0] {
            assert_eq!(chicone_criterion(s), chicone_criterion_third(s));
        }
    }

    #[test]
    fn confinement_tracks_extrema() {
        let mut c = Confinement::cartesian(0, 1);
        for _ in 0..5 {
            let _ = Observer::<3>::observe(&mut c, 0.0, &[1.0, 1.0, 0.0]);
        }
        let r = c.report();
        assert_eq!((r.tau_min, r.tau_max), (1.0, 1.0));

        let mut c = Confinement::cartesian(0, 1);
        for x in [[0.3, 0.4, 9.0], [2.0, -1.0, 0.0], [0.0, 1.0, 0.0]] {
            let _ = Observer::<3>::observe(&mut c, 0.0, &x);
        }
        let r = c.report();
        assert_eq!(r.tau_min, 0.125);
        assert_eq!(r.tau_max, 2.5);
        assert_eq!(r.qp_min, 2.0 * r.tau_min);
        assert_eq!(r.qp_max, 2.0 * r.tau_max);
        assert_eq!(r.samples, 3);

        let mut a = Confinement::action(1);
        let _ = Observer::<3>::observe(&mut a, 0.0, &[0.0, 0.7, 0.0]);
        let m = r.merge(&a.report());
        assert_eq!((m.tau_min, m.tau_max, m.samples), (0.125, 2.5, 4));
    }
}
