//! Vector fields of the thermostatted oscillator family, their coordinate
//! changes and invariant densities.
//!
//! Every field here is a pure function of its arguments. The specialized
//! harmonic-oscillator fields fix `m = 1` and `β = 1` and are parameterized
//! by the coupling `ε = 1/√Q`; the general fields keep all masses and the
//! inverse temperature explicit.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// Right-hand side of an autonomous ODE on `R^N`.
pub trait VectorField<const N: usize> {
    fn eval(&self, x: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F> VectorField<N> for F
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    fn eval(&self, x: &[f64; N]) -> [f64; N] {
        self(x)
    }
}

/// Cartesian phase point `(q, p, ξ)` of the thermostatted oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhysState {
    pub q: f64,
    pub p: f64,
    pub xi: f64,
}

impl PhysState {
    pub const fn new(q: f64, p: f64, xi: f64) -> Self {
        Self { q, p, xi }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.q, self.p, self.xi]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Cartesian phase point `(q, p, ξ₁, ξ₂)` of the oscillator coupled to a
/// two-thermostat chain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChainState {
    pub q: f64,
    pub p: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl ChainState {
    pub const fn new(q: f64, p: f64, xi1: f64, xi2: f64) -> Self {
        Self { q, p, xi1, xi2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q, self.p, self.xi1, self.xi2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Action-angle point `(θ, τ, α)` with `α = εξ`. `theta` is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AAState {
    pub theta: f64,
    pub tau: f64,
    pub alpha: f64,
}

impl AAState {
    pub const fn new(theta: f64, tau: f64, alpha: f64) -> Self {
        Self { theta, tau, alpha }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.theta, self.tau, self.alpha]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Maps a Cartesian state to action-angle form, rescaling `α = εξ`.
    pub fn from_phys(s: PhysState, eps: Epsilon) -> Result<Self> {
        let (theta, tau) = to_action_angle(s.q, s.p)?;
        Ok(Self::new(theta, tau, eps.get() * s.xi))
    }

    /// Inverse of [`AAState::from_phys`]; needs `ε > 0` to undo the rescaling.
    pub fn to_phys(self, eps: Epsilon) -> Result<PhysState> {
        let e = eps.require_positive()?;
        let (q, p) = from_action_angle(self.theta, self.tau);
        Ok(PhysState::new(q, p, self.alpha / e))
    }
}

/// Action-angle point `(θ, τ, α₁, α₂)` of the chain, `α_j = εξ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChainAAState {
    pub theta: f64,
    pub tau: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ChainAAState {
    pub const fn new(theta: f64, tau: f64, alpha1: f64, alpha2: f64) -> Self {
        Self {
            theta,
            tau,
            alpha1,
            alpha2,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.theta, self.tau, self.alpha1, self.alpha2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn from_phys(s: ChainState, eps: Epsilon) -> Result<Self> {
        let (theta, tau) = to_action_angle(s.q, s.p)?;
        let e = eps.get();
        Ok(Self::new(theta, tau, e * s.xi1, e * s.xi2))
    }

    pub fn to_phys(self, eps: Epsilon) -> Result<ChainState> {
        let e = eps.require_positive()?;
        let (q, p) = from_action_angle(self.theta, self.tau);
        Ok(ChainState::new(q, p, self.alpha1 / e, self.alpha2 / e))
    }
}

/// Thermostat coupling `ε = 1/√Q`.
///
/// `ε = 0` is accepted as the decoupled limit `Q → ∞`; it is only meaningful
/// for the Cartesian fields and integrators.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(invalid("epsilon", format!("must be finite and >= 0, got {eps}")));
        }
        Ok(Self(eps))
    }

    /// `ε = 1/√Q` for a thermostat mass `Q > 0`.
    pub fn from_thermostat_mass(q_mass: f64) -> Result<Self> {
        if !(q_mass > 0.0) || !q_mass.is_finite() {
            return Err(invalid("Q", format!("thermostat mass must be > 0, got {q_mass}")));
        }
        Ok(Self(1.0 / q_mass.sqrt()))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn squared(self) -> f64 {
        self.0 * self.0
    }

    fn require_positive(self) -> Result<f64> {
        if self.0 > 0.0 {
            Ok(self.0)
        } else {
            Err(invalid("epsilon", "rescaling α = εξ is not invertible at ε = 0"))
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// ---------------------------------------------------------------------------
// Specialized harmonic fields (m = 1, β = 1)
// ---------------------------------------------------------------------------

/// `(q̇, ṗ, ξ̇) = (p, −q − ε²ξp, p² − 1)`.
pub fn nh_field(s: PhysState, eps: Epsilon) -> PhysState {
    let e2 = eps.squared();
    PhysState::new(s.p, -s.q - e2 * s.xi * s.p, s.p * s.p - 1.0)
}

/// `(p, −q − ε²pξ₁, p² − 1 − ε²ξ₁ξ₂, ε²ξ₁² − 1)`.
pub fn nhc_field(s: ChainState, eps: Epsilon) -> ChainState {
    let e2 = eps.squared();
    ChainState::new(
        s.p,
        -s.q - e2 * s.p * s.xi1,
        s.p * s.p - 1.0 - e2 * s.xi1 * s.xi2,
        e2 * s.xi1 * s.xi1 - 1.0,
    )
}

/// Cartesian `(q, p)` to `(θ, τ)` with `q = √(2τ) cos θ`, `p = −√(2τ) sin θ`.
/// `θ` is normalized to `[0, 2π)`.
pub fn to_action_angle(q: f64, p: f64) -> Result<(f64, f64)> {
    if q == 0.0 && p == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let tau = 0.5 * (q * q + p * p);
    Ok((normalize_angle((-p).atan2(q)), tau))
}

pub fn from_action_angle(theta: f64, tau: f64) -> (f64, f64) {
    let r = (2.0 * tau).sqrt();
    let (s, c) = theta.sin_cos();
    (r * c, -r * s)
}

/// Reduces an angle to `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Action-angle form of the thermostatted oscillator.
pub fn nh_aa_field(s: AAState, eps: Epsilon) -> AAState {
    let e = eps.get();
    let (sn, cs) = s.theta.sin_cos();
    let s2 = sn * sn;
    AAState::new(
        1.0 - e * s.alpha * sn * cs,
        -2.0 * e * s.tau * s.alpha * s2,
        e * (2.0 * s.tau * s2 - 1.0),
    )
}

/// Action-angle form of the two-thermostat chain.
pub fn nhc_aa_field(s: ChainAAState, eps: Epsilon) -> ChainAAState {
    let e = eps.get();
    let (sn, cs) = s.theta.sin_cos();
    let s2 = sn * sn;
    ChainAAState::new(
        1.0 - e * s.alpha1 * sn * cs,
        -2.0 * e * s.tau * s.alpha1 * s2,
        e * (2.0 * s.tau * s2 - 1.0 - s.alpha1 * s.alpha2),
        e * (s.alpha1 * s.alpha1 - 1.0),
    )
}

/// First-order averaged field in near-identity coordinates `(θ, τ̂, α̂)`,
/// with the `O(ε²)` remainder dropped.
pub fn nh_avg_firstorder_field(s: AAState, eps: Epsilon) -> AAState {
    let e = eps.get();
    let (sn, cs) = s.theta.sin_cos();
    AAState::new(1.0 - e * s.alpha * sn * cs, -e * s.tau * s.alpha, e * (s.tau - 1.0))
}

/// Averaged system in slow time: `τ′ = −τα`, `α′ = τ − 1`.
pub fn nh_averaged_field(tau: f64, alpha: f64) -> [f64; 2] {
    [-tau * alpha, tau - 1.0]
}

/// Averaged chain in slow time: `(−τα₁, τ − 1 − α₁α₂, α₁² − 1)`.
pub fn nhc_averaged_field(tau: f64, alpha1: f64, alpha2: f64) -> [f64; 3] {
    [-tau * alpha1, tau - 1.0 - alpha1 * alpha2, alpha1 * alpha1 - 1.0]
}

/// The averaged system in `σ = ln τ`: `σ′ = −α`, `α′ = e^σ − 1`.
pub fn hamiltonian_form_field(sigma: f64, alpha: f64) -> [f64; 2] {
    [-alpha, sigma.exp_m1()]
}

/// `V(σ) = e^σ − 1 − σ` and its first three derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub value: f64,
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

/// Evaluates `V(σ) = e^σ − 1 − σ`, accurate to full relative precision near 0.
pub fn potential_v(sigma: f64) -> PotentialValue {
    let value = if sigma.abs() < 1e-2 {
        // σ²/2 + σ³/6 + ... ; eight terms reach roundoff for |σ| < 1e-2
        let mut term = sigma * sigma / 2.0;
        let mut sum = term;
        for k in 3..=10 {
            term *= sigma / k as f64;
            sum += term;
        }
        sum
    } else {
        sigma.exp_m1() - sigma
    };
    let e = sigma.exp();
    PotentialValue {
        value,
        first: sigma.exp_m1(),
        second: e,
        third: e,
    }
}

/// First integral `G(τ, α) = τ − ln τ + α²/2 − 1` of the averaged system.
pub fn integral_g(tau: f64, alpha: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("G needs tau > 0, got {tau}")));
    }
    Ok(potential_v(tau.ln()).value + 0.5 * alpha * alpha)
}

/// `G(σ, α) = α²/2 + e^σ − 1 − σ`.
pub fn integral_g_ham(sigma: f64, alpha: f64) -> f64 {
    0.5 * alpha * alpha + potential_v(sigma).value
}

/// Analytic gradient `(∂G/∂τ, ∂G/∂α)`.
pub fn integral_g_gradient(tau: f64, alpha: f64) -> [f64; 2] {
    [1.0 - 1.0 / tau, alpha]
}

/// Unnormalized invariant density `exp(−β[H(q,p) + ξ²/2Q])` with
/// `H = p²/2 + q²/2`.
pub fn gibbs_density_nh(s: PhysState, q_mass: f64, beta: f64) -> f64 {
    let h = 0.5 * (s.p * s.p + s.q * s.q);
    (-beta * (h + s.xi * s.xi / (2.0 * q_mass))).exp()
}

/// Unnormalized invariant density of the two-thermostat chain.
pub fn gibbs_density_nhc(s: ChainState, q_masses: [f64; 2], beta: f64) -> f64 {
    let h = 0.5 * (s.p * s.p + s.q * s.q);
    let th = s.xi1 * s.xi1 / (2.0 * q_masses[0]) + s.xi2 * s.xi2 / (2.0 * q_masses[1]);
    (-beta * (h + th)).exp()
}

/// Default central-difference step for [`measure_divergence`].
pub const DIVERGENCE_STEP: f64 = 1e-4;

/// Central finite-difference estimate of `div(ρ f)` at `point`.
///
/// Vanishes (to `O(h²)`) exactly when `ρ` is an invariant density of `f`.
pub fn measure_divergence<F, D>(field: F, density: D, point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64]) -> f64,
{
    let mut z = point.to_vec();
    let mut div = 0.0;
    for i in 0..point.len() {
        let x0 = z[i];
        z[i] = x0 + h;
        let plus = density(&z) * field(&z)[i];
        z[i] = x0 - h;
        let minus = density(&z) * field(&z)[i];
        z[i] = x0;
        div += (plus - minus) / (2.0 * h);
    }
    div
}

/// Near-identity averaging substitution `(θ, τ̂, α̂) ↦ (τ, α)`.
pub fn near_identity_transform(theta: f64, tau_hat: f64, alpha_hat: f64, eps: Epsilon) -> (f64, f64) {
    let e = eps.get();
    let sc = theta.sin() * theta.cos();
    (tau_hat + e * tau_hat * alpha_hat * sc, alpha_hat - e * tau_hat * sc)
}

/// Density of the invariant volume element in near-identity coordinates:
/// the pulled-back Gibbs factor times the Jacobian of the substitution.
pub fn transformed_density(theta: f64, tau_hat: f64, alpha_hat: f64, eps: Epsilon) -> f64 {
    let e = eps.get();
    let (sn, cs) = theta.sin_cos();
    let sc = sn * cs;
    let s2t = (2.0 * theta).sin();
    let gibbs = (-tau_hat - 0.5 * alpha_hat * alpha_hat).exp();
    let correction = (-0.5 * e * e * tau_hat * tau_hat * sc * sc).exp();
    let jacobian = 1.0 + 0.5 * e * alpha_hat * s2t + 0.25 * e * e * tau_hat * s2t * s2t;
    gibbs * correction * jacobian
}

// ---------------------------------------------------------------------------
// General systems
// ---------------------------------------------------------------------------

/// Potential energy `V(q)` on `R^{nM}` with its gradient.
pub trait Potential: Send + Sync {
    fn value(&self, q: &[f64]) -> f64;
    fn gradient(&self, q: &[f64], out: &mut [f64]);
}

/// `V(q) = Σ k q_i² / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPotential {
    pub stiffness: f64,
}

impl Default for HarmonicPotential {
    fn default() -> Self {
        Self { stiffness: 1.0 }
    }
}

impl Potential for HarmonicPotential {
    fn value(&self, q: &[f64]) -> f64 {
        0.5 * self.stiffness * q.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        for (g, x) in out.iter_mut().zip(q) {
            *g = self.stiffness * x;
        }
    }
}

/// Potential assembled from a pair of closures.
pub struct FnPotential<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FnPotential<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(value: V, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<V, G> Potential for FnPotential<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn value(&self, q: &[f64]) -> f64 {
        (self.value)(q)
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        (self.gradient)(q, out)
    }
}

/// Relative tolerance of the gradient consistency check done on construction.
const GRADIENT_CHECK_TOL: f64 = 1e-5;

/// A thermostatted system with `nM` degrees of freedom.
///
/// `thermostat_masses` has one entry for plain Nosé-Hoover and `M_ext`
/// entries for a chain.
#[derive(Clone)]
pub struct GeneralSystem {
    masses: Vec<f64>,
    beta: f64,
    thermostat_masses: Vec<f64>,
    potential: Arc<dyn Potential>,
}

impl fmt::Debug for GeneralSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralSystem")
            .field("masses", &self.masses)
            .field("beta", &self.beta)
            .field("thermostat_masses", &self.thermostat_masses)
            .finish_non_exhaustive()
    }
}

/// Time derivative of a general Nosé-Hoover state.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralDerivative {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dxi: f64,
}

/// Time derivative of a general chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDerivative {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dxi: Vec<f64>,
}

impl GeneralSystem {
    /// Validates all parameters and checks the gradient against central
    /// differences of the potential at a few deterministic points.
    pub fn new(
        masses: Vec<f64>,
        beta: f64,
        thermostat_masses: Vec<f64>,
        potential: Arc<dyn Potential>,
    ) -> Result<Self> {
        if masses.is_empty() {
            return Err(invalid("masses", "need at least one degree of freedom"));
        }
        if masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(invalid("masses", "all masses must be finite and > 0"));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid("beta", format!("must be finite and > 0, got {beta}")));
        }
        if thermostat_masses.is_empty() {
            return Err(invalid("thermostat_masses", "need at least one thermostat"));
        }
        if thermostat_masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(invalid(
                "thermostat_masses",
                "all thermostat masses must be finite and > 0",
            ));
        }
        let sys = Self {
            masses,
            beta,
            thermostat_masses,
            potential,
        };
        let n = sys.dof();
        for probe in [0.0, 0.37, -0.81] {
            let q: Vec<f64> = (0..n).map(|i| probe * (1.0 + 0.25 * i as f64)).collect();
            let err = sys.gradient_error(&q, 1e-5);
            if err > GRADIENT_CHECK_TOL {
                return Err(invalid(
                    "potential_gradient",
                    format!("inconsistent with potential (error {err:e} at {q:?})"),
                ));
            }
        }
        Ok(sys)
    }

    /// One-dimensional harmonic oscillator, `m = 1`, with the given β and
    /// thermostat masses.
    pub fn harmonic(beta: f64, thermostat_masses: Vec<f64>) -> Result<Self> {
        Self::new(
            vec![1.0],
            beta,
            thermostat_masses,
            Arc::new(HarmonicPotential::default()),
        )
    }

    /// Total number of degrees of freedom `nM`.
    pub fn dof(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn thermostat_masses(&self) -> &[f64] {
        &self.thermostat_masses
    }

    pub fn chain_length(&self) -> usize {
        self.thermostat_masses.len()
    }

    /// Max relative deviation between the analytic gradient and central
    /// differences of `V` at `q`.
    pub fn gradient_error(&self, q: &[f64], h: f64) -> f64 {
        let mut grad = vec![0.0; q.len()];
        self.potential.gradient(q, &mut grad);
        let mut z = q.to_vec();
        let mut worst: f64 = 0.0;
        for i in 0..q.len() {
            let x0 = z[i];
            z[i] = x0 + h;
            let vp = self.potential.value(&z);
            z[i] = x0 - h;
            let vm = self.potential.value(&z);
            z[i] = x0;
            let fd = (vp - vm) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
        }
        worst
    }

    /// `H(q, p) = Σ p_i²/2m_i + V(q)`.
    pub fn hamiltonian(&self, q: &[f64], p: &[f64]) -> f64 {
        let kinetic: f64 = p.iter().zip(&self.masses).map(|(p, m)| p * p / (2.0 * m)).sum();
        kinetic + self.potential.value(q)
    }

    fn check_dims(&self, q: &[f64], p: &[f64]) -> Result<()> {
        let n = self.dof();
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                what: "q",
                expected: n,
                got: q.len(),
            });
        }
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                what: "p",
                expected: n,
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Nosé-Hoover field using the first thermostat mass.
    pub fn nh_field(&self, q: &[f64], p: &[f64], xi: f64) -> Result<GeneralDerivative> {
        self.check_dims(q, p)?;
        let q_mass = self.thermostat_masses[0];
        let mut grad = vec![0.0; q.len()];
        self.potential.gradient(q, &mut grad);
        let dq = p.iter().zip(&self.masses).map(|(p, m)| p / m).collect();
        let dp = grad.iter().zip(p).map(|(g, p)| -g - xi / q_mass * p).collect();
        Ok(GeneralDerivative {
            dq,
            dp,
            dxi: self.twice_kinetic(p) - self.dof() as f64 / self.beta,
        })
    }

    /// Chain field with `M_ext = xis.len()` thermostats.
    pub fn nhc_field(&self, q: &[f64], p: &[f64], xis: &[f64]) -> Result<ChainDerivative> {
        self.check_dims(q, p)?;
        let m = xis.len();
        if m < 1 {
            return Err(invalid("xis", "chain needs at least one thermostat"));
        }
        if m != self.chain_length() {
            return Err(Error::DimensionMismatch {
                what: "xis",
                expected: self.chain_length(),
                got: m,
            });
        }
        let qs = &self.thermostat_masses;
        let kt = 1.0 / self.beta;
        let mut grad = vec![0.0; q.len()];
        self.potential.gradient(q, &mut grad);
        let dq = p.iter().zip(&self.masses).map(|(p, m)| p / m).collect();
        let dp = grad.iter().zip(p).map(|(g, p)| -g - xis[0] / qs[0] * p).collect();
        let mut dxi = vec![0.0; m];
        for j in 0..m {
            let drive = if j == 0 {
                self.twice_kinetic(p) - self.dof() as f64 * kt
            } else {
                xis[j - 1] * xis[j - 1] / qs[j - 1] - kt
            };
            let friction = if j + 1 < m {
                xis[j + 1] / qs[j + 1] * xis[j]
            } else {
                0.0
            };
            dxi[j] = drive - friction;
        }
        Ok(ChainDerivative { dq, dp, dxi })
    }

    /// Unnormalized density `exp(−β[H + Σ ξ_j²/2Q_j])`; `xis` may be shorter
    /// than the chain (plain Nosé-Hoover uses one entry).
    pub fn gibbs_density(&self, q: &[f64], p: &[f64], xis: &[f64]) -> f64 {
        let th: f64 = xis
            .iter()
            .zip(&self.thermostat_masses)
            .map(|(x, m)| x * x / (2.0 * m))
            .sum();
        (-self.beta * (self.hamiltonian(q, p) + th)).exp()
    }

    /// Splits a flat `[q.., p.., ξ..]` vector.
    pub fn split_flat<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let n = self.dof();
        (&z[..n], &z[n..2 * n], &z[2 * n..])
    }

    /// Flat-vector form of [`GeneralSystem::nh_field`], for divergence checks.
    pub fn nh_flat_field(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (q, p, xi) = self.split_flat(z);
        if xi.len() != 1 {
            return Err(Error::DimensionMismatch {
                what: "flat state",
                expected: 2 * self.dof() + 1,
                got: z.len(),
            });
        }
        let d = self.nh_field(q, p, xi[0])?;
        Ok(d.dq.into_iter().chain(d.dp).chain(std::iter::once(d.dxi)).collect())
    }

    /// Flat-vector form of [`GeneralSystem::nhc_field`].
    pub fn nhc_flat_field(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (q, p, xis) = self.split_flat(z);
        let d = self.nhc_field(q, p, xis)?;
        Ok(d.dq.into_iter().chain(d.dp).chain(d.dxi).collect())
    }

    pub fn flat_density(&self, z: &[f64]) -> f64 {
        let (q, p, xis) = self.split_flat(z);
        self.gibbs_density(q, p, xis)
    }

    fn twice_kinetic(&self, p: &[f64]) -> f64 {
        p.iter().zip(&self.masses).map(|(p, m)| p * p / m).sum()
    }
}

// ---------------------------------------------------------------------------
// Field objects for the integrators
// ---------------------------------------------------------------------------

/// Cartesian Nosé-Hoover oscillator on `(q, p, ξ)`.
#[derive(Debug, Clone, Copy)]
pub struct NoseHoover(pub Epsilon);

impl VectorField<3> for NoseHoover {
    fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        nh_field(PhysState::from_array(*x), self.0).to_array()
    }
}

/// Cartesian two-thermostat chain on `(q, p, ξ₁, ξ₂)`.
#[derive(Debug, Clone, Copy)]
pub struct NoseHooverChain(pub Epsilon);

impl VectorField<4> for NoseHooverChain {
    fn eval(&self, x: &[f64; 4]) -> [f64; 4] {
        nhc_field(ChainState::from_array(*x), self.0).to_array()
    }
}

/// Action-angle Nosé-Hoover field on `(θ, τ, α)`.
#[derive(Debug, Clone, Copy)]
pub struct NoseHooverAA(pub Epsilon);

impl VectorField<3> for NoseHooverAA {
    fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        nh_aa_field(AAState::from_array(*x), self.0).to_array()
    }
}

/// Action-angle chain field on `(θ, τ, α₁, α₂)`.
#[derive(Debug, Clone, Copy)]
pub struct NoseHooverChainAA(pub Epsilon);

impl VectorField<4> for NoseHooverChainAA {
    fn eval(&self, x: &[f64; 4]) -> [f64; 4] {
        nhc_aa_field(ChainAAState::from_array(*x), self.0).to_array()
    }
}

/// First-order averaged field on `(θ, τ̂, α̂)`.
#[derive(Debug, Clone, Copy)]
pub struct FirstOrderAveraged(pub Epsilon);

impl VectorField<3> for FirstOrderAveraged {
    fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        nh_avg_firstorder_field(AAState::from_array(*x), self.0).to_array()
    }
}

/// Averaged Nosé-Hoover system on `(τ, α)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Averaged;

impl VectorField<2> for Averaged {
    fn eval(&self, x: &[f64; 2]) -> [f64; 2] {
        nh_averaged_field(x[0], x[1])
    }
}

/// Averaged chain on `(τ, α₁, α₂)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChainAveraged;

impl VectorField<3> for ChainAveraged {
    fn eval(&self, x: &[f64; 3]) -> [f64; 3] {
        nhc_averaged_field(x[0], x[1], x[2])
    }
}

/// Averaged system in Hamiltonian form on `(σ, α)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HamiltonianForm;

impl VectorField<2> for HamiltonianForm {
    fn eval(&self, x: &[f64; 2]) -> [f64; 2] {
        hamiltonian_form_field(x[0], x[1])
    }
}
