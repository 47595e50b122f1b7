//! Statistical diagnostics of sampled trajectories against the canonical
//! Gibbs measure of the harmonic oscillator (`β = 1`).
//!
//! All accumulators are single-writer and support an associative `merge`,
//! so chunks of a run (or independent runs) can be collected in parallel.

use std::f64::consts::TAU;
use std::ops::ControlFlow;

use crate::dynamics::normalize_angle;
use crate::error::{invalid, Error, Result};
use crate::integrators::Observer;
use crate::sections::linear_fit;

/// Amplitude cutoff used for histograms and discrepancies.
pub const DEFAULT_R_CUTOFF: f64 = 4.0;
/// Grid resolution of the discrepancy supremum in each direction.
pub const DEFAULT_GRID: usize = 100;

/// Uniform angular marginal `1/2π` on `[0, 2π]`.
pub fn theo_angular_pdf(theta: f64) -> f64 {
    if (0.0..=TAU).contains(&theta) {
        1.0 / TAU
    } else {
        0.0
    }
}

/// Amplitude marginal `r e^{−r²/2}` of `r = √(q² + p²)`.
pub fn theo_amplitude_pdf(r: f64) -> f64 {
    if r < 0.0 {
        0.0
    } else {
        r * (-0.5 * r * r).exp()
    }
}

/// Joint CDF of `(θ, r)`: `(θ/2π)(1 − e^{−r²/2})`, arguments clamped to the
/// support.
pub fn theo_cdf(theta: f64, r: f64) -> f64 {
    let t = theta.clamp(0.0, TAU) / TAU;
    let rr = r.max(0.0);
    t * -(-0.5 * rr * rr).exp_m1()
}

/// Fixed-bin histogram on `[lo, hi)`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    below: u64,
    above: u64,
}

/// How a histogram count is turned into a density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `count / (total · width)`; integrates to the in-range fraction.
    Total,
    /// `count / (in_range · width)`; integrates to one over `[lo, hi]`.
    InRange,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("histogram bounds", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n_bins < 1 {
            return Err(invalid("n_bins", "need at least one bin"));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; n_bins],
            below: 0,
            above: 0,
        })
    }

    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        let mut h = Self::new(lo, hi, n_bins)?;
        for x in samples {
            h.add(*x);
        }
        Ok(h)
    }

    pub fn add(&mut self, x: f64) {
        if x < self.lo || x.is_nan() {
            self.below += 1;
        } else if x > self.hi {
            self.above += 1;
        } else {
            let n = self.counts.len();
            let i = (((x - self.lo) / self.width()) as usize).min(n - 1);
            self.counts[i] += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi || self.counts.len() != other.counts.len() {
            return Err(invalid("histogram", "cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.below += other.below;
        self.above += other.above;
        Ok(())
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn out_of_range(&self) -> u64 {
        self.below + self.above
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.out_of_range()
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn density(&self, i: usize, norm: Normalization) -> f64 {
        let denom = match norm {
            Normalization::Total => self.total(),
            Normalization::InRange => self.in_range(),
        };
        if denom == 0 {
            0.0
        } else {
            self.counts[i] as f64 / (denom as f64 * self.width())
        }
    }

    pub fn densities(&self, norm: Normalization) -> Vec<f64> {
        (0..self.n_bins()).map(|i| self.density(i, norm)).collect()
    }
}

/// Sup over bins of `|density − pdf(midpoint)|`.
pub fn distribution_error(h: &Histogram, pdf: impl Fn(f64) -> f64, norm: Normalization) -> f64 {
    (0..h.n_bins())
        .map(|i| (h.density(i, norm) - pdf(h.midpoint(i))).abs())
        .fold(0.0, f64::max)
}

/// A point in the `(θ, r)` plane with `θ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRadiusSample {
    pub theta: f64,
    pub r: f64,
}

impl AngleRadiusSample {
    pub fn new(theta: f64, r: f64) -> Self {
        Self {
            theta: normalize_angle(theta),
            r,
        }
    }

    /// Oscillator phase and amplitude: `θ = atan2(−p, q)`, `r = √(q² + p²)`.
    pub fn from_qp(q: f64, p: f64) -> Self {
        Self::new((-p).atan2(q), q.hypot(p))
    }
}

/// Grid nodes `θ_k = 2kπ/n` and `r_l = l r_c/n`, `1 ≤ k, l ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyGrid {
    pub n: usize,
    pub r_cutoff: f64,
}

impl DiscrepancyGrid {
    pub fn new(n: usize, r_cutoff: f64) -> Result<Self> {
        if n < 1 {
            return Err(invalid("grid_n", "need at least one grid line"));
        }
        if !(r_cutoff > 0.0) || !r_cutoff.is_finite() {
            return Err(invalid("r_c", format!("cutoff must be finite and > 0, got {r_cutoff}")));
        }
        Ok(Self { n, r_cutoff })
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * k as f64 * std::f64::consts::PI / self.n as f64
    }

    pub fn radius(&self, l: usize) -> f64 {
        l as f64 * self.r_cutoff / self.n as f64
    }

    /// Smallest `k ≥ 1` with `x ≤ node(k)`; `None` past the last node.
    fn cell(x: f64, n: usize, node: impl Fn(usize) -> f64) -> Option<usize> {
        if x > node(n) {
            return None;
        }
        let guess = (x / node(1)).ceil().clamp(1.0, n as f64) as usize;
        let mut k = guess;
        while k > 1 && x <= node(k - 1) {
            k -= 1;
        }
        while x > node(k) {
            k += 1;
        }
        Some(k)
    }
}

impl Default for DiscrepancyGrid {
    fn default() -> Self {
        Self {
            n: DEFAULT_GRID,
            r_cutoff: DEFAULT_R_CUTOFF,
        }
    }
}

/// Streaming star-discrepancy accumulator: per-cell counts on the grid, so
/// evaluating the supremum costs `O(n²)` independent of the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyAccumulator {
    grid: DiscrepancyGrid,
    cells: Vec<u64>,
    retained: u64,
    excluded: u64,
}

impl DiscrepancyAccumulator {
    pub fn new(grid: DiscrepancyGrid) -> Self {
        Self {
            grid,
            cells: vec![0; grid.n * grid.n],
            retained: 0,
            excluded: 0,
        }
    }

    pub fn grid(&self) -> DiscrepancyGrid {
        self.grid
    }

    /// Samples with `r ≤ r_c` that entered the statistic.
    pub fn retained(&self) -> u64 {
        self.retained
    }

    /// Samples beyond the amplitude cutoff.
    pub fn excluded(&self) -> u64 {
        self.excluded
    }

    pub fn add(&mut self, s: AngleRadiusSample) {
        let g = self.grid;
        let Some(l) = DiscrepancyGrid::cell(s.r, g.n, |l| g.radius(l)) else {
            self.excluded += 1;
            return;
        };
        let theta = normalize_angle(s.theta);
        let k = DiscrepancyGrid::cell(theta, g.n, |k| g.theta(k)).unwrap_or(g.n);
        self.cells[(k - 1) * g.n + (l - 1)] += 1;
        self.retained += 1;
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(invalid(
                "discrepancy grid",
                "cannot merge accumulators on different grids",
            ));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.retained += other.retained;
        self.excluded += other.excluded;
        Ok(())
    }

    /// `max_{k,l} |F_N(θ_k, r_l) − F(θ_k, r_l)|` over retained samples.
    pub fn star_discrepancy(&self) -> Result<f64> {
        if self.retained == 0 {
            return Err(Error::NotEnoughData { needed: 1, got: 0 });
        }
        let g = self.grid;
        let n = g.n;
        let total = self.retained as f64;
        // column[l] accumulates counts with k' ≤ k and l' = l
        let mut column = vec![0u64; n];
        let mut sup: f64 = 0.0;
        for k in 1..=n {
            let mut running = 0u64;
            for l in 1..=n {
                column[l - 1] += self.cells[(k - 1) * n + (l - 1)];
                running += column[l - 1];
                let empirical = running as f64 / total;
                sup = sup.max((empirical - theo_cdf(g.theta(k), g.radius(l))).abs());
            }
        }
        Ok(sup)
    }
}

/// Star discrepancy of a finite sample on `grid`.
pub fn star_discrepancy(samples: &[AngleRadiusSample], grid: DiscrepancyGrid) -> Result<f64> {
    let mut acc = DiscrepancyAccumulator::new(grid);
    for s in samples {
        acc.add(*s);
    }
    acc.star_discrepancy()
}

/// `D ≈ C / N^a` fitted by least squares in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub c: f64,
    pub a: f64,
    pub c_stderr: f64,
    pub a_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscrepancyCurve {
    /// `(N, D_N*)` with `N` strictly increasing.
    pub entries: Vec<(u64, f64)>,
    pub fit: Option<PowerLawFit>,
}

pub fn lms_fit(entries: &[(u64, f64)]) -> Result<PowerLawFit> {
    if entries.len() < 3 {
        return Err(Error::NotEnoughData {
            needed: 3,
            got: entries.len(),
        });
    }
    if entries.iter().any(|(n, d)| *n == 0 || !(*d > 0.0)) {
        return Err(invalid("entries", "power-law fit needs N > 0 and D > 0"));
    }
    let xs: Vec<f64> = entries.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = entries.iter().map(|(_, d)| d.ln()).collect();
    let (slope, intercept, se_slope, se_intercept) = linear_fit(&xs, &ys);
    let c = intercept.exp();
    Ok(PowerLawFit {
        c,
        a: -slope,
        c_stderr: c * se_intercept,
        a_stderr: se_slope,
    })
}

/// Star discrepancy of every prefix of `samples` whose length is a
/// checkpoint; the fit is attached when at least three checkpoints exist.
pub fn discrepancy_curve<I>(samples: I, checkpoints: &[u64], grid: DiscrepancyGrid) -> Result<DiscrepancyCurve>
where
    I: IntoIterator<Item = AngleRadiusSample>,
{
    let mut obs = DiscrepancyObserver::new(grid, checkpoints)?;
    for s in samples {
        obs.push(s)?;
        if obs.done() {
            break;
        }
    }
    obs.finish()
}

/// Collects `(θ, r)` statistics from Cartesian oscillator states.
#[derive(Debug, Clone)]
pub struct DiscrepancyObserver {
    acc: DiscrepancyAccumulator,
    checkpoints: Vec<u64>,
    next: usize,
    seen: u64,
    entries: Vec<(u64, f64)>,
}

impl DiscrepancyObserver {
    pub fn new(grid: DiscrepancyGrid, checkpoints: &[u64]) -> Result<Self> {
        if checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints.first() == Some(&0) {
            return Err(invalid("checkpoints", "must be positive and strictly increasing"));
        }
        Ok(Self {
            acc: DiscrepancyAccumulator::new(grid),
            checkpoints: checkpoints.to_vec(),
            next: 0,
            seen: 0,
            entries: Vec::new(),
        })
    }

    pub fn push(&mut self, s: AngleRadiusSample) -> Result<()> {
        self.acc.add(s);
        self.seen += 1;
        if self.next < self.checkpoints.len() && self.seen == self.checkpoints[self.next] {
            self.entries.push((self.seen, self.acc.star_discrepancy()?));
            self.next += 1;
        }
        Ok(())
    }

    pub fn done(&self) -> bool {
        self.next == self.checkpoints.len()
    }

    pub fn accumulator(&self) -> &DiscrepancyAccumulator {
        &self.acc
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn finish(self) -> Result<DiscrepancyCurve> {
        let fit = if self.entries.len() >= 3 {
            Some(lms_fit(&self.entries)?)
        } else {
            None
        };
        Ok(DiscrepancyCurve {
            entries: self.entries,
            fit,
        })
    }
}

impl<const N: usize> Observer<N> for DiscrepancyObserver {
    fn observe(&mut self, _t: f64, x: &[f64; N]) -> ControlFlow<()> {
        // checkpoints are validated, so the discrepancy is always defined
        // unless every sample so far lies past the cutoff
        if self.push(AngleRadiusSample::from_qp(x[0], x[1])).is_err() {
            self.entries.push((self.seen, 1.0));
            self.next += 1;
        }
        if self.done() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
}

/// Angular and amplitude histograms of Cartesian oscillator states.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistograms {
    pub angle: Histogram,
    pub amplitude: Histogram,
}

impl PhaseHistograms {
    pub fn new(n_bins: usize, r_cutoff: f64) -> Result<Self> {
        Ok(Self {
            angle: Histogram::new(0.0, TAU, n_bins)?,
            amplitude: Histogram::new(0.0, r_cutoff, n_bins)?,
        })
    }

    pub fn push(&mut self, s: AngleRadiusSample) {
        self.angle.add(s.theta);
        self.amplitude.add(s.r);
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.angle.merge(&other.angle)?;
        self.amplitude.merge(&other.amplitude)
    }
}

impl<const N: usize> Observer<N> for PhaseHistograms {
    fn observe(&mut self, _t: f64, x: &[f64; N]) -> ControlFlow<()> {
        self.push(AngleRadiusSample::from_qp(x[0], x[1]));
        ControlFlow::Continue(())
    }
}

/// Running time average of `p²` (momentum at index 1).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KineticAverage {
    sum: f64,
    count: u64,
}

impl KineticAverage {
    pub fn push(&mut self, p: f64) {
        self.sum += p * p;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.sum += other.sum;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

impl<const N: usize> Observer<N> for KineticAverage {
    fn observe(&mut self, _t: f64, x: &[f64; N]) -> ControlFlow<()> {
        self.push(x[1]);
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn theoretical_marginals() {
        assert!((theo_angular_pdf(1.0) - 0.159_155).abs() < 1e-6);
        assert_eq!(theo_angular_pdf(-0.1), 0.0);
        assert_eq!(theo_amplitude_pdf(0.0), 0.0);
        assert!((theo_amplitude_pdf(1.0) - (-0.5f64).exp()).abs() < 1e-16);
        assert!((theo_amplitude_pdf(1.0) - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn theoretical_cdf() {
        assert_eq!(theo_cdf(TAU, f64::INFINITY), 1.0);
        for r in [0.3, 1.0, 2.5] {
            assert!((theo_cdf(std::f64::consts::PI, r) - 0.5 * (1.0 - (-0.5 * r * r).exp())).abs() < 1e-16);
        }
        assert!((theo_cdf(TAU, 4.0) - 0.999_664_537_372_097_5).abs() < 1e-15);
        assert_eq!(theo_cdf(0.0, 2.0), 0.0);
        assert_eq!(theo_cdf(2.0, 0.0), 0.0);
    }

    #[test]
    fn histogram_validation() {
        assert!(Histogram::new(1.0, 1.0, 10).is_err());
        assert!(Histogram::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn histogram_counts_and_out_of_range() {
        let h = Histogram::from_samples(&[-1.0, 0.0, 0.5, 0.99, 1.0, 2.0, f64::NAN], 0.0, 1.0, 2).unwrap();
        assert_eq!(h.counts(), &[1, 3]);
        assert_eq!(h.out_of_range(), 3);
        assert_eq!(h.total(), 7);
    }

    #[test]
    fn empty_histogram_error_is_peak_pdf() {
        let h = Histogram::new(0.0, 4.0, 100).unwrap();
        let expected = (0..100).map(|i| theo_amplitude_pdf(h.midpoint(i))).fold(0.0, f64::max);
        assert_eq!(
            distribution_error(&h, theo_amplitude_pdf, Normalization::Total),
            expected
        );
    }

    #[test]
    fn stratified_sample_error_is_small() {
        // amplitude quantiles (i − ½)/N of F(r) = 1 − e^{−r²/2}
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (-2.0 * (-u).ln_1p()).sqrt()
            })
            .collect();
        let h = Histogram::from_samples(&samples, 0.0, 4.0, 100).unwrap();
        let err = distribution_error(&h, theo_amplitude_pdf, Normalization::Total);
        // bin-averaging error ≈ w²/24·|f″| ≤ 2.5e-4 plus 1/(N w) = 2.5e-4
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn uniform_angles_match_flat_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let mut h = Histogram::new(0.0, TAU, 100).unwrap();
        for _ in 0..1_000_000 {
            h.add(rng.random_range(0.0..TAU));
        }
        assert!(distribution_error(&h, theo_angular_pdf, Normalization::Total) < 5e-3);
    }

    #[test]
    fn density_integrates_to_in_range_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..5.0)).collect();
        let h = Histogram::from_samples(&samples, 0.0, 4.0, 37).unwrap();
        let integral: f64 = h.densities(Normalization::Total).iter().sum::<f64>() * h.width();
        let frac = h.in_range() as f64 / h.total() as f64;
        assert!((integral - frac).abs() < 1e-12);
        let unit: f64 = h.densities(Normalization::InRange).iter().sum::<f64>() * h.width();
        assert!((unit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_merge_is_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random_range(-0.5..1.5)).collect();
        let whole = Histogram::from_samples(&xs, 0.0, 1.0, 13).unwrap();
        let mut a = Histogram::from_samples(&xs[..1234], 0.0, 1.0, 13).unwrap();
        let b = Histogram::from_samples(&xs[1234..], 0.0, 1.0, 13).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a, whole);
        assert!(a.merge(&Histogram::new(0.0, 1.0, 12).unwrap()).is_err());
    }

    #[test]
    fn single_sample_at_origin() {
        let d = star_discrepancy(&[AngleRadiusSample::new(0.0, 0.0)], DiscrepancyGrid::default()).unwrap();
        let expected = 1.0 - theo_cdf(TAU / 100.0, 0.04);
        assert!((d - expected).abs() < 1e-15);
        assert!((d - (1.0 - 7.997e-6)).abs() < 1e-8);
    }

    #[test]
    fn empty_sample_is_error() {
        assert!(star_discrepancy(&[], DiscrepancyGrid::default()).is_err());
        // everything past the cutoff counts as empty
        assert!(star_discrepancy(&[AngleRadiusSample::new(1.0, 5.0)], DiscrepancyGrid::default()).is_err());
    }

    #[test]
    fn stratified_quasi_uniform_sample_has_low_discrepancy() {
        // 100 × 100 cell-centred lattice pushed through the inverse CDF
        let m = 100;
        let mut samples = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let u = (i as f64 + 0.5) / m as f64;
                let v = (j as f64 + 0.5) / m as f64;
                samples.push(AngleRadiusSample::new(TAU * u, (-2.0 * (-v).ln_1p()).sqrt()));
            }
        }
        let d = star_discrepancy(&samples, DiscrepancyGrid::default()).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn boundary_samples_count_as_inside() {
        let g = DiscrepancyGrid::default();
        let mut acc = DiscrepancyAccumulator::new(g);
        acc.add(AngleRadiusSample::new(g.theta(3), g.radius(7)));
        // the sample sits on the corner (θ₃, r₇): cell (3, 7)
        assert_eq!(acc.cells[2 * g.n + 6], 1);
        acc.add(AngleRadiusSample::new(0.0, g.r_cutoff));
        assert_eq!(acc.retained(), 2);
        acc.add(AngleRadiusSample::new(0.0, g.r_cutoff * (1.0 + 1e-15)));
        assert_eq!(acc.excluded(), 1);
    }

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let samples: Vec<AngleRadiusSample> = (0..3000)
            .map(|_| AngleRadiusSample::new(rng.random_range(0.0..TAU), rng.random_range(0.0..4.5)))
            .collect();
        let g = DiscrepancyGrid::default();
        let mut whole = DiscrepancyAccumulator::new(g);
        samples.iter().for_each(|s| whole.add(*s));
        let mut a = DiscrepancyAccumulator::new(g);
        let mut b = DiscrepancyAccumulator::new(g);
        samples[..1000].iter().for_each(|s| a.add(*s));
        samples[1000..].iter().for_each(|s| b.add(*s));
        a.merge(&b).unwrap();
        assert_eq!(a, whole);
    }

    #[test]
    fn lms_fit_recovers_power_law() {
        let entries: Vec<(u64, f64)> = [1e7f64, 3e7, 1e8, 3e8, 1e9]
            .iter()
            .map(|n| (*n as u64, 11.1 / n.powf(0.483)))
            .collect();
        let fit = lms_fit(&entries).unwrap();
        assert!((fit.c - 11.1).abs() < 1e-6 && (fit.a - 0.483).abs() < 1e-6, "{fit:?}");
        assert!(fit.a_stderr < 1e-10);

        let flat: Vec<(u64, f64)> = [10, 100, 1000, 10_000].iter().map(|n| (*n, 0.25)).collect();
        let fit = lms_fit(&flat).unwrap();
        assert!(fit.a.abs() < 1e-14 && (fit.c - 0.25).abs() < 1e-14);

        assert!(matches!(lms_fit(&flat[..2]), Err(Error::NotEnoughData { .. })));
    }

    #[test]
    fn iid_samples_decay_like_inverse_sqrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let stream = std::iter::repeat_with(move || {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            AngleRadiusSample::new(TAU * u, (-2.0 * (-v).ln_1p()).sqrt())
        });
        let checkpoints = [1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000];
        let curve = discrepancy_curve(stream, &checkpoints, DiscrepancyGrid::default()).unwrap();
        assert_eq!(curve.entries.len(), checkpoints.len());
        let fit = curve.fit.unwrap();
        assert!((0.4..=0.6).contains(&fit.a), "{fit:?}");
    }

    #[test]
    fn checkpoints_must_increase() {
        assert!(DiscrepancyObserver::new(DiscrepancyGrid::default(), &[10, 10]).is_err());
        assert!(DiscrepancyObserver::new(DiscrepancyGrid::default(), &[0, 10]).is_err());
    }

    #[test]
    fn kinetic_average_examples() {
        let mut k = KineticAverage::default();
        assert_eq!(k.mean(), None);
        for _ in 0..10 {
            k.push(1.0);
        }
        assert_eq!(k.mean(), Some(1.0));

        // exact oscillator through (√2, 0): p = −√2 sin t, τ = 1
        let mut k = KineticAverage::default();
        let n = 10_000;
        for i in 0..n {
            let t = 3.0 * TAU * i as f64 / n as f64;
            k.push(-(2f64).sqrt() * t.sin());
        }
        assert!((k.mean().unwrap() - 1.0).abs() < 1e-12);

        let mut other = KineticAverage::default();
        other.push(3.0);
        k.merge(&other);
        assert_eq!(k.count(), n + 1);
    }
}
