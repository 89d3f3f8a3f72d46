//! Scalar probability primitives, Gaussian mixture densities, quadrature and
//! root finding.
//!
//! Everything here is deterministic and free of shared state.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// 1/sqrt(2*pi)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Number of standard deviations kept beyond the extreme component means
/// when truncating a mixture's support.
pub const TAIL_SIGMAS: f64 = 8.0;

/// Default absolute tolerance for [`integrate_1d`].
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Upper-tail probability of the standard normal, `Q(u) = P(N(0,1) > u)`.
///
/// NaN propagates; use [`q_function_checked`] where a NaN argument should be
/// reported as an error.
#[inline]
pub fn q_function(u: f64) -> f64 {
    0.5 * libm::erfc(u / SQRT_2)
}

pub fn q_function_checked(u: f64) -> Result<f64> {
    if u.is_nan() {
        return Err(Error::Domain("Q(NaN)".into()));
    }
    Ok(q_function(u))
}

/// Density of `N(mean, sigma^2)` at `z`.
#[inline]
pub fn normal_pdf(z: f64, mean: f64, sigma: f64) -> f64 {
    let u = (z - mean) / sigma;
    INV_SQRT_2PI / sigma * (-0.5 * u * u).exp()
}

/// Probability mass of `N(mean, sigma^2)` on `[lo, hi]`. Infinite ends allowed.
#[inline]
pub fn normal_mass(lo: f64, hi: f64, mean: f64, sigma: f64) -> f64 {
    let a = (lo - mean) / sigma;
    let b = (hi - mean) / sigma;
    // Pick the representation that avoids cancellation in the far tails.
    if a >= 0.0 {
        q_function(a) - q_function(b)
    } else if b <= 0.0 {
        q_function(-b) - q_function(-a)
    } else {
        1.0 - q_function(-a) - q_function(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component1D {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

/// Finite Gaussian mixture on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture1D {
    components: Vec<Component1D>,
}

impl Mixture1D {
    pub fn new(components: Vec<Component1D>) -> Result<Self> {
        ensure(!components.is_empty(), || "mixture has no components".into())?;
        let mut total = 0.0;
        for c in &components {
            ensure((0.0..=1.0).contains(&c.weight), || {
                format!("component weight {} is not a probability", c.weight)
            })?;
            ensure(c.mean.is_finite(), || format!("component mean {} is not finite", c.mean))?;
            ensure(c.sigma > 0.0 && c.sigma.is_finite(), || {
                format!("component sigma {} must be positive", c.sigma)
            })?;
            total += c.weight;
        }
        ensure((total - 1.0).abs() <= WEIGHT_SUM_TOL, || {
            format!("weights sum to {total}, expected 1")
        })?;
        Ok(Self { components })
    }

    pub fn gaussian(mean: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![Component1D { weight: 1.0, mean, sigma }])
    }

    pub fn components(&self) -> &[Component1D] {
        &self.components
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * normal_pdf(z, c.mean, c.sigma))
            .sum()
    }

    pub fn max_sigma(&self) -> f64 {
        self.components.iter().map(|c| c.sigma).fold(0.0, f64::max)
    }

    /// `[min mean - k*sigma_max, max mean + k*sigma_max]`.
    pub fn support(&self, k_sigmas: f64) -> (f64, f64) {
        let s = self.max_sigma();
        let lo = self.components.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
        let hi = self.components.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
        (lo - k_sigmas * s, hi + k_sigmas * s)
    }
}

pub fn mixture_pdf_1d(m: &Mixture1D, z: f64) -> f64 {
    m.pdf(z)
}

/// Shared covariance of a bivariate mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance2D {
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl Covariance2D {
    pub fn new(sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        ensure(sigma1 > 0.0 && sigma1.is_finite(), || format!("sigma1 = {sigma1}"))?;
        ensure(sigma2 > 0.0 && sigma2.is_finite(), || format!("sigma2 = {sigma2}"))?;
        ensure(rho.abs() < 1.0, || format!("|rho| must be < 1, got {rho}"))?;
        Ok(Self { sigma1, sigma2, rho })
    }

    /// Standard deviation of the second coordinate given the first.
    pub fn conditional_sigma2(&self) -> f64 {
        self.sigma2 * (1.0 - self.rho * self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component2D {
    pub weight: f64,
    pub mean1: f64,
    pub mean2: f64,
}

/// Bivariate Gaussian mixture whose components share one covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture2D {
    components: Vec<Component2D>,
    cov: Covariance2D,
}

/// Slice of a [`Mixture2D`] along a fixed first coordinate: a 1-D mixture in
/// the second coordinate with unnormalized weights.
#[derive(Debug, Clone)]
pub(crate) struct RowSlice {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sigma: f64,
}

impl RowSlice {
    pub fn eval(&self, z2: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * normal_pdf(z2, *m, self.sigma))
            .sum()
    }

    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| if *w == 0.0 { 0.0 } else { w * normal_mass(lo, hi, *m, self.sigma) })
            .sum()
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.weights.iter_mut().for_each(|w| *w *= k);
        self
    }
}

impl Mixture2D {
    pub fn new(components: Vec<Component2D>, cov: Covariance2D) -> Result<Self> {
        ensure(!components.is_empty(), || "mixture has no components".into())?;
        let cov = Covariance2D::new(cov.sigma1, cov.sigma2, cov.rho)?;
        let mut total = 0.0;
        for c in &components {
            ensure((0.0..=1.0).contains(&c.weight), || {
                format!("component weight {} is not a probability", c.weight)
            })?;
            ensure(c.mean1.is_finite() && c.mean2.is_finite(), || "non-finite mean".into())?;
            total += c.weight;
        }
        ensure((total - 1.0).abs() <= WEIGHT_SUM_TOL, || {
            format!("weights sum to {total}, expected 1")
        })?;
        Ok(Self { components, cov })
    }

    pub fn components(&self) -> &[Component2D] {
        &self.components
    }

    pub fn covariance(&self) -> Covariance2D {
        self.cov
    }

    pub fn pdf(&self, z1: f64, z2: f64) -> f64 {
        let Covariance2D { sigma1, sigma2, rho } = self.cov;
        let one_m = 1.0 - rho * rho;
        let norm = 1.0 / (2.0 * PI * sigma1 * sigma2 * one_m.sqrt());
        self.components
            .iter()
            .map(|c| {
                let x = (z1 - c.mean1) / sigma1;
                let y = (z2 - c.mean2) / sigma2;
                let q = (x * x - 2.0 * rho * x * y + y * y) / one_m;
                c.weight * norm * (-0.5 * q).exp()
            })
            .sum()
    }

    /// Marginal of the first coordinate.
    pub fn marginal1(&self) -> Mixture1D {
        Mixture1D {
            components: self
                .components
                .iter()
                .map(|c| Component1D { weight: c.weight, mean: c.mean1, sigma: self.cov.sigma1 })
                .collect(),
        }
    }

    /// Marginal of the second coordinate.
    pub fn marginal2(&self) -> Mixture1D {
        Mixture1D {
            components: self
                .components
                .iter()
                .map(|c| Component1D { weight: c.weight, mean: c.mean2, sigma: self.cov.sigma2 })
                .collect(),
        }
    }

    /// Swap the two coordinates.
    pub fn transposed(&self) -> Mixture2D {
        Mixture2D {
            components: self
                .components
                .iter()
                .map(|c| Component2D { weight: c.weight, mean1: c.mean2, mean2: c.mean1 })
                .collect(),
            cov: Covariance2D { sigma1: self.cov.sigma2, sigma2: self.cov.sigma1, rho: self.cov.rho },
        }
    }

    /// Factor `f(z1, z2) = f(z1) f(z2 | z1)` at a fixed `z1`.
    pub(crate) fn row(&self, z1: f64) -> RowSlice {
        let Covariance2D { sigma1, sigma2, rho } = self.cov;
        let slope = rho * sigma2 / sigma1;
        let mut weights = Vec::with_capacity(self.components.len());
        let mut means = Vec::with_capacity(self.components.len());
        for c in &self.components {
            weights.push(c.weight * normal_pdf(z1, c.mean1, sigma1));
            means.push(c.mean2 + slope * (z1 - c.mean1));
        }
        RowSlice { weights, means, sigma: self.cov.conditional_sigma2() }
    }

    /// Axis-aligned box covering every component mean by `k` standard deviations.
    pub fn bounds(&self, k_sigmas: f64) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.components {
            lo[0] = lo[0].min(c.mean1);
            lo[1] = lo[1].min(c.mean2);
            hi[0] = hi[0].max(c.mean1);
            hi[1] = hi[1].max(c.mean2);
        }
        let s = [self.cov.sigma1, self.cov.sigma2];
        for i in 0..2 {
            lo[i] -= k_sigmas * s[i];
            hi[i] += k_sigmas * s[i];
        }
        (lo, hi)
    }
}

pub fn mixture_pdf_2d(m: &Mixture2D, z1: f64, z2: f64) -> f64 {
    m.pdf(z1, z2)
}

/// Uniform tensor grid on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    lo: [f64; 2],
    hi: [f64; 2],
    points: [usize; 2],
}

impl Grid2D {
    pub const DEFAULT_POINTS: usize = 801;

    pub fn new(lo: [f64; 2], hi: [f64; 2], points: [usize; 2]) -> Result<Self> {
        for i in 0..2 {
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] < hi[i]) {
                return Err(Error::Grid(format!("axis {i}: need lo < hi, got [{}, {}]", lo[i], hi[i])));
            }
            if points[i] < 2 {
                return Err(Error::Grid(format!("axis {i}: need at least 2 points")));
            }
        }
        Ok(Self { lo, hi, points })
    }

    /// Smallest grid covering every component of every mixture by
    /// [`TAIL_SIGMAS`] standard deviations.
    pub fn covering(mixtures: &[&Mixture2D], points: [usize; 2]) -> Result<Self> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for m in mixtures {
            let (l, h) = m.bounds(TAIL_SIGMAS);
            for i in 0..2 {
                lo[i] = lo[i].min(l[i]);
                hi[i] = hi[i].max(h[i]);
            }
        }
        Self::new(lo, hi, points)
    }

    pub fn lo(&self) -> [f64; 2] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 2] {
        self.hi
    }

    pub fn points(&self) -> [usize; 2] {
        self.points
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points[axis] - 1) as f64
    }

    pub fn node(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.points[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.step(axis)
        }
    }

    pub fn nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|i| self.node(axis, i)).collect()
    }

    /// Composite trapezoid weight of node `i` on `axis`.
    pub fn weight(&self, axis: usize, i: usize) -> f64 {
        let h = self.step(axis);
        if i == 0 || i + 1 == self.points[axis] {
            0.5 * h
        } else {
            h
        }
    }

    pub fn contains(&self, z1: f64, z2: f64) -> bool {
        (self.lo[0]..=self.hi[0]).contains(&z1) && (self.lo[1]..=self.hi[1]).contains(&z2)
    }

    pub fn with_points(&self, points: [usize; 2]) -> Result<Self> {
        Self::new(self.lo, self.hi, points)
    }
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 5000;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut values = [(0.0, 0.0); 7];
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let (lo, hi) = (f(c - h * x), f(c + h * x));
        values[j] = (lo, hi);
        kronrod += w * (lo + hi);
        abs_sum += w * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    // QUADPACK's scaled estimate: |K - G| relative to the integrand's spread.
    let mean = 0.5 * kronrod;
    let mut spread = WGK[7] * (fc - mean).abs();
    for (j, &(lo, hi)) in values.iter().enumerate() {
        spread += WGK[j] * ((lo - mean).abs() + (hi - mean).abs());
    }
    let (spread, abs_total) = (spread * h.abs(), abs_sum * h.abs());
    let mut err = ((kronrod - gauss) * h).abs();
    if spread != 0.0 && err != 0.0 {
        err = spread * (200.0 * err / spread).powf(1.5).min(1.0);
    }
    if abs_total > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_total);
    }
    (kronrod * h, err)
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then(other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature to absolute tolerance `tol`.
///
/// The interval with the largest error estimate is bisected until the summed
/// error estimate drops below `tol`. On exhaustion the best estimate is
/// returned inside [`Error::NonConvergence`].
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    ensure(lo.is_finite() && hi.is_finite(), || "integration limits must be finite".into())?;
    ensure(tol > 0.0, || format!("tolerance must be positive, got {tol}"))?;
    if lo == hi {
        return Ok(0.0);
    }
    let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    while total_err > tol && total_err > 50.0 * f64::EPSILON * total.abs() {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::NonConvergence { estimate: sign * total, error: total_err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NonConvergence { estimate: sign * total, error: total_err });
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Interval { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Interval { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-sum to shed drift from the running updates.
    let total: f64 = heap.iter().map(|iv| iv.value).sum();
    Ok(sign * total)
}

/// Fixed tensor-product trapezoid rule over `grid`.
///
/// Rows are summed independently and then reduced in grid order, so the
/// result does not depend on the number of worker threads.
pub fn integrate_2d<F: Fn(f64, f64) -> f64 + Sync>(f: F, grid: &Grid2D) -> f64 {
    let z2: Vec<f64> = grid.nodes(1);
    let rows: Vec<f64> = (0..grid.points()[0])
        .into_par_iter()
        .map(|i| {
            let z1 = grid.node(0, i);
            let inner: f64 = z2
                .iter()
                .enumerate()
                .map(|(j, &y)| grid.weight(1, j) * f(z1, y))
                .sum();
            grid.weight(0, i) * inner
        })
        .collect();
    rows.iter().sum()
}

/// Bisection for a root of `f` on `[lo, hi]`, stopping once the bracket is
/// no wider than `tol`.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    ensure(tol > 0.0, || format!("tolerance must be positive, got {tol}"))?;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Minimize `f` on `[lo, hi]`: uniform scan with `scan_points` samples, then
/// golden-section refinement around the best sample down to width `tol`.
/// Ties in the scan go to the lowest abscissa.
pub fn minimize_scalar<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, scan_points: usize, tol: f64) -> (f64, f64) {
    let n = scan_points.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f(lo), 0usize);
    for i in 1..n {
        let x = lo + i as f64 * h;
        let v = f(x);
        if v < best.1 {
            best = (x, v, i);
        }
    }
    let mut a = lo + best.2.saturating_sub(1) as f64 * h;
    let mut b = (lo + (best.2 + 1) as f64 * h).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (x, v) = if fc <= fd { (c, fc) } else { (d, fd) };
    if v <= best.1 {
        (x, v)
    } else {
        (best.0, best.1)
    }
}
