//! Fusion-center densities and exact Bayes errors for one or two sensors.
//!
//! Three evaluation routes live here:
//!
//! * closed forms for raw-observation (UDD) reporting,
//! * the two-sensor independent-channel route that slices on `z1` and solves
//!   the remaining one-sensor LRT at the effective prior ratio
//!   `eta* = eta f1(z1|H0) / f1(z1|H1)`,
//! * a generic bivariate route integrating `min(pi0 f0, pi1 f1)`.
//!
//! The bivariate route factors every component as `f(z1) f(z2|z1)`. Along a
//! fixed `z1` both hypotheses are 1-D Gaussian mixtures in `z2`, so the inner
//! integral is exact once the sign changes of `pi0 f0 - pi1 f1` are located;
//! the grid supplies the outer trapezoid nodes and the inner bracketing nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::{
    integrate_1d, q_function, Component1D, Component2D, Covariance2D, Grid2D, Mixture1D, Mixture2D, RowSlice,
    DEFAULT_QUAD_TOL, TAIL_SIGMAS,
};
use crate::one_sensor::{binary_fc_decision, one_sensor_pe, RegimeKind};
use crate::sensor::{sensor_rates, Prior, SensingModel, SensorRule};

/// What a sensor puts on the reporting channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SensorKind {
    /// The raw observation (UDD).
    Udd,
    /// A binary quantizer (CDD or QDD, depending on the levels).
    Quantized(SensorRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub sensing: SensingModel,
    pub kind: SensorKind,
}

impl SensorSpec {
    pub fn udd(sensing: SensingModel) -> Self {
        Self { sensing, kind: SensorKind::Udd }
    }

    pub fn quantized(sensing: SensingModel, rule: SensorRule) -> Self {
        Self { sensing, kind: SensorKind::Quantized(rule) }
    }
}

/// Bivariate Gaussian reporting noise `(W1, W2) ~ G(0, 0, rho, sigma_c1, sigma_c2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedChannel {
    pub rho: f64,
    pub sigma_c1: f64,
    pub sigma_c2: f64,
}

impl CorrelatedChannel {
    pub fn new(rho: f64, sigma_c1: f64, sigma_c2: f64) -> Result<Self> {
        Covariance2D::new(sigma_c1, sigma_c2, rho)?;
        Ok(Self { rho, sigma_c1, sigma_c2 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelModel {
    /// Independent AWGN, one standard deviation per sensor.
    Independent(Vec<f64>),
    CorrelatedBivariate(CorrelatedChannel),
}

impl ChannelModel {
    pub fn iid(sigma_c: f64, sensors: usize) -> Self {
        ChannelModel::Independent(vec![sigma_c; sensors])
    }

    pub fn arity(&self) -> usize {
        match self {
            ChannelModel::Independent(s) => s.len(),
            ChannelModel::CorrelatedBivariate(_) => 2,
        }
    }

    /// Reporting-noise standard deviation seen by sensor `k`.
    pub fn sigma(&self, k: usize) -> f64 {
        match self {
            ChannelModel::Independent(s) => s[k],
            ChannelModel::CorrelatedBivariate(c) => {
                if k == 0 {
                    c.sigma_c1
                } else {
                    c.sigma_c2
                }
            }
        }
    }
}

/// A parallel distributed-detection system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub prior: Prior,
    pub sensors: Vec<SensorSpec>,
    pub channel: ChannelModel,
}

impl SystemSpec {
    pub fn new(prior: Prior, sensors: Vec<SensorSpec>, channel: ChannelModel) -> Result<Self> {
        ensure(!sensors.is_empty(), || "system needs at least one sensor".into())?;
        ensure(channel.arity() == sensors.len(), || {
            format!("channel arity {} does not match {} sensors", channel.arity(), sensors.len())
        })?;
        match &channel {
            ChannelModel::Independent(s) => {
                for &sigma in s {
                    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma_c = {sigma}"))?;
                }
            }
            ChannelModel::CorrelatedBivariate(c) => {
                CorrelatedChannel::new(c.rho, c.sigma_c1, c.sigma_c2)?;
            }
        }
        Ok(Self { prior, sensors, channel })
    }

    pub fn all_udd(&self) -> bool {
        self.sensors.iter().all(|s| matches!(s.kind, SensorKind::Udd))
    }
}

/// Closed-form UDD error for `n` i.i.d. sensors behind independent AWGN: the
/// fusion center thresholds `sum z_k` at `t_z = sigma^2 / (2 mu) ln eta`.
pub fn udd_pe_independent(n: usize, p: &Prior, s: &SensingModel, sigma_c: f64) -> Result<f64> {
    ensure(n >= 1, || "need at least one sensor".into())?;
    ensure(sigma_c > 0.0, || format!("sigma_c must be positive, got {sigma_c}"))?;
    let var = s.sigma_s * s.sigma_s + sigma_c * sigma_c;
    let t_z = var / (2.0 * s.mu) * p.eta().ln();
    let nf = n as f64;
    let scale = nf.sqrt() * var.sqrt();
    Ok(p.pi0() * q_function((t_z + nf * s.mu) / scale) + p.pi1() * q_function((nf * s.mu - t_z) / scale))
}

/// Bayes error between two Gaussians sharing a covariance, given the
/// Mahalanobis distance `d` between their means.
pub fn gaussian_lrt_pe(d: f64, p: &Prior) -> f64 {
    if d == 0.0 {
        return p.prior_only_error();
    }
    let ln_eta = p.eta().ln();
    p.pi0() * q_function((ln_eta + 0.5 * d * d) / d) + p.pi1() * q_function((0.5 * d * d - ln_eta) / d)
}

/// Two UDD sensors behind correlated channels. The received pair is
/// `G(+-mu1, +-mu2, rho_hat, sigma_1, sigma_2)` with
/// `sigma_k^2 = sigma_sk^2 + sigma_ck^2`; the common-covariance LRT reduces to a
/// scalar Gaussian test.
pub fn udd_pe_correlated(p: &Prior, s1: &SensingModel, s2: &SensingModel, ch: &CorrelatedChannel) -> Result<f64> {
    CorrelatedChannel::new(ch.rho, ch.sigma_c1, ch.sigma_c2)?;
    let v1 = s1.sigma_s * s1.sigma_s + ch.sigma_c1 * ch.sigma_c1;
    let v2 = s2.sigma_s * s2.sigma_s + ch.sigma_c2 * ch.sigma_c2;
    let c = ch.rho * ch.sigma_c1 * ch.sigma_c2;
    let det = v1 * v2 - c * c;
    let (d1, d2) = (2.0 * s1.mu, 2.0 * s2.mu);
    let d_sq = (v2 * d1 * d1 - 2.0 * c * d1 * d2 + v1 * d2 * d2) / det;
    Ok(gaussian_lrt_pe(d_sq.sqrt(), p))
}

/// `(f(z|H0), f(z|H1))` for one sensor behind AWGN of std `sigma_c`.
pub fn sensor_fc_densities(sensor: &SensorSpec, sigma_c: f64) -> Result<(Mixture1D, Mixture1D)> {
    let s = &sensor.sensing;
    match sensor.kind {
        SensorKind::Udd => {
            let sigma = (s.sigma_s * s.sigma_s + sigma_c * sigma_c).sqrt();
            Ok((Mixture1D::gaussian(-s.mu, sigma)?, Mixture1D::gaussian(s.mu, sigma)?))
        }
        SensorKind::Quantized(rule) => {
            let r = sensor_rates(rule.t(), s);
            let two = |p1: f64| {
                Mixture1D::new(vec![
                    Component1D { weight: 1.0 - p1, mean: rule.m0(), sigma: sigma_c },
                    Component1D { weight: p1, mean: rule.m1(), sigma: sigma_c },
                ])
            };
            Ok((two(r.pf)?, two(r.pd)?))
        }
    }
}

/// Per-sensor FC densities for an independent-channel system.
pub fn fc_density_independent(spec: &SystemSpec) -> Result<Vec<(Mixture1D, Mixture1D)>> {
    let ChannelModel::Independent(sigmas) = &spec.channel else {
        return Err(Error::Unsupported("fc_density_independent needs independent channels".into()));
    };
    spec.sensors.iter().zip(sigmas).map(|(s, &sc)| sensor_fc_densities(s, sc)).collect()
}

/// Transmitted values of one sensor under each hypothesis with their probabilities.
fn transmit_alphabet(sensor: &SensorSpec) -> [Vec<(f64, f64)>; 2] {
    let s = &sensor.sensing;
    match sensor.kind {
        SensorKind::Udd => [vec![(1.0, -s.mu)], vec![(1.0, s.mu)]],
        SensorKind::Quantized(rule) => {
            let r = sensor_rates(rule.t(), s);
            [
                vec![(1.0 - r.pf, rule.m0()), (r.pf, rule.m1())],
                vec![(1.0 - r.pd, rule.m0()), (r.pd, rule.m1())],
            ]
        }
    }
}

/// Joint FC densities `(f(z1, z2|H0), f(z1, z2|H1))` for a two-sensor system
/// under either channel model. Raw-observation sensors add their sensing
/// variance to their axis.
pub fn fc_density_joint(spec: &SystemSpec) -> Result<(Mixture2D, Mixture2D)> {
    ensure(spec.sensors.len() == 2, || "joint density needs exactly two sensors".into())?;
    let (sc1, sc2, rho) = match &spec.channel {
        ChannelModel::Independent(s) => (s[0], s[1], 0.0),
        ChannelModel::CorrelatedBivariate(c) => (c.sigma_c1, c.sigma_c2, c.rho),
    };
    let axis_sigma = |sensor: &SensorSpec, sc: f64| match sensor.kind {
        SensorKind::Udd => (sensor.sensing.sigma_s.powi(2) + sc * sc).sqrt(),
        SensorKind::Quantized(_) => sc,
    };
    let sigma1 = axis_sigma(&spec.sensors[0], sc1);
    let sigma2 = axis_sigma(&spec.sensors[1], sc2);
    let cov = Covariance2D::new(sigma1, sigma2, rho * sc1 * sc2 / (sigma1 * sigma2))?;
    let a = transmit_alphabet(&spec.sensors[0]);
    let b = transmit_alphabet(&spec.sensors[1]);
    let build = |h: usize| {
        let mut comps = Vec::with_capacity(a[h].len() * b[h].len());
        for &(w1, m1) in &a[h] {
            for &(w2, m2) in &b[h] {
                comps.push(Component2D { weight: w1 * w2, mean1: m1, mean2: m2 });
            }
        }
        Mixture2D::new(comps, cov)
    };
    Ok((build(0)?, build(1)?))
}

/// Joint FC densities for a correlated-channel system.
pub fn fc_density_correlated(spec: &SystemSpec) -> Result<(Mixture2D, Mixture2D)> {
    ensure(matches!(spec.channel, ChannelModel::CorrelatedBivariate(_)), || {
        "fc_density_correlated needs a correlated channel".into()
    })?;
    fc_density_joint(spec)
}

/// Default integration grid for a two-sensor system.
pub fn default_grid(spec: &SystemSpec, points: usize) -> Result<Grid2D> {
    let (f0, f1) = fc_density_joint(spec)?;
    Grid2D::covering(&[&f0, &f1], [points, points])
}

/// Disjoint intervals covering the `center +- 8 sigma` windows, clipped to `[lo, hi]`.
fn window_spans(centers: &[f64], sigma: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut spans: Vec<(f64, f64)> = centers
        .iter()
        .map(|&c| ((c - TAIL_SIGMAS * sigma).max(lo), (c + TAIL_SIGMAS * sigma).min(hi)))
        .filter(|(a, b)| b > a)
        .collect();
    spans.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in spans {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

/// Trapezoid nodes and weights over [`window_spans`] with spacing at most `max_step`.
fn window_rule(centers: &[f64], sigma: f64, lo: f64, hi: f64, max_step: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (a, b) in window_spans(centers, sigma, lo, hi) {
        let n = ((b - a) / max_step).ceil().max(2.0) as usize;
        let h = (b - a) / n as f64;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            out.push((a + i as f64 * h, w));
        }
    }
    out
}

/// Bayes error of the optimal LRT between two 1-D densities, by adaptive
/// quadrature of `min(pi0 f0, pi1 f1)` over the component windows. Panels
/// are split at the located crossings so the integrand is smooth on each.
pub fn lrt_bayes_error_1d(f1: &Mixture1D, f0: &Mixture1D, p: &Prior, tol: f64) -> Result<f64> {
    let (pi0, pi1) = (p.pi0(), p.pi1());
    let sigma = f0.max_sigma().max(f1.max_sigma());
    let centers: Vec<f64> = f0.components().iter().chain(f1.components()).map(|c| c.mean).collect();
    let widened = sigma * (TAIL_SIGMAS + 2.0) / TAIL_SIGMAS;
    let g = |z: f64| pi0 * f0.pdf(z) - pi1 * f1.pdf(z);
    let mut panels = Vec::new();
    for (a, b) in window_spans(&centers, widened, f64::NEG_INFINITY, f64::INFINITY) {
        let mut cuts = vec![a];
        let mut last: Option<(f64, f64)> = None;
        let n = ((b - a) / (0.25 * sigma)).ceil() as usize;
        for i in 0..=n {
            let z = a + (b - a) * i as f64 / n as f64;
            let v = g(z);
            if v == 0.0 || v.is_nan() {
                continue;
            }
            if let Some((zl, vl)) = last.filter(|(_, vl)| vl.signum() != v.signum()) {
                cuts.push(refine_crossing(&g, zl, vl, z, v));
            }
            last = Some((z, v));
        }
        cuts.push(b);
        panels.extend(cuts.windows(2).map(|w| (w[0], w[1])));
    }
    let share = tol / panels.len() as f64;
    let mut sum = 0.0;
    for (a, b) in panels {
        sum += integrate_1d(|z| (pi0 * f0.pdf(z)).min(pi1 * f1.pdf(z)), a, b, share)?;
    }
    Ok(sum)
}

/// Exact integral over the real line of `min(a(z), b(z))` for two weighted
/// Gaussian mixtures sharing a width, with the number of crossings found.
/// Crossings are bracketed on nodes spaced at most `max_step` over the
/// components' windows.
fn row_min_integral(a: &RowSlice, b: &RowSlice, max_step: f64) -> (f64, usize) {
    let total_a: f64 = a.weights.iter().sum();
    let total_b: f64 = b.weights.iter().sum();
    if total_a == 0.0 || total_b == 0.0 {
        return (0.0, 0);
    }
    let s = a.sigma;
    let centers: Vec<f64> = a
        .means
        .iter()
        .zip(&a.weights)
        .chain(b.means.iter().zip(&b.weights))
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, _)| *m)
        .collect();
    let nodes = window_rule(&centers, s, f64::NEG_INFINITY, f64::INFINITY, max_step.min(0.25 * s));
    let g = |z: f64| a.eval(z) - b.eval(z);
    // Boundaries and the sign of g on each segment between them.
    let mut cuts: Vec<f64> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for &(z, _) in &nodes {
        let v = g(z);
        if v == 0.0 || v.is_nan() {
            continue;
        }
        match last {
            None => signs.push(v.signum()),
            Some((zl, vl)) if vl.signum() != v.signum() => {
                cuts.push(refine_crossing(&g, zl, vl, z, v));
                signs.push(v.signum());
            }
            _ => {}
        }
        last = Some((z, v));
    }
    if signs.is_empty() {
        return (total_a.min(total_b), 0);
    }
    let mut lo = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (i, &sign) in signs.iter().enumerate() {
        let hi = cuts.get(i).copied().unwrap_or(f64::INFINITY);
        // g > 0 means a > b, so the minimum is b there.
        sum += if sign > 0.0 { b.mass(lo, hi) } else { a.mass(lo, hi) };
        lo = hi;
    }
    (sum, cuts.len())
}

/// Illinois false position on a sign-changing bracket.
fn refine_crossing<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut f_lo: f64, mut hi: f64, mut f_hi: f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..100 {
        let z = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let z = if z > lo && z < hi { z } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-13 * (1.0 + z.abs()) {
            return z;
        }
        let v = g(z);
        if v == 0.0 {
            return z;
        }
        if v.signum() == f_lo.signum() {
            lo = z;
            f_lo = v;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = z;
            f_hi = v;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

fn check_coverage(grid: &Grid2D, mixtures: &[&Mixture2D]) -> Result<()> {
    for m in mixtures {
        for c in m.components() {
            if !grid.contains(c.mean1, c.mean2) {
                return Err(Error::Grid(format!(
                    "component mean ({}, {}) lies outside the integration grid",
                    c.mean1, c.mean2
                )));
            }
        }
    }
    Ok(())
}

fn outer_spans(f0: &Mixture2D, f1: &Mixture2D, grid: &Grid2D) -> Vec<(f64, f64)> {
    let centers: Vec<f64> = f0.components().iter().chain(f1.components()).map(|c| c.mean1).collect();
    window_spans(&centers, f0.covariance().sigma1, grid.lo()[0], grid.hi()[0])
}

/// Bayes error of the optimal LRT between two bivariate mixtures:
/// `int min(pi0 f0, pi1 f1)`, exact between crossings along the second axis.
///
/// Along the first axis the row integral is smooth except where the number
/// of crossings changes. Those points are located on nodes a quarter of
/// `sigma1` apart within `8 sigma` of some component, and the smooth panels
/// between them are integrated adaptively. The grid sets the box and the
/// node spacing along the second axis.
pub fn lrt_bayes_error_2d(f1: &Mixture2D, f0: &Mixture2D, p: &Prior, grid: &Grid2D) -> Result<f64> {
    check_coverage(grid, &[f0, f1])?;
    ensure(f0.covariance() == f1.covariance(), || "hypotheses must share a covariance".into())?;
    let (pi0, pi1) = (p.pi0(), p.pi1());
    let inner_step = grid.step(1);
    let row = |z1: f64| Ok(row_min_integral(&f0.row(z1).scaled(pi0), &f1.row(z1).scaled(pi1), inner_step));
    let max_step = 0.25 * f0.covariance().sigma1;
    integrate_piecewise(&row, &outer_spans(f0, f1, grid), max_step, OUTER_TOL)
}

/// Same quantity as [`lrt_bayes_error_2d`], sliced along the second axis and
/// integrated adaptively to absolute tolerance `tol`.
pub fn lrt_bayes_error_2d_adaptive(f1: &Mixture2D, f0: &Mixture2D, p: &Prior, grid: &Grid2D, tol: f64) -> Result<f64> {
    check_coverage(grid, &[f0, f1])?;
    ensure(f0.covariance() == f1.covariance(), || "hypotheses must share a covariance".into())?;
    let (t0, t1) = (f0.transposed(), f1.transposed());
    let (pi0, pi1) = (p.pi0(), p.pi1());
    let sigma = t0.covariance().sigma1;
    let centers: Vec<f64> = t0.components().iter().chain(t1.components()).map(|c| c.mean1).collect();
    let spans = window_spans(&centers, sigma, grid.lo()[1], grid.hi()[1]);
    let share = tol / spans.len() as f64;
    let inner_step = grid.step(0);
    let mut sum = 0.0;
    for (a, b) in spans {
        sum += integrate_1d(
            |z2| row_min_integral(&t0.row(z2).scaled(pi0), &t1.row(z2).scaled(pi1), inner_step).0,
            a,
            b,
            share,
        )?;
    }
    Ok(sum)
}

/// Error mass `int min(a f(z|H0), b f(z|H1)) dz` for one sensor given
/// weights `a` and `b` on the two hypotheses, with the fusion regime used
/// (`None` for UDD, whose rule is always a threshold).
fn weighted_single_error(sensor: &SensorSpec, sigma_c: f64, a: f64, b: f64) -> Result<(f64, Option<RegimeKind>)> {
    if a <= 0.0 || b <= 0.0 {
        return Ok((0.0, None));
    }
    let eta = a / b;
    let s = &sensor.sensing;
    match sensor.kind {
        SensorKind::Udd => {
            let sigma = (s.sigma_s * s.sigma_s + sigma_c * sigma_c).sqrt();
            let t = sigma * sigma / (2.0 * s.mu) * eta.ln();
            Ok((a * q_function((t + s.mu) / sigma) + b * q_function((s.mu - t) / sigma), None))
        }
        SensorKind::Quantized(rule) => {
            let out = binary_fc_decision(&sensor_rates(rule.t(), s), rule.m0(), rule.m1(), eta, sigma_c)?;
            Ok((a * out.p_f_sys + b * out.p_miss_sys, Some(out.regime.kind)))
        }
    }
}

/// Two sensors behind independent channels: at each `z1` the fusion rule
/// reduces to a one-sensor LRT on `z2` at `eta*`, evaluated in closed form.
/// The outer integrand is smooth except where that LRT changes regime, so
/// the outer integral runs piecewise between regime changes.
pub fn two_sensor_pe_independent(spec: &SystemSpec, grid: &Grid2D) -> Result<f64> {
    let sigmas = match &spec.channel {
        ChannelModel::Independent(s) => s.clone(),
        ChannelModel::CorrelatedBivariate(c) if c.rho == 0.0 => vec![c.sigma_c1, c.sigma_c2],
        ChannelModel::CorrelatedBivariate(_) => {
            return Err(Error::Unsupported("two_sensor_pe_independent needs independent channels".into()))
        }
    };
    ensure(spec.sensors.len() == 2, || "two_sensor_pe_independent needs two sensors".into())?;
    let (g0, g1) = sensor_fc_densities(&spec.sensors[0], sigmas[0])?;
    let centers: Vec<f64> = g0.components().iter().chain(g1.components()).map(|c| c.mean).collect();
    if centers.iter().any(|&c| c < grid.lo()[0] || c > grid.hi()[0]) {
        return Err(Error::Grid("outer axis does not cover sensor 1's component means".into()));
    }
    let (pi0, pi1) = (spec.prior.pi0(), spec.prior.pi1());
    let (second, sigma2) = (spec.sensors[1], sigmas[1]);
    let row = |z1: f64| weighted_single_error(&second, sigma2, pi0 * g0.pdf(z1), pi1 * g1.pdf(z1));
    let sigma1 = g0.max_sigma();
    let spans = window_spans(&centers, sigma1, grid.lo()[0], grid.hi()[0]);
    integrate_piecewise(&row, &spans, 0.25 * sigma1, OUTER_TOL)
}

/// Integral of `row(z).0` over `spans`, where the key `row(z).1` marks the
/// pieces on which the value is smooth. Keys are scanned on nodes at most
/// `max_step` apart, each change is located by bisection, and the panels
/// between changes are integrated adaptively.
fn integrate_piecewise<K, R>(row: &R, spans: &[(f64, f64)], max_step: f64, tol: f64) -> Result<f64>
where
    K: PartialEq + Copy + Send,
    R: Fn(f64) -> Result<(f64, K)> + Sync,
{
    let key = |z: f64| row(z).map(|r| r.1);
    let mut panels = Vec::new();
    for &(a, b) in spans {
        let n = ((b - a) / max_step).ceil().max(2.0) as usize;
        let nodes: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let keys = nodes.par_iter().map(|&z| key(z)).collect::<Result<Vec<_>>>()?;
        let mut cuts = vec![a];
        for i in 1..nodes.len() {
            let (mut lo, mut k) = (nodes[i - 1], keys[i - 1]);
            // Several changes may fall between two nodes.
            for _ in 0..MAX_EDGES_PER_STEP {
                if k == keys[i] {
                    break;
                }
                let edge = key_edge(&key, lo, nodes[i], k)?;
                cuts.push(edge.0);
                (lo, k) = (edge.1, key(edge.1)?);
            }
        }
        cuts.push(b);
        panels.extend(cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])));
    }
    let share = tol / panels.len().max(1) as f64;
    let parts = panels
        .par_iter()
        .map(|&(a, b)| integrate_1d(|z| row(z).map(|r| r.0).unwrap_or(f64::NAN), a, b, share))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().sum())
}

/// Absolute tolerance of the adaptive outer integrals. The Kronrod error
/// estimate is conservative; the realized error is near 1e-13.
const OUTER_TOL: f64 = DEFAULT_QUAD_TOL;
const MAX_EDGES_PER_STEP: usize = 4;

/// Bisect for the end of the region where `key == k`, starting inside it at
/// `lo`, with `key(hi) != k`. Returns the edge and the first point past it.
fn key_edge<K, F>(key: &F, mut lo: f64, mut hi: f64, k: K) -> Result<(f64, f64)>
where
    K: PartialEq,
    F: Fn(f64) -> Result<K>,
{
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if key(mid)? == k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), hi))
}

/// Exact (analytic or semi-analytic) Bayes error of a system with one or two
/// sensors. `grid_points` sets the per-axis resolution for two-sensor routes.
pub fn evaluate(spec: &SystemSpec, grid_points: usize) -> Result<f64> {
    match spec.sensors.len() {
        1 => {
            let sigma_c = spec.channel.sigma(0);
            let sensor = &spec.sensors[0];
            match sensor.kind {
                SensorKind::Udd => udd_pe_independent(1, &spec.prior, &sensor.sensing, sigma_c),
                SensorKind::Quantized(rule) => Ok(one_sensor_pe(&rule, &spec.prior, &sensor.sensing, sigma_c)?.pe),
            }
        }
        2 => match &spec.channel {
            ChannelModel::Independent(_) => two_sensor_pe_independent(spec, &default_grid(spec, grid_points)?),
            // Uncorrelated bivariate noise is independent noise.
            ChannelModel::CorrelatedBivariate(ch) if ch.rho == 0.0 && !spec.all_udd() => {
                two_sensor_pe_independent(spec, &default_grid(spec, grid_points)?)
            }
            ChannelModel::CorrelatedBivariate(ch) => {
                if spec.all_udd() {
                    udd_pe_correlated(&spec.prior, &spec.sensors[0].sensing, &spec.sensors[1].sensing, ch)
                } else {
                    let (f0, f1) = fc_density_joint(spec)?;
                    let grid = Grid2D::covering(&[&f0, &f1], [grid_points, grid_points])?;
                    lrt_bayes_error_2d(&f1, &f0, &spec.prior, &grid)
                }
            }
        },
        n => Err(Error::Unsupported(format!(
            "exact evaluation covers one or two sensors, got {n}; use the Monte Carlo estimator"
        ))),
    }
}

/// Bayes error by direct numerical integration of `min(pi0 f0, pi1 f1)`,
/// independent of the closed forms and the `eta*` route used by [`evaluate`]:
/// adaptive quadrature for one sensor, the bivariate grid route for two.
/// Correlated quantized systems, which [`evaluate`] already sends through the
/// grid route, are sliced along the other axis and integrated adaptively.
pub fn evaluate_numeric(spec: &SystemSpec, grid_points: usize, tol: f64) -> Result<f64> {
    match spec.sensors.len() {
        1 => {
            let (f0, f1) = sensor_fc_densities(&spec.sensors[0], spec.channel.sigma(0))?;
            lrt_bayes_error_1d(&f1, &f0, &spec.prior, tol)
        }
        2 => {
            let (f0, f1) = fc_density_joint(spec)?;
            let grid = Grid2D::covering(&[&f0, &f1], [grid_points, grid_points])?;
            let correlated = matches!(spec.channel, ChannelModel::CorrelatedBivariate(c) if c.rho != 0.0);
            if correlated && !spec.all_udd() {
                lrt_bayes_error_2d_adaptive(&f1, &f0, &spec.prior, &grid, tol)
            } else {
                lrt_bayes_error_2d(&f1, &f0, &spec.prior, &grid)
            }
        }
        n => Err(Error::Unsupported(format!("numeric evaluation covers one or two sensors, got {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::udd_energy;

    fn sensing(sigma_s: f64) -> SensingModel {
        SensingModel::new(1.0, sigma_s).unwrap()
    }

    #[test]
    fn udd_independent_examples() {
        let s = SensingModel::new(1.0, 2f64.sqrt()).unwrap();
        let pe = udd_pe_independent(1, &Prior::equal(), &s, 2f64.sqrt()).unwrap();
        assert!((pe - q_function(0.5)).abs() < 1e-15);
        assert!((pe - 0.308_538).abs() < 1e-6);
        let s = sensing(0.8);
        let pe2 = udd_pe_independent(2, &Prior::equal(), &s, 0.6).unwrap();
        assert!((pe2 - q_function(2f64.sqrt() / 1.0)).abs() < 1e-15);
        let pe_many = udd_pe_independent(400, &Prior::new(0.3).unwrap(), &s, 0.6).unwrap();
        assert!(pe_many < 1e-40);
    }

    #[test]
    fn udd_correlated_examples() {
        let s = sensing(1.1);
        let p = Prior::new(0.6).unwrap();
        let ch = CorrelatedChannel::new(0.0, 0.7, 0.7).unwrap();
        let a = udd_pe_correlated(&p, &s, &s, &ch).unwrap();
        let b = udd_pe_independent(2, &p, &s, 0.7).unwrap();
        assert!((a - b).abs() < 1e-14);

        // rho -> 1 with sigma_s small relative to sigma_c approaches one sensor.
        let s = sensing(0.05);
        let ch = CorrelatedChannel::new(0.999_999, 1.5, 1.5).unwrap();
        let a = udd_pe_correlated(&p, &s, &s, &ch).unwrap();
        let one = udd_pe_independent(1, &p, &s, 1.5).unwrap();
        assert!((a - one).abs() < 2e-3, "{a} vs {one}");
    }

    #[test]
    fn udd_correlated_numeric_matches_closed_form() {
        let s1 = sensing(1.2);
        let s2 = sensing(0.7);
        for (rho, pi1) in [(0.5, 0.5), (-0.4, 0.3), (0.9, 0.75)] {
            let p = Prior::new(pi1).unwrap();
            let ch = CorrelatedChannel::new(rho, 0.9, 1.4).unwrap();
            let spec = SystemSpec::new(
                p,
                vec![SensorSpec::udd(s1), SensorSpec::udd(s2)],
                ChannelModel::CorrelatedBivariate(ch),
            )
            .unwrap();
            let closed = udd_pe_correlated(&p, &s1, &s2, &ch).unwrap();
            let numeric = evaluate_numeric(&spec, 401, 1e-10).unwrap();
            assert!((closed - numeric).abs() < 1e-6, "rho {rho}: {closed} vs {numeric}");
        }
    }

    #[test]
    fn fc_density_construction() {
        let s = sensing(1.0);
        // t = +inf makes pf = 0: H0 collapses onto m0.
        let spec = SensorSpec::quantized(s, SensorRule::new(f64::INFINITY, -1.0, 1.0).unwrap());
        let (h0, _) = sensor_fc_densities(&spec, 0.5).unwrap();
        assert_eq!(h0.components()[1].weight, 0.0);
        assert!((h0.pdf(-1.0) - crate::numerics::normal_pdf(-1.0, -1.0, 0.5)).abs() < 1e-15);

        let e = udd_energy(&s).sqrt();
        let spec = SensorSpec::quantized(s, SensorRule::new(0.0, -e, e).unwrap());
        let (h0, h1) = sensor_fc_densities(&spec, 0.8).unwrap();
        for z in [0.1, 0.9, 2.5] {
            assert!((h0.pdf(z) - h1.pdf(-z)).abs() < 1e-15);
        }
    }

    #[test]
    fn correlated_weights_are_products() {
        // t chosen so pd = 0.8 and pf = 0.2 under sigma_s = 1, mu = 1 is not
        // exact; build rates from the rule and compare against products.
        let s = sensing(1.0);
        let rule = SensorRule::new(0.2, -1.0, 1.3).unwrap();
        let r = sensor_rates(0.2, &s);
        let spec = SystemSpec::new(
            Prior::equal(),
            vec![SensorSpec::quantized(s, rule), SensorSpec::quantized(s, rule)],
            ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(0.3, 1.0, 1.0).unwrap()),
        )
        .unwrap();
        let (_, h1) = fc_density_correlated(&spec).unwrap();
        let w: Vec<f64> = h1.components().iter().map(|c| c.weight).collect();
        let expect = [(1.0 - r.pd).powi(2), (1.0 - r.pd) * r.pd, r.pd * (1.0 - r.pd), r.pd * r.pd];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn lrt_2d_examples() {
        let cov = Covariance2D::new(1.0, 1.3, 0.4).unwrap();
        let same = Mixture2D::new(
            vec![
                Component2D { weight: 0.3, mean1: -1.0, mean2: 0.0 },
                Component2D { weight: 0.7, mean1: 1.0, mean2: 0.5 },
            ],
            cov,
        )
        .unwrap();
        let p = Prior::new(0.35).unwrap();
        let grid = Grid2D::covering(&[&same], [201, 201]).unwrap();
        let pe = lrt_bayes_error_2d(&same, &same, &p, &grid).unwrap();
        assert!((pe - 0.35).abs() < 1e-9);

        let far1 = Mixture2D::new(vec![Component2D { weight: 1.0, mean1: 20.0, mean2: 20.0 }], cov).unwrap();
        let far0 = Mixture2D::new(vec![Component2D { weight: 1.0, mean1: -20.0, mean2: -20.0 }], cov).unwrap();
        let grid = Grid2D::covering(&[&far0, &far1], [201, 201]).unwrap();
        assert!(lrt_bayes_error_2d(&far1, &far0, &Prior::equal(), &grid).unwrap() < 1e-6);

        let small = Grid2D::new([-1.0, -1.0], [1.0, 1.0], [11, 11]).unwrap();
        assert!(matches!(lrt_bayes_error_2d(&far1, &far0, &Prior::equal(), &small), Err(Error::Grid(_))));
    }

    #[test]
    fn adaptive_and_grid_routes_agree() {
        let s = sensing(1.5);
        let spec = SystemSpec::new(
            Prior::new(0.5).unwrap(),
            vec![
                SensorSpec::quantized(s, SensorRule::new(0.3, -2.1, 1.4).unwrap()),
                SensorSpec::quantized(s, SensorRule::new(-0.5, 0.8, -1.9).unwrap()),
            ],
            ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(0.9, 1.2, 1.2).unwrap()),
        )
        .unwrap();
        let (f0, f1) = fc_density_joint(&spec).unwrap();
        let grid = Grid2D::covering(&[&f0, &f1], [801, 801]).unwrap();
        let a = lrt_bayes_error_2d(&f1, &f0, &spec.prior, &grid).unwrap();
        let b = lrt_bayes_error_2d_adaptive(&f1, &f0, &spec.prior, &grid, 1e-10).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn two_sensor_route_matches_grid_route() {
        let s = sensing(1.2);
        let spec = SystemSpec::new(
            Prior::new(0.75).unwrap(),
            vec![
                SensorSpec::quantized(s, SensorRule::new(-0.4, -1.0, 2.0).unwrap()),
                SensorSpec::quantized(s, SensorRule::new(0.2, 1.5, -1.1).unwrap()),
            ],
            ChannelModel::Independent(vec![0.9, 1.6]),
        )
        .unwrap();
        let grid = default_grid(&spec, 801).unwrap();
        let a = two_sensor_pe_independent(&spec, &grid).unwrap();
        let b = evaluate_numeric(&spec, 801, 1e-10).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn uninformative_second_sensor_reduces_to_one() {
        let s = sensing(1.2);
        let p = Prior::new(0.7).unwrap();
        let rule = SensorRule::new(0.1, -1.2, 1.9).unwrap();
        let spec = SystemSpec::new(
            p,
            vec![
                SensorSpec::quantized(s, rule),
                SensorSpec::quantized(s, SensorRule::new(f64::INFINITY, -1.0, 1.0).unwrap()),
            ],
            ChannelModel::Independent(vec![1.1, 0.7]),
        )
        .unwrap();
        let two = evaluate(&spec, 801).unwrap();
        let one = one_sensor_pe(&rule, &p, &s, 1.1).unwrap().pe;
        assert!((two - one).abs() < 1e-9, "{two} vs {one}");
    }

    #[test]
    fn spec_validation() {
        let s = sensing(1.0);
        assert!(SystemSpec::new(Prior::equal(), vec![SensorSpec::udd(s)], ChannelModel::Independent(vec![1.0, 1.0])).is_err());
        assert!(SystemSpec::new(Prior::equal(), vec![], ChannelModel::Independent(vec![])).is_err());
        assert!(CorrelatedChannel::new(1.0, 1.0, 1.0).is_err());
        let three = SystemSpec::new(Prior::equal(), vec![SensorSpec::udd(s); 3], ChannelModel::iid(1.0, 3)).unwrap();
        assert!(matches!(evaluate(&three, 101), Err(Error::Unsupported(_))));
    }
}
