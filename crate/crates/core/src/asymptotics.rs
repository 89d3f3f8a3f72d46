//! Chernoff information and UDD/QDD equal-performance boundaries.
//!
//! Boundaries live on the `(sigma_s, sigma_c)` plane with equal priors. For a
//! single sensor the comparison uses the exact Bayes errors; for many i.i.d.
//! sensors it uses the Chernoff information of the per-sensor FC densities,
//! evaluated at `lambda = 1/2` for the symmetric QDD mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::multi_sensor::udd_pe_independent;
use crate::numerics::{bisect_root, integrate_1d, Component1D, Mixture1D, TAIL_SIGMAS};
use crate::one_sensor::equal_prior_closed_pe;
use crate::sensor::{sensor_rates, udd_energy, Prior, SensingModel};

/// Chernoff information between `N(mu, sigma^2)` and `N(-mu, sigma^2)`, in nats.
pub fn chernoff_gaussian(mu: f64, sigma: f64) -> Result<f64> {
    ensure(sigma > 0.0, || format!("sigma must be positive, got {sigma}"))?;
    Ok(mu * mu / (2.0 * sigma * sigma))
}

/// `-ln int sqrt(f1 f0)`, the Chernoff exponent at `lambda = 1/2`, in nats.
///
/// `sqrt(f1 f0)` peaks between component pairs, so windows cover the pair
/// midpoints as well as the means, and the tolerance is relative to the
/// pairwise bound `sum sqrt(w_i w_j) exp(-(m_i - m_j)^2 / (8 sigma^2))`.
pub fn chernoff_mixture_half(f1: &Mixture1D, f0: &Mixture1D) -> Result<f64> {
    let sigma = f0.max_sigma().max(f1.max_sigma());
    let mut centers: Vec<f64> = f0.components().iter().chain(f1.components()).map(|c| c.mean).collect();
    let mut scale = 0.0;
    for a in f1.components() {
        for b in f0.components() {
            centers.push(0.5 * (a.mean + b.mean));
            let d = a.mean - b.mean;
            scale += (a.weight * b.weight).sqrt() * (-d * d / (8.0 * sigma * sigma)).exp();
        }
    }
    centers.sort_by(f64::total_cmp);
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for c in centers {
        let (a, b) = (c - TAIL_SIGMAS * sigma, c + TAIL_SIGMAS * sigma);
        match spans.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => spans.push((a, b)),
        }
    }
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let mut bc = 0.0;
    for (a, b) in spans {
        bc += integrate_1d(|z| (f1.pdf(z) * f0.pdf(z)).sqrt(), a, b, tol)?;
    }
    Ok((-bc.min(1.0).ln()).max(0.0))
}

/// FC densities `(f(z|H0), f(z|H1))` of the equal-prior QDD optimum
/// `t = 0, m0 = -m1 = -sqrt(E_u)`.
pub fn qdd_symmetric_densities(s: &SensingModel, sigma_c: f64) -> Result<(Mixture1D, Mixture1D)> {
    let r = sensor_rates(0.0, s);
    let e = udd_energy(s).sqrt();
    let mix = |p1: f64| {
        Mixture1D::new(vec![
            Component1D { weight: 1.0 - p1, mean: -e, sigma: sigma_c },
            Component1D { weight: p1, mean: e, sigma: sigma_c },
        ])
    };
    Ok((mix(r.pf)?, mix(r.pd)?))
}

/// Chernoff information of QDD at its equal-prior optimum.
pub fn chernoff_qdd(s: &SensingModel, sigma_c: f64) -> Result<f64> {
    let (f0, f1) = qdd_symmetric_densities(s, sigma_c)?;
    chernoff_mixture_half(&f1, &f0)
}

/// Chernoff information of UDD.
pub fn chernoff_udd(s: &SensingModel, sigma_c: f64) -> Result<f64> {
    chernoff_gaussian(s.mu, (s.sigma_s * s.sigma_s + sigma_c * sigma_c).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryRegime {
    OneSensor,
    Asymptotic,
}

impl BoundaryRegime {
    pub fn label(self) -> &'static str {
        match self {
            BoundaryRegime::OneSensor => "one_sensor",
            BoundaryRegime::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    UddVsQdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingStatus {
    Crossing,
    NoCrossing,
    /// The two systems are indistinguishable over the whole bracket.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub sigma_s: f64,
    pub sigma_c_star: Option<f64>,
    pub status: CrossingStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub regime: BoundaryRegime,
    pub comparator: Comparator,
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryCurve {
    /// Crossing points only.
    pub fn crossings(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().filter_map(|p| p.sigma_c_star.map(|c| (p.sigma_s, c)))
    }
}

/// Default scan resolution along `sigma_c` before bisection.
pub const BOUNDARY_SCAN_POINTS: usize = 240;
/// Bisection tolerance on `sigma_c*`.
pub const BOUNDARY_TOL: f64 = 1e-4;
const DEGENERATE_LEVEL: f64 = 1e-14;

/// QDD's disadvantage against UDD at `(sigma_s, sigma_c)`: positive where UDD
/// is better. One sensor compares Bayes errors, the asymptotic regime
/// compares Chernoff information.
pub fn comparator_difference(regime: BoundaryRegime, mu: f64, sigma_s: f64, sigma_c: f64) -> Result<f64> {
    let s = SensingModel::new(mu, sigma_s)?;
    match regime {
        BoundaryRegime::OneSensor => {
            Ok(equal_prior_closed_pe(&s, sigma_c) - udd_pe_independent(1, &Prior::equal(), &s, sigma_c)?)
        }
        BoundaryRegime::Asymptotic => Ok(chernoff_udd(&s, sigma_c)? - chernoff_qdd(&s, sigma_c)?),
    }
}

/// Geometric scan of the bracket, denser at small `sigma_c`.
pub fn scan_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..points).map(|i| lo * (r * i as f64 / (points - 1) as f64).exp()).collect()
}

/// First sign change of the comparator in `bracket` for one `sigma_s`.
pub fn boundary_point(regime: BoundaryRegime, mu: f64, sigma_s: f64, bracket: (f64, f64)) -> Result<BoundaryPoint> {
    let f = |sc: f64| comparator_difference(regime, mu, sigma_s, sc);
    let grid = scan_grid(bracket.0, bracket.1, BOUNDARY_SCAN_POINTS);
    let values: Vec<f64> = grid.iter().map(|&sc| f(sc)).collect::<Result<_>>()?;
    if values.iter().all(|v| v.abs() < DEGENERATE_LEVEL) {
        return Ok(BoundaryPoint { sigma_s, sigma_c_star: None, status: CrossingStatus::Degenerate });
    }
    let mut prev: Option<(f64, f64)> = None;
    for (&sc, &v) in grid.iter().zip(&values) {
        if v == 0.0 {
            continue;
        }
        if let Some((sp, vp)) = prev {
            if vp.signum() != v.signum() {
                let root = bisect_root(|x| f(x).unwrap_or(f64::NAN), sp, sc, BOUNDARY_TOL * 0.5)?;
                return Ok(BoundaryPoint { sigma_s, sigma_c_star: Some(root), status: CrossingStatus::Crossing });
            }
        }
        prev = Some((sc, v));
    }
    Ok(BoundaryPoint { sigma_s, sigma_c_star: None, status: CrossingStatus::NoCrossing })
}

/// Equal-performance curve of UDD and QDD over `sigma_s_grid` with equal priors.
pub fn boundary_curve(
    regime: BoundaryRegime,
    p: &Prior,
    mu: f64,
    sigma_s_grid: &[f64],
    bracket: (f64, f64),
) -> Result<BoundaryCurve> {
    if (p.pi1() - 0.5).abs() > 1e-12 {
        return Err(Error::Unsupported("boundary curves are defined for equal priors".into()));
    }
    ensure(bracket.0 > 0.0 && bracket.1 > bracket.0, || format!("bad bracket {bracket:?}"))?;
    ensure(sigma_s_grid.windows(2).all(|w| w[0] < w[1]), || "sigma_s grid must be increasing".into())?;
    let points = sigma_s_grid
        .par_iter()
        .map(|&ss| boundary_point(regime, mu, ss, bracket))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryCurve { regime, comparator: Comparator::UddVsQdd, points })
}

/// The default `sigma_s` grid: 0.05 to 3 in steps of 0.05.
pub fn default_sigma_s_grid() -> Vec<f64> {
    (1..=60).map(|i| i as f64 * 0.05).collect()
}

pub const DEFAULT_BRACKET: (f64, f64) = (0.05, 6.0);
