//! Local sensor model: priors, Gaussian sensing, single-threshold sensor
//! rules, and the transmit power budget shared by UDD and QDD.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::q_function;

/// Hypothesis priors `(pi0, pi1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pi0: f64,
    pi1: f64,
}

impl Prior {
    /// Build from `pi1 = P(H1)`.
    pub fn new(pi1: f64) -> Result<Self> {
        ensure(pi1 > 0.0 && pi1 < 1.0, || format!("pi1 must lie in (0, 1), got {pi1}"))?;
        Ok(Self { pi0: 1.0 - pi1, pi1 })
    }

    pub fn equal() -> Self {
        Self { pi0: 0.5, pi1: 0.5 }
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    /// `eta = pi0 / pi1`, the Bayes LRT threshold.
    pub fn eta(&self) -> f64 {
        self.pi0 / self.pi1
    }

    /// Error of the decision that ignores every observation.
    pub fn prior_only_error(&self) -> f64 {
        self.pi0.min(self.pi1)
    }
}

/// Observation model `X = +-mu + N(0, sigma_s^2)` under `H1` / `H0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingModel {
    pub mu: f64,
    pub sigma_s: f64,
}

impl SensingModel {
    pub fn new(mu: f64, sigma_s: f64) -> Result<Self> {
        ensure(mu > 0.0 && mu.is_finite(), || format!("mu must be positive, got {mu}"))?;
        ensure(sigma_s > 0.0 && sigma_s.is_finite(), || {
            format!("sigma_s must be positive, got {sigma_s}")
        })?;
        Ok(Self { mu, sigma_s })
    }

    /// Log of `p(x|H1) / p(x|H0)`; increasing in `x`, so `{x >= t}` is an LRQ region.
    pub fn log_likelihood_ratio(&self, x: f64) -> f64 {
        2.0 * self.mu * x / (self.sigma_s * self.sigma_s)
    }
}

/// Binary LRQ rule: report `m1` when `x >= t`, otherwise `m0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRule {
    t: f64,
    m0: f64,
    m1: f64,
}

impl SensorRule {
    pub fn new(t: f64, m0: f64, m1: f64) -> Result<Self> {
        ensure(!t.is_nan(), || "threshold is NaN".into())?;
        ensure(m0.is_finite() && m1.is_finite(), || "transmit levels must be finite".into())?;
        if m0 == m1 {
            return Err(Error::DegenerateRule(format!("m0 = m1 = {m0} carries no information")));
        }
        Ok(Self { t, m0, m1 })
    }

    /// Antipodal levels `+-sqrt(E_u)` with threshold `t`: the CDD/BPSK rule.
    pub fn antipodal(t: f64, energy: f64) -> Result<Self> {
        let a = energy.sqrt();
        Self::new(t, -a, a)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }
}

/// Sensor-level false-alarm and detection probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    /// `P(m1 | H0)`
    pub pf: f64,
    /// `P(m1 | H1)`
    pub pd: f64,
}

impl RatePair {
    pub fn new(pf: f64, pd: f64) -> Result<Self> {
        ensure((0.0..=1.0).contains(&pf), || format!("pf = {pf} is not a probability"))?;
        ensure((0.0..=1.0).contains(&pd), || format!("pd = {pd} is not a probability"))?;
        Ok(Self { pf, pd })
    }
}

/// Which root of the power equation to take for `m1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootSign {
    Positive,
    Negative,
}

impl RootSign {
    pub fn value(self) -> f64 {
        match self {
            RootSign::Positive => 1.0,
            RootSign::Negative => -1.0,
        }
    }
}

pub fn sensor_rates(t: f64, s: &SensingModel) -> RatePair {
    RatePair {
        pf: q_function((t + s.mu) / s.sigma_s),
        pd: q_function((t - s.mu) / s.sigma_s),
    }
}

/// `(p_m0, p_m1)` where `p_m1 = pi0 pf + pi1 pd`.
pub fn transmit_probs(r: &RatePair, p: &Prior) -> (f64, f64) {
    let p_m1 = p.pi0() * r.pf + p.pi1() * r.pd;
    let p_m0 = p.pi0() * (1.0 - r.pf) + p.pi1() * (1.0 - r.pd);
    (p_m0, p_m1)
}

/// Average symbol energy of raw-observation reporting, `E[X^2] = mu^2 + sigma_s^2`.
pub fn udd_energy(s: &SensingModel) -> f64 {
    s.mu * s.mu + s.sigma_s * s.sigma_s
}

/// Average symbol energy of a two-level rule, `p_m0 m0^2 + p_m1 m1^2`.
pub fn qdd_energy(rule: &SensorRule, r: &RatePair, p: &Prior) -> f64 {
    let (p_m0, p_m1) = transmit_probs(r, p);
    p_m0 * rule.m0 * rule.m0 + p_m1 * rule.m1 * rule.m1
}

/// Largest `|m0|` that still leaves a non-negative energy share for `m1`.
pub fn m0_limit(t: f64, s: &SensingModel, p: &Prior) -> f64 {
    let (p_m0, _) = transmit_probs(&sensor_rates(t, s), p);
    if p_m0 <= 0.0 {
        f64::INFINITY
    } else {
        (udd_energy(s) / p_m0).sqrt()
    }
}

/// Solve the power equality `p_m0 m0^2 + p_m1 m1^2 = E_u` for `m1`.
pub fn solve_m1_under_power(
    m0: f64,
    t: f64,
    s: &SensingModel,
    p: &Prior,
    sign: RootSign,
) -> Result<f64> {
    let (p_m0, p_m1) = transmit_probs(&sensor_rates(t, s), p);
    if p_m1 <= 0.0 {
        return Err(Error::DegenerateRule(format!("threshold t = {t} never transmits m1")));
    }
    let energy = udd_energy(s);
    let mut residual = energy - p_m0 * m0 * m0;
    if residual < 0.0 {
        // Allow round-off at the box boundary.
        if residual < -1e-12 * energy {
            return Err(Error::InfeasibleLevel { m0, limit: (energy / p_m0).sqrt() });
        }
        residual = 0.0;
    }
    Ok(sign.value() * (residual / p_m1).sqrt())
}
