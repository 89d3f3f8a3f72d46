//! Exact one-sensor analytics.
//!
//! With a binary LRQ at the sensor, the fusion center receives a two-component
//! mixture and its LRT collapses to one of three regimes: always decide `H0`,
//! always decide `H1`, or compare the channel likelihood ratio
//! `f_W(z - m1) / f_W(z - m0)` against
//!
//! ```text
//! lambda_eta = 1 + (eta - 1) / (pd - eta * pf)
//! ```
//!
//! For Gaussian reporting noise that comparison is a threshold `t_z` on `z`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numerics::{minimize_scalar, q_function};
use crate::sensor::{sensor_rates, udd_energy, Prior, RatePair, SensingModel, SensorRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    AlwaysH0,
    AlwaysH1,
    Threshold,
}

/// How the fusion center decides for a given sensor rate pair and prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcRegime {
    pub kind: RegimeKind,
    /// Threshold on the channel likelihood ratio; `Some` iff `kind == Threshold`.
    pub lambda_eta: Option<f64>,
    /// Threshold on the received value for Gaussian channels.
    pub t_z: Option<f64>,
    /// `true` when `m1 < m0`, so the fusion center decides `H1` for `z < t_z`.
    pub relabeled: bool,
}

impl FcRegime {
    fn constant(kind: RegimeKind) -> Self {
        Self { kind, lambda_eta: None, t_z: None, relabeled: false }
    }
}

/// Bayes error of a fusion decision together with its system-level rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub pe: f64,
    pub p_f_sys: f64,
    pub p_d_sys: f64,
    pub regime: FcRegime,
}

/// Classify the fusion-center LRT for sensor rates `r` and prior ratio `eta`.
///
/// Requires `pd >= pf`. Ties `eta == pd / pf` resolve to `AlwaysH0`.
pub fn lemma2_regime(r: &RatePair, eta: f64) -> Result<FcRegime> {
    let RatePair { pf, pd } = *r;
    ensure(eta > 0.0 && eta.is_finite(), || format!("eta must be positive, got {eta}"))?;
    ensure((0.0..=1.0).contains(&pf) && (0.0..=1.0).contains(&pd), || {
        format!("rates ({pf}, {pd}) are not probabilities")
    })?;
    ensure(pd >= pf, || format!("requires pd >= pf, got pf = {pf}, pd = {pd}"))?;
    if pd == pf {
        return Err(Error::DegenerateRates(pf));
    }
    // eta >= pd/pf and eta <= (1-pd)/(1-pf), written without division and
    // with a few ulps of slack so exact ties land on the constant regimes.
    const TIE: f64 = 4.0 * f64::EPSILON;
    if eta * pf >= pd * (1.0 - TIE) {
        return Ok(FcRegime::constant(RegimeKind::AlwaysH0));
    }
    if eta * (1.0 - pf) * (1.0 - TIE) <= 1.0 - pd {
        return Ok(FcRegime::constant(RegimeKind::AlwaysH1));
    }
    let lambda = 1.0 + (eta - 1.0) / (pd - eta * pf);
    Ok(FcRegime {
        kind: RegimeKind::Threshold,
        lambda_eta: Some(lambda),
        t_z: None,
        relabeled: false,
    })
}

/// `t_z = sigma_c^2 / (m1 - m0) * ln(lambda_eta) + (m0 + m1) / 2`.
pub fn gaussian_fc_threshold(rule: &SensorRule, lambda_eta: f64, sigma_c: f64) -> Result<f64> {
    ensure(lambda_eta > 0.0, || format!("lambda_eta must be positive, got {lambda_eta}"))?;
    ensure(sigma_c > 0.0, || format!("sigma_c must be positive, got {sigma_c}"))?;
    Ok(threshold(rule.m0(), rule.m1(), lambda_eta, sigma_c))
}

fn threshold(m0: f64, m1: f64, lambda: f64, sigma_c: f64) -> f64 {
    sigma_c * sigma_c / (m1 - m0) * lambda.ln() + 0.5 * (m0 + m1)
}

/// System-level rates of the fusion LRT at an arbitrary threshold `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FcOutcome {
    pub p_f_sys: f64,
    pub p_d_sys: f64,
    /// `1 - p_d_sys`, computed without cancellation.
    pub p_miss_sys: f64,
    pub regime: FcRegime,
}

/// Fusion LRT `Lambda_Z(z) > eta` for one binary sensor behind AWGN. Rates with
/// `pd < pf` are handled by swapping the roles of the two levels; `pf == pd`
/// leaves only the prior-only decision.
pub(crate) fn binary_fc_decision(r: &RatePair, m0: f64, m1: f64, eta: f64, sigma_c: f64) -> Result<FcOutcome> {
    ensure(sigma_c > 0.0, || format!("sigma_c must be positive, got {sigma_c}"))?;
    ensure(m0 != m1, || "m0 = m1 carries no information".into())?;
    let (r, m0, m1) = if r.pd < r.pf {
        (RatePair { pf: 1.0 - r.pf, pd: 1.0 - r.pd }, m1, m0)
    } else {
        (*r, m0, m1)
    };
    let regime = match lemma2_regime(&r, eta) {
        Ok(regime) => regime,
        Err(Error::DegenerateRates(_)) => FcRegime::constant(if eta >= 1.0 {
            RegimeKind::AlwaysH0
        } else {
            RegimeKind::AlwaysH1
        }),
        Err(e) => return Err(e),
    };
    Ok(match regime.kind {
        RegimeKind::AlwaysH0 => FcOutcome {
            p_f_sys: 0.0,
            p_d_sys: 0.0,
            p_miss_sys: 1.0,
            regime: FcRegime { t_z: Some(f64::INFINITY), ..regime },
        },
        RegimeKind::AlwaysH1 => FcOutcome {
            p_f_sys: 1.0,
            p_d_sys: 1.0,
            p_miss_sys: 0.0,
            regime: FcRegime { t_z: Some(f64::NEG_INFINITY), ..regime },
        },
        RegimeKind::Threshold => {
            let lambda = regime.lambda_eta.expect("threshold regime carries lambda");
            // Reflect z -> -z when m1 < m0 so that the larger level sits in the
            // numerator of the channel likelihood ratio.
            let s = if m1 > m0 { 1.0 } else { -1.0 };
            let (a0, a1) = (s * m0, s * m1);
            let tz = threshold(a0, a1, lambda, sigma_c);
            let up0 = q_function((tz - a0) / sigma_c);
            let up1 = q_function((tz - a1) / sigma_c);
            let down0 = q_function((a0 - tz) / sigma_c);
            let down1 = q_function((a1 - tz) / sigma_c);
            FcOutcome {
                p_f_sys: up0 * (1.0 - r.pf) + up1 * r.pf,
                p_d_sys: up0 * (1.0 - r.pd) + up1 * r.pd,
                p_miss_sys: down0 * (1.0 - r.pd) + down1 * r.pd,
                regime: FcRegime { t_z: Some(s * tz), relabeled: s < 0.0, ..regime },
            }
        }
    })
}

/// Bayes error of one sensor reporting `m0`/`m1` through AWGN of std
/// `sigma_c`, given the sensor's rates.
pub fn binary_report_pe(r: &RatePair, m0: f64, m1: f64, p: &Prior, sigma_c: f64) -> Result<EvalResult> {
    let out = binary_fc_decision(r, m0, m1, p.eta(), sigma_c)?;
    let pe = match out.regime.kind {
        RegimeKind::AlwaysH0 => p.pi1(),
        RegimeKind::AlwaysH1 => p.pi0(),
        RegimeKind::Threshold => p.pi0() * out.p_f_sys + p.pi1() * out.p_miss_sys,
    };
    Ok(EvalResult { pe, p_f_sys: out.p_f_sys, p_d_sys: out.p_d_sys, regime: out.regime })
}

/// Bayes error of the optimal fusion LRT for one sensor with rule `rule`.
pub fn one_sensor_pe(rule: &SensorRule, p: &Prior, s: &SensingModel, sigma_c: f64) -> Result<EvalResult> {
    binary_report_pe(&sensor_rates(rule.t(), s), rule.m0(), rule.m1(), p, sigma_c)
}

/// Equal-prior one-sensor QDD error at its optimal rule `t = 0, m0 = -m1 = -sqrt(E_u)`.
pub fn equal_prior_closed_pe(s: &SensingModel, sigma_c: f64) -> f64 {
    let a = q_function(udd_energy(s).sqrt() / sigma_c);
    let b = q_function(s.mu / s.sigma_s);
    a + b - 2.0 * a * b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMode {
    /// Local MAP threshold `sigma_s^2 / (2 mu) * ln(pi0 / pi1)`, independent of the channel.
    ChannelBlind,
    /// Threshold minimizing the fusion error with levels fixed at `+-sqrt(E_u)`.
    Searched,
}

/// The threshold a channel-blind CDD sensor uses.
pub fn channel_blind_threshold(p: &Prior, s: &SensingModel) -> f64 {
    s.sigma_s * s.sigma_s / (2.0 * s.mu) * p.eta().ln()
}

/// One-sensor CDD: antipodal levels `+-sqrt(E_u)`, threshold per `mode`.
pub fn cdd_one_sensor_pe(
    p: &Prior,
    s: &SensingModel,
    sigma_c: f64,
    mode: ThresholdMode,
) -> Result<(SensorRule, EvalResult)> {
    let energy = udd_energy(s);
    let blind = channel_blind_threshold(p, s);
    let eval = |t: f64| SensorRule::antipodal(t, energy).and_then(|r| one_sensor_pe(&r, p, s, sigma_c));
    let t = match mode {
        ThresholdMode::ChannelBlind => blind,
        ThresholdMode::Searched => {
            let span = s.mu + 8.0 * s.sigma_s;
            let objective = |t: f64| eval(t).map(|e| e.pe).unwrap_or(f64::INFINITY);
            let (t_star, pe_star) = minimize_scalar(&objective, -span, span, 400, 1e-10);
            // The channel-blind point is always a candidate.
            if objective(blind) <= pe_star {
                blind
            } else {
                t_star
            }
        }
    };
    let rule = SensorRule::antipodal(t, energy)?;
    Ok((rule, eval(t)?))
}
