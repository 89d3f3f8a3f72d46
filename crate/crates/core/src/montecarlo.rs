//! Monte Carlo estimation of the fusion error.
//!
//! Each trial draws a hypothesis from the prior, sensing noise, the sensor
//! outputs and channel noise, then applies the exact fusion LRT computed from
//! the analytic FC densities. Trial `i` uses ChaCha8 stream `i` under the
//! configured seed, so estimates do not depend on thread count and adding
//! trials leaves earlier trials unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::multi_sensor::{fc_density_joint, sensor_fc_densities, ChannelModel, SensorKind, SensorSpec, SystemSpec};
use crate::numerics::{Mixture1D, Mixture2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub spec: SystemSpec,
}

impl McConfig {
    pub fn new(spec: SystemSpec, trials: u64, seed: u64) -> Result<Self> {
        ensure(trials >= 1, || "need at least one trial".into())?;
        Ok(Self { trials, seed, spec })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub pe_hat: f64,
    pub stderr: f64,
    pub trials: u64,
    pub errors: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_counts(errors: u64, trials: u64, seed: u64) -> Self {
        let pe_hat = errors as f64 / trials as f64;
        Self { pe_hat, stderr: (pe_hat * (1.0 - pe_hat) / trials as f64).sqrt(), trials, errors, seed }
    }

    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (value - self.pe_hat).abs() <= k * self.stderr
    }
}

const CHUNK: u64 = 1 << 14;

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn ln_mixture_1d(m: &Mixture1D, z: f64) -> f64 {
    log_sum_exp(m.components().iter().filter(|c| c.weight > 0.0).map(|c| {
        let u = (z - c.mean) / c.sigma;
        c.weight.ln() - c.sigma.ln() - 0.5 * u * u
    }))
}

fn ln_mixture_2d(m: &Mixture2D, z1: f64, z2: f64) -> f64 {
    let cov = m.covariance();
    let one_minus = 1.0 - cov.rho * cov.rho;
    log_sum_exp(m.components().iter().filter(|c| c.weight > 0.0).map(|c| {
        let u = (z1 - c.mean1) / cov.sigma1;
        let v = (z2 - c.mean2) / cov.sigma2;
        c.weight.ln() - (u * u - 2.0 * cov.rho * u * v + v * v) / (2.0 * one_minus)
    }))
}

/// What each sensor puts on the channel for one trial.
fn transmit(sensor: &SensorSpec, h1: bool, rng: &mut ChaCha8Rng) -> f64 {
    let s = &sensor.sensing;
    let noise: f64 = rng.sample(StandardNormal);
    let x = if h1 { s.mu } else { -s.mu } + s.sigma_s * noise;
    match sensor.kind {
        SensorKind::Udd => x,
        SensorKind::Quantized(rule) => {
            if x >= rule.t() {
                rule.m1()
            } else {
                rule.m0()
            }
        }
    }
}

fn run<F: Fn(&mut ChaCha8Rng) -> bool + Sync>(trials: u64, seed: u64, trial_errs: F) -> McEstimate {
    let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
    let chunks = trials.div_ceil(CHUNK);
    let errors: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut count = 0u64;
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(i);
                count += trial_errs(&mut rng) as u64;
            }
            count
        })
        .collect::<Vec<u64>>()
        .iter()
        .sum();
    McEstimate::from_counts(errors, trials, seed)
}

/// Simulated fusion error for any number of sensors behind independent
/// channels; two-sensor correlated systems are forwarded to
/// [`simulate_pe_correlated`].
pub fn simulate_pe(cfg: &McConfig) -> Result<McEstimate> {
    ensure(cfg.trials >= 1, || "need at least one trial".into())?;
    let spec = &cfg.spec;
    let sigmas = match &spec.channel {
        ChannelModel::Independent(s) => s.clone(),
        ChannelModel::CorrelatedBivariate(_) => return simulate_pe_correlated(cfg),
    };
    let densities: Vec<(Mixture1D, Mixture1D)> =
        spec.sensors.iter().zip(&sigmas).map(|(s, &sc)| sensor_fc_densities(s, sc)).collect::<Result<_>>()?;
    let (pi1, ln_eta) = (spec.prior.pi1(), spec.prior.eta().ln());
    Ok(run(cfg.trials, cfg.seed, |rng| {
        let h1 = rng.random::<f64>() < pi1;
        let mut llr = 0.0;
        for ((sensor, &sc), (f0, f1)) in spec.sensors.iter().zip(&sigmas).zip(&densities) {
            let w: f64 = rng.sample(StandardNormal);
            let z = transmit(sensor, h1, rng) + sc * w;
            llr += ln_mixture_1d(f1, z) - ln_mixture_1d(f0, z);
        }
        (llr > ln_eta) != h1
    }))
}

/// Simulated fusion error for two sensors behind bivariate Gaussian channel
/// noise `w1 = s1 g1`, `w2 = s2 (rho g1 + sqrt(1 - rho^2) g2)`.
pub fn simulate_pe_correlated(cfg: &McConfig) -> Result<McEstimate> {
    ensure(cfg.trials >= 1, || "need at least one trial".into())?;
    let spec = &cfg.spec;
    let ChannelModel::CorrelatedBivariate(ch) = spec.channel else {
        return Err(Error::Unsupported("simulate_pe_correlated needs a correlated channel".into()));
    };
    let (f0, f1) = fc_density_joint(spec)?;
    let (pi1, ln_eta) = (spec.prior.pi1(), spec.prior.eta().ln());
    let comp = (1.0 - ch.rho * ch.rho).sqrt();
    Ok(run(cfg.trials, cfg.seed, |rng| {
        let h1 = rng.random::<f64>() < pi1;
        let x1 = transmit(&spec.sensors[0], h1, rng);
        let x2 = transmit(&spec.sensors[1], h1, rng);
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let z1 = x1 + ch.sigma_c1 * g1;
        let z2 = x2 + ch.sigma_c2 * (ch.rho * g1 + comp * g2);
        let llr = ln_mixture_2d(&f1, z1, z2) - ln_mixture_2d(&f0, z1, z2);
        (llr > ln_eta) != h1
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_sensor::{evaluate, CorrelatedChannel};
    use crate::numerics::q_function;
    use crate::one_sensor::equal_prior_closed_pe;
    use crate::sensor::{udd_energy, Prior, SensingModel, SensorRule};

    #[test]
    fn udd_matches_closed_form() {
        let s = SensingModel::new(1.0, 2.0).unwrap();
        let spec = SystemSpec::new(Prior::equal(), vec![SensorSpec::udd(s)], ChannelModel::Independent(vec![1e-9])).unwrap();
        let est = simulate_pe(&McConfig::new(spec, 200_000, 5).unwrap()).unwrap();
        assert!(est.covers(q_function(0.5), 3.0), "{est:?}");
    }

    #[test]
    fn noise_free_system_never_errs() {
        let s = SensingModel::new(1.0, 1e-9).unwrap();
        let spec = SystemSpec::new(
            Prior::new(0.3).unwrap(),
            vec![SensorSpec::quantized(s, SensorRule::antipodal(0.0, 1.0).unwrap()), SensorSpec::udd(s)],
            ChannelModel::Independent(vec![1e-9, 1e-9]),
        )
        .unwrap();
        let est = simulate_pe(&McConfig::new(spec, 10_000, 1).unwrap()).unwrap();
        assert_eq!(est.errors, 0);
        assert_eq!(est.pe_hat, 0.0);
    }

    #[test]
    fn qdd_matches_closed_form() {
        let s = SensingModel::new(1.0, 1.5).unwrap();
        let rule = SensorRule::antipodal(0.0, udd_energy(&s)).unwrap();
        let spec = SystemSpec::new(Prior::equal(), vec![SensorSpec::quantized(s, rule)], ChannelModel::iid(1.0, 1)).unwrap();
        let est = simulate_pe(&McConfig::new(spec, 200_000, 9).unwrap()).unwrap();
        assert!(est.covers(equal_prior_closed_pe(&s, 1.0), 3.0), "{est:?}");
    }

    #[test]
    fn reproducible_and_prefix_stable() {
        let s = SensingModel::new(1.0, 1.0).unwrap();
        let spec = SystemSpec::new(Prior::new(0.6).unwrap(), vec![SensorSpec::udd(s); 3], ChannelModel::iid(0.8, 3)).unwrap();
        let a = simulate_pe(&McConfig::new(spec.clone(), 40_000, 77).unwrap()).unwrap();
        let b = simulate_pe(&McConfig::new(spec.clone(), 40_000, 77).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = simulate_pe(&McConfig::new(spec, 1, 77).unwrap()).unwrap();
        assert_eq!(c.trials, 1);
    }

    #[test]
    fn stderr_identity() {
        let est = McEstimate::from_counts(250, 1000, 0);
        assert!((est.stderr - (0.25f64 * 0.75 / 1000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_correlation_matches_independent() {
        let s = SensingModel::new(1.0, 1.5).unwrap();
        let rule = SensorRule::new(0.2, -1.4, 2.3).unwrap();
        let sensors = vec![SensorSpec::quantized(s, rule), SensorSpec::udd(s)];
        let corr = SystemSpec::new(
            Prior::equal(),
            sensors.clone(),
            ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(0.0, 1.0, 1.0).unwrap()),
        )
        .unwrap();
        let ind = SystemSpec::new(Prior::equal(), sensors, ChannelModel::iid(1.0, 2)).unwrap();
        let a = simulate_pe(&McConfig::new(corr, 200_000, 3).unwrap()).unwrap();
        let b = simulate_pe(&McConfig::new(ind.clone(), 200_000, 4).unwrap()).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.pe_hat - b.pe_hat).abs() <= 3.0 * se, "{a:?} {b:?}");
        let exact = evaluate(&ind, 401).unwrap();
        assert!(a.covers(exact, 3.0));
    }

    #[test]
    fn correlated_matches_grid() {
        let s = SensingModel::new(1.0, 1.5).unwrap();
        let spec = SystemSpec::new(
            Prior::equal(),
            vec![
                SensorSpec::quantized(s, SensorRule::new(0.1, -2.0, 1.2).unwrap()),
                SensorSpec::quantized(s, SensorRule::new(-0.3, 0.5, -2.6).unwrap()),
            ],
            ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(0.9, 1.2, 1.2).unwrap()),
        )
        .unwrap();
        let exact = evaluate(&spec, 401).unwrap();
        let est = simulate_pe_correlated(&McConfig::new(spec, 200_000, 21).unwrap()).unwrap();
        assert!(est.covers(exact, 3.0), "{est:?} vs {exact}");
    }
}
