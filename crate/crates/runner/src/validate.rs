//! Runtime invariant suite for the `validate` experiment. Each check
//! records an observed value, its reference and tolerance.

use qdd_core::asymptotics::{chernoff_gaussian, chernoff_mixture_half, comparator_difference, boundary_point, BoundaryRegime};
use qdd_core::montecarlo::{simulate_pe, McConfig};
use qdd_core::multi_sensor::{
    evaluate, evaluate_numeric, fc_density_joint, udd_pe_independent, ChannelModel, CorrelatedChannel, SensorSpec,
    SystemSpec,
};
use qdd_core::numerics::{integrate_2d, mixture_pdf_2d, normal_mass, q_function, Grid2D, Mixture1D};
use qdd_core::one_sensor::{equal_prior_closed_pe, one_sensor_pe};
use qdd_core::optimizer::{optimize_cdd, optimize_qdd, power_residual, verify_lrq_dominance, OptimProblem, SolverSettings, SystemKind};
use qdd_core::sensor::{m0_limit, sensor_rates, solve_m1_under_power, udd_energy, Prior, RootSign, SensingModel, SensorRule};

#[derive(Debug, Clone)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tol: f64,
    pub pass: bool,
}

struct Suite(Vec<Check>);

impl Suite {
    /// `|value - reference| <= tol`.
    fn close(&mut self, module: &'static str, name: &str, value: f64, reference: f64, tol: f64) {
        let pass = (value - reference).abs() <= tol;
        self.0.push(Check { module, name: name.into(), value, reference, tol, pass });
    }

    /// `value <= reference + tol`.
    fn at_most(&mut self, module: &'static str, name: &str, value: f64, reference: f64, tol: f64) {
        let pass = value <= reference + tol;
        self.0.push(Check { module, name: name.into(), value, reference, tol, pass });
    }

    fn attempt(&mut self, module: &'static str, name: &str, f: impl FnOnce(&mut Self) -> qdd_core::Result<()>) {
        if let Err(e) = f(self) {
            self.0.push(Check { module, name: format!("{name}: {e}"), value: f64::NAN, reference: 0.0, tol: 0.0, pass: false });
        }
    }
}

fn sensing(sigma_s: f64) -> SensingModel {
    SensingModel::new(1.0, sigma_s).expect("positive parameters")
}

/// Run every module's checks. `seed` drives the Monte Carlo and random rules.
pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut s = Suite(Vec::new());
    numerics(&mut s);
    sensor(&mut s);
    one_sensor(&mut s);
    multi_sensor(&mut s);
    optimizer(&mut s, seed);
    asymptotics(&mut s);
    montecarlo(&mut s, seed);
    s.0
}

fn numerics(s: &mut Suite) {
    let m = "numerics";
    let worst = (-80..=80).map(|i| i as f64 * 0.1).map(|u| (q_function(u) + q_function(-u) - 1.0).abs()).fold(0.0, f64::max);
    s.close(m, "Q symmetry", worst, 0.0, 1e-12);
    s.close(m, "normal mass over the line", normal_mass(f64::NEG_INFINITY, f64::INFINITY, 0.3, 1.7), 1.0, 1e-14);
    s.attempt(m, "2-D mixture integrates to one", |s| {
        let spec = SystemSpec::new(
            Prior::new(0.3)?,
            vec![SensorSpec::udd(sensing(1.0)), SensorSpec::udd(sensing(1.5))],
            ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(0.6, 1.0, 0.8)?),
        )?;
        let (f1, _) = fc_density_joint(&spec)?;
        let grid = Grid2D::covering(&[&f1], [Grid2D::DEFAULT_POINTS; 2])?;
        s.close(m, "2-D mixture integrates to one", integrate_2d(|a, b| mixture_pdf_2d(&f1, a, b), &grid), 1.0, 1e-5);
        Ok(())
    });
}

fn sensor(s: &mut Suite) {
    let m = "sensor-model";
    let worst = [0.3, 1.0, 2.5]
        .iter()
        .flat_map(|&ss| (-40..=40).map(move |i| sensor_rates(i as f64 * 0.25, &sensing(ss))))
        .map(|r| r.pf - r.pd)
        .fold(f64::NEG_INFINITY, f64::max);
    s.at_most(m, "pd >= pf", worst, 0.0, 0.0);
    s.attempt(m, "power budget met by solved levels", |s| {
        let mut worst: f64 = 0.0;
        for (pi1, ss) in [(0.5, 1.0), (0.7, 1.5), (0.2, 0.4)] {
            let (p, sm) = (Prior::new(pi1)?, sensing(ss));
            for t in [-1.0, 0.0, 0.7] {
                let lim = m0_limit(t, &sm, &p);
                for frac in [-0.9, 0.0, 0.5] {
                    for sign in [RootSign::Positive, RootSign::Negative] {
                        let m0 = frac * lim;
                        let m1 = solve_m1_under_power(m0, t, &sm, &p, sign)?;
                        worst = worst.max(power_residual(&SensorRule::new(t, m0, m1)?, &sm, &p));
                    }
                }
            }
        }
        s.close(m, "power budget met by solved levels", worst, 0.0, 1e-9);
        Ok(())
    });
}

fn one_sensor(s: &mut Suite) {
    let m = "fusion-onesensor";
    s.attempt(m, "equal-prior closed form", |s| {
        let mut worst: f64 = 0.0;
        for (ss, sc) in [(0.5, 0.5), (1.0, 1.0), (1.5, 2.0), (3.0, 0.2)] {
            let sm = sensing(ss);
            let rule = SensorRule::antipodal(0.0, udd_energy(&sm))?;
            let general = one_sensor_pe(&rule, &Prior::equal(), &sm, sc)?.pe;
            worst = worst.max((general - equal_prior_closed_pe(&sm, sc)).abs());
        }
        s.close(m, "equal-prior closed form", worst, 0.0, 1e-10);
        Ok(())
    });
    s.attempt(m, "pe below the prior-only error", |s| {
        let p = Prior::new(0.7)?;
        let mut worst = f64::NEG_INFINITY;
        for sc in [0.1, 1.0, 10.0] {
            for t in [-3.0, 0.0, 3.0] {
                let sm = sensing(1.5);
                let pe = one_sensor_pe(&SensorRule::antipodal(t, udd_energy(&sm))?, &p, &sm, sc)?.pe;
                worst = worst.max(pe - p.prior_only_error());
            }
        }
        s.at_most(m, "pe below the prior-only error", worst, 0.0, 1e-12);
        Ok(())
    });
}

fn multi_sensor(s: &mut Suite) {
    let m = "fusion-multisensor";
    s.attempt(m, "two sensors: analytic vs grid", |s| {
        let sm = sensing(1.2);
        let rule = SensorRule::new(0.3, -0.8, 1.4)?;
        let spec = SystemSpec::new(
            Prior::new(0.75)?,
            vec![SensorSpec::quantized(sm, rule), SensorSpec::quantized(sm, rule)],
            ChannelModel::iid(0.9, 2),
        )?;
        let a = evaluate(&spec, Grid2D::DEFAULT_POINTS)?;
        let n = evaluate_numeric(&spec, Grid2D::DEFAULT_POINTS, 1e-10)?;
        s.close(m, "two sensors: analytic vs grid", a, n, 1e-6);
        Ok(())
    });
    s.attempt(m, "UDD closed form vs numeric", |s| {
        let (p, sm) = (Prior::new(0.4)?, sensing(0.8));
        let spec = SystemSpec::new(p, vec![SensorSpec::udd(sm)], ChannelModel::iid(1.3, 1))?;
        s.close(m, "UDD closed form vs numeric", udd_pe_independent(1, &p, &sm, 1.3)?, evaluate_numeric(&spec, 801, 1e-12)?, 1e-9);
        Ok(())
    });
}

fn optimizer(s: &mut Suite, seed: u64) {
    let m = "optimizer";
    s.attempt(m, "QDD no worse than CDD", |s| {
        let settings = SolverSettings { starts: 6, seed, ..SolverSettings::default() };
        let prob = |k| {
            OptimProblem::new(Prior::new(0.7)?, vec![sensing(1.5)], ChannelModel::iid(1.0, 1), k).map(|p| p.with_settings(settings))
        };
        let q = optimize_qdd(&prob(SystemKind::Qdd)?)?;
        let c = optimize_cdd(&prob(SystemKind::Cdd)?)?;
        s.at_most(m, "QDD no worse than CDD", q.pe, c.pe, 1e-6);
        s.close(m, "QDD power residual", power_residual(&q.rules[0], &sensing(1.5), &Prior::new(0.7)?), 0.0, 1e-9);
        let rep = verify_lrq_dominance(&prob(SystemKind::Qdd)?, 200, seed)?;
        s.at_most(m, "LRQ dominates interval rules", rep.worst_margin, 0.0, 1e-6);
        Ok(())
    });
}

fn asymptotics(s: &mut Suite) {
    let m = "asymptotics";
    s.attempt(m, "mixture Chernoff on Gaussians", |s| {
        let (f1, f0) = (Mixture1D::gaussian(0.7, 1.3)?, Mixture1D::gaussian(-0.7, 1.3)?);
        s.close(m, "mixture Chernoff on Gaussians", chernoff_mixture_half(&f1, &f0)?, chernoff_gaussian(0.7, 1.3)?, 1e-8);
        Ok(())
    });
    s.attempt(m, "boundary brackets a sign change", |s| {
        let p = boundary_point(BoundaryRegime::OneSensor, 1.0, 1.5, qdd_core::asymptotics::DEFAULT_BRACKET)?;
        let Some(sc) = p.sigma_c_star else {
            s.close(m, "boundary brackets a sign change", f64::NAN, 0.0, 0.0);
            return Ok(());
        };
        let lo = comparator_difference(BoundaryRegime::OneSensor, 1.0, 1.5, sc - 1e-3)?;
        let hi = comparator_difference(BoundaryRegime::OneSensor, 1.0, 1.5, sc + 1e-3)?;
        s.at_most(m, "boundary brackets a sign change", (lo * hi).signum(), -1.0, 0.0);
        Ok(())
    });
}

fn montecarlo(s: &mut Suite, seed: u64) {
    let m = "montecarlo";
    s.attempt(m, "simulation agrees with analytic pe", |s| {
        let sm = sensing(1.2);
        let rule = SensorRule::new(0.2, -0.9, 1.3)?;
        let spec = SystemSpec::new(
            Prior::new(0.6)?,
            vec![SensorSpec::quantized(sm, rule), SensorSpec::udd(sm)],
            ChannelModel::Independent(vec![0.8, 1.1]),
        )?;
        let exact = evaluate(&spec, Grid2D::DEFAULT_POINTS)?;
        let est = simulate_pe(&McConfig::new(spec, 200_000, seed)?)?;
        s.at_most(m, "simulation agrees with analytic pe (|z|)", ((est.pe_hat - exact) / est.stderr).abs(), 4.0, 0.0);
        Ok(())
    });
}
