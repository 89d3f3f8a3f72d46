//! Design of sensor rules minimizing the fusion error under the per-sensor
//! power constraint.
//!
//! Each sensor contributes a threshold `t_k` and a level `m_k0`; `m_k1` is
//! eliminated through the power equality and the discrete root sign is fixed
//! per start. The search is a multi-start Nelder-Mead over these continuous
//! variables with `m_k0` projected into its feasible box after every step.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::multi_sensor::{evaluate, ChannelModel, SensorSpec, SystemSpec};
use crate::one_sensor::{binary_report_pe, channel_blind_threshold};
use crate::numerics::{normal_mass, Grid2D};
use crate::sensor::{
    m0_limit, qdd_energy, sensor_rates, solve_m1_under_power, transmit_probs, udd_energy, Prior, RatePair, RootSign,
    SensingModel, SensorRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Udd,
    Cdd,
    Qdd,
}

impl SystemKind {
    pub fn label(self) -> &'static str {
        match self {
            SystemKind::Udd => "udd",
            SystemKind::Cdd => "cdd",
            SystemKind::Qdd => "qdd",
        }
    }
}

/// Search budget and tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub starts: usize,
    pub max_evals: usize,
    /// Simplex size tolerance on the parameters.
    pub x_tol: f64,
    /// Spread tolerance on the objective across the simplex.
    pub f_tol: f64,
    /// Per-axis grid points for the final two-sensor evaluation.
    pub grid_points: usize,
    /// Per-axis grid points used while searching with correlated channels.
    pub search_grid_points: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            starts: 16,
            max_evals: 2000,
            x_tol: 1e-6,
            f_tol: 1e-9,
            grid_points: Grid2D::DEFAULT_POINTS,
            search_grid_points: 201,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimProblem {
    pub prior: Prior,
    pub sensors: Vec<SensingModel>,
    pub channel: ChannelModel,
    pub system: SystemKind,
    /// Force every sensor to use the same rule (i.i.d. systems).
    pub tie_rules: bool,
    pub settings: SolverSettings,
}

impl OptimProblem {
    pub fn new(prior: Prior, sensors: Vec<SensingModel>, channel: ChannelModel, system: SystemKind) -> Result<Self> {
        let p = Self { prior, sensors, channel, system, tie_rules: false, settings: SolverSettings::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tied_rules(mut self, tie: bool) -> Self {
        self.tie_rules = tie;
        self
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    fn validate(&self) -> Result<()> {
        ensure(matches!(self.sensors.len(), 1 | 2), || {
            format!("optimization covers one or two sensors, got {}", self.sensors.len())
        })?;
        ensure(self.channel.arity() == self.sensors.len(), || "channel arity does not match sensor count".into())?;
        ensure(self.settings.starts >= 1, || "need at least one start".into())?;
        ensure(self.settings.max_evals >= 10, || "evaluation budget too small".into())?;
        ensure(self.settings.grid_points >= 3 && self.settings.search_grid_points >= 3, || {
            "grid needs at least 3 points per axis".into()
        })?;
        if self.tie_rules {
            ensure(self.sensors.windows(2).all(|w| w[0] == w[1]), || {
                "tied rules need identically distributed sensors".into()
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub rules: Vec<SensorRule>,
    pub pe: f64,
    pub starts_used: usize,
    pub best_start_index: usize,
    pub converged: bool,
}

/// Bayes error of a system whose sensors use `rules`.
pub fn evaluate_rules(
    prior: &Prior,
    sensors: &[SensingModel],
    channel: &ChannelModel,
    rules: &[SensorRule],
    grid_points: usize,
) -> Result<f64> {
    ensure(rules.len() == sensors.len(), || "one rule per sensor".into())?;
    let specs = sensors.iter().zip(rules).map(|(s, r)| SensorSpec::quantized(*s, *r)).collect();
    evaluate(&SystemSpec::new(*prior, specs, channel.clone())?, grid_points)
}

/// UDD error for the problem's sensors and channel.
pub fn udd_pe(problem: &OptimProblem) -> Result<f64> {
    let specs = problem.sensors.iter().map(|s| SensorSpec::udd(*s)).collect();
    evaluate(&SystemSpec::new(problem.prior, specs, problem.channel.clone())?, problem.settings.grid_points)
}

/// Dispatch on `problem.system`. UDD has nothing to design and returns no rules.
pub fn optimize(problem: &OptimProblem) -> Result<OptimResult> {
    match problem.system {
        SystemKind::Udd => Ok(OptimResult {
            rules: Vec::new(),
            pe: udd_pe(problem)?,
            starts_used: 0,
            best_start_index: 0,
            converged: true,
        }),
        SystemKind::Cdd => optimize_cdd(problem),
        SystemKind::Qdd => optimize_qdd(problem),
    }
}

/// Decodes a parameter vector into rules.
struct Layout<'a> {
    problem: &'a OptimProblem,
    qdd: bool,
    /// Distinct rules being optimized (1 when tied).
    free: usize,
}

impl<'a> Layout<'a> {
    fn new(problem: &'a OptimProblem, qdd: bool) -> Self {
        let free = if problem.tie_rules { 1 } else { problem.sensors.len() };
        Self { problem, qdd, free }
    }

    fn dim(&self) -> usize {
        self.free * if self.qdd { 2 } else { 1 }
    }

    fn sensor(&self, k: usize) -> &SensingModel {
        &self.problem.sensors[k]
    }

    /// Clamp every `m0` into its box for the current threshold.
    fn project(&self, x: &mut [f64]) {
        if !self.qdd {
            return;
        }
        for k in 0..self.free {
            let limit = m0_limit(x[2 * k], self.sensor(k), &self.problem.prior);
            x[2 * k + 1] = x[2 * k + 1].clamp(-limit, limit);
        }
    }

    fn rules(&self, x: &[f64], signs: &[RootSign]) -> Result<Vec<SensorRule>> {
        let p = &self.problem.prior;
        let mut out = Vec::with_capacity(self.free);
        for k in 0..self.free {
            let s = self.sensor(k);
            let rule = if self.qdd {
                let (t, m0) = (x[2 * k], x[2 * k + 1]);
                SensorRule::new(t, m0, solve_m1_under_power(m0, t, s, p, signs[k])?)?
            } else {
                SensorRule::antipodal(x[k], udd_energy(s))?
            };
            out.push(rule);
        }
        if self.free == 1 && self.problem.sensors.len() == 2 {
            out.push(out[0]);
        }
        Ok(out)
    }

    fn objective(&self, x: &[f64], signs: &[RootSign], grid_points: usize) -> f64 {
        let pr = self.problem;
        match self.rules(x, signs) {
            Ok(rules) => evaluate_rules(&pr.prior, &pr.sensors, &pr.channel, &rules, grid_points)
                .unwrap_or_else(|_| pr.prior.prior_only_error()),
            // Rules that never send m1 (or collapse m1 onto m0) carry no information.
            Err(_) => pr.prior.prior_only_error(),
        }
    }
}

#[derive(Debug, Clone)]
struct Start {
    x: Vec<f64>,
    signs: Vec<RootSign>,
}

#[derive(Debug, Clone)]
struct LocalResult {
    x: Vec<f64>,
    f: f64,
    converged: bool,
}

/// Nelder-Mead with standard coefficients, a projection applied to every
/// trial point and a single restart from the converged vertex.
fn nelder_mead<F: Fn(&[f64]) -> f64, P: Fn(&mut [f64])>(
    f: &F,
    project: &P,
    x0: &[f64],
    steps: &[f64],
    max_evals: usize,
    x_tol: f64,
    f_tol: f64,
) -> LocalResult {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut start = x0.to_vec();
    project(&mut start);
    let mut best = LocalResult { f: eval(&start), x: start.clone(), converged: false };
    for _round in 0..2 {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best.x.clone(), best.f));
        for i in 0..n {
            let mut v = best.x.clone();
            v[i] += steps[i];
            project(&mut v);
            if (v[i] - best.x[i]).abs() < 0.5 * steps[i].abs() {
                v[i] = best.x[i] - steps[i];
                project(&mut v);
            }
            let fv = eval(&v);
            simplex.push((v, fv));
        }
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let size = simplex[1..]
                .iter()
                .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let spread = simplex[n].1 - simplex[0].1;
            if size < x_tol && spread < f_tol {
                converged = true;
                break;
            }
            if evals.get() >= max_evals {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64).collect();
            let along = |coef: f64| -> Vec<f64> {
                let mut p: Vec<f64> = (0..n).map(|j| centroid[j] + coef * (simplex[n].0[j] - centroid[j])).collect();
                project(&mut p);
                p
            };
            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(-0.5);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < fr.min(simplex[n].1) {
                    simplex[n] = (xc, fc);
                } else {
                    let b = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        let mut p: Vec<f64> = v.0.iter().zip(&b).map(|(a, c)| c + 0.5 * (a - c)).collect();
                        project(&mut p);
                        v.1 = eval(&p);
                        v.0 = p;
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = simplex[0].1 < best.f;
        if simplex[0].1 <= best.f {
            best = LocalResult { x: simplex[0].0.clone(), f: simplex[0].1, converged };
        }
        best.converged = converged;
        if !converged || evals.get() >= max_evals || !improved {
            break;
        }
    }
    best
}

fn sign_combo(index: usize, count: usize) -> Vec<RootSign> {
    (0..count)
        .map(|k| if (index >> k) & 1 == 0 { RootSign::Positive } else { RootSign::Negative })
        .collect()
}

/// Latin-hypercube samples in the unit cube.
fn latin_hypercube(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        columns.push(strata.iter().map(|&s| (s as f64 + rng.random::<f64>()) / n as f64).collect());
    }
    (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

fn t_span(s: &SensingModel) -> f64 {
    s.mu + 3.0 * s.sigma_s
}

fn run_starts(layout: &Layout, starts: Vec<Start>) -> Result<OptimResult> {
    let pr = layout.problem;
    let settings = pr.settings;
    let correlated = matches!(pr.channel, ChannelModel::CorrelatedBivariate(_));
    let search_points = if correlated { settings.search_grid_points } else { settings.grid_points };
    let steps: Vec<f64> = (0..layout.dim())
        .map(|j| {
            let k = if layout.qdd { j / 2 } else { j };
            let s = layout.sensor(k);
            if layout.qdd && j % 2 == 1 {
                0.3 * udd_energy(s).sqrt()
            } else {
                0.5 * s.sigma_s.max(0.1)
            }
        })
        .collect();
    let locals: Vec<(LocalResult, f64)> = starts
        .par_iter()
        .map(|st| {
            let f = |x: &[f64]| layout.objective(x, &st.signs, search_points);
            let mut x0 = st.x.clone();
            layout.project(&mut x0);
            let f0 = f(&x0);
            let local =
                nelder_mead(&f, &|x: &mut [f64]| layout.project(x), &x0, &steps, settings.max_evals, settings.x_tol, settings.f_tol);
            let local = if local.f <= f0 { local } else { LocalResult { x: x0, f: f0, converged: local.converged } };
            (local, f0)
        })
        .collect();
    // Re-score on the full grid when the search used a coarser one; the
    // starting points stay in the pool so the result never loses to them.
    let mut pool: Vec<(usize, Vec<f64>, f64, bool)> = Vec::new();
    for (i, ((local, _), st)) in locals.iter().zip(&starts).enumerate() {
        let f = if search_points == settings.grid_points {
            local.f
        } else {
            layout.objective(&local.x, &st.signs, settings.grid_points)
        };
        pool.push((i, local.x.clone(), f, local.converged));
    }
    if search_points != settings.grid_points {
        for (i, st) in starts.iter().enumerate() {
            let mut x0 = st.x.clone();
            layout.project(&mut x0);
            let f = layout.objective(&x0, &st.signs, settings.grid_points);
            pool.push((i, x0, f, locals[i].0.converged));
        }
    }
    let mut best: Option<&(usize, Vec<f64>, f64, bool)> = None;
    for cand in &pool {
        if !cand.2.is_finite() {
            continue;
        }
        match best {
            Some(b) if cand.2 > b.2 || (cand.2 == b.2 && cand.0 >= b.0) => {}
            _ => best = Some(cand),
        }
    }
    let (index, x, pe, converged) = best.ok_or_else(|| Error::NonConvergence { estimate: f64::NAN, error: f64::INFINITY })?;
    let rules = layout.rules(x, &starts[*index].signs)?;
    Ok(OptimResult { rules, pe: *pe, starts_used: starts.len(), best_start_index: *index, converged: *converged })
}

/// Threshold-only design with antipodal levels `+-sqrt(E_u)`.
pub fn optimize_cdd(problem: &OptimProblem) -> Result<OptimResult> {
    problem.validate()?;
    let layout = Layout::new(problem, false);
    let dim = layout.dim();
    let mut starts = vec![
        Start { x: vec![0.0; dim], signs: Vec::new() },
        Start {
            x: (0..dim).map(|k| channel_blind_threshold(&problem.prior, layout.sensor(k))).collect(),
            signs: Vec::new(),
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(problem.settings.seed);
    let extra = problem.settings.starts.saturating_sub(starts.len());
    for u in latin_hypercube(extra, dim, &mut rng) {
        let x = u.iter().enumerate().map(|(k, &v)| (2.0 * v - 1.0) * t_span(layout.sensor(k))).collect();
        starts.push(Start { x, signs: Vec::new() });
    }
    starts.truncate(problem.settings.starts.max(1));
    run_starts(&layout, starts)
}

/// Joint threshold and level design. The symmetric point and the CDD optimum
/// are always among the starts, so the result is never worse than CDD's.
pub fn optimize_qdd(problem: &OptimProblem) -> Result<OptimResult> {
    problem.validate()?;
    let layout = Layout::new(problem, true);
    let free = layout.free;
    let combos = 1usize << free;
    let energy = |k: usize| udd_energy(layout.sensor(k)).sqrt();

    let mut starts = vec![Start {
        x: (0..free).flat_map(|k| [0.0, -energy(k)]).collect(),
        signs: vec![RootSign::Positive; free],
    }];
    let cdd = optimize_cdd(problem)?;
    starts.push(Start {
        x: (0..free).flat_map(|k| [cdd.rules[k].t(), -energy(k)]).collect(),
        signs: vec![RootSign::Positive; free],
    });
    let mut rng = ChaCha8Rng::seed_from_u64(problem.settings.seed);
    let extra = problem.settings.starts.saturating_sub(starts.len());
    for (i, u) in latin_hypercube(extra, 2 * free, &mut rng).into_iter().enumerate() {
        let mut x = Vec::with_capacity(2 * free);
        for k in 0..free {
            let s = layout.sensor(k);
            let t = (2.0 * u[2 * k] - 1.0) * t_span(s);
            let limit = m0_limit(t, s, &problem.prior).min(4.0 * energy(k));
            x.push(t);
            x.push((2.0 * u[2 * k + 1] - 1.0) * limit);
        }
        starts.push(Start { x, signs: sign_combo(i % combos, free) });
    }
    starts.truncate(problem.settings.starts.max(2));
    run_starts(&layout, starts)
}

/// Outcome of comparing random interval rules against the optimized LRQ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `lrq_pe - interval_pe` observed; positive values are violations
    /// once they exceed the tolerance.
    pub worst_margin: f64,
    pub lrq_pe: f64,
}

pub const DOMINANCE_TOL: f64 = 1e-6;

/// Sensor rates of the interval rule "send m1 iff a <= x <= b".
pub fn interval_rates(a: f64, b: f64, s: &SensingModel) -> RatePair {
    RatePair { pf: normal_mass(a, b, -s.mu, s.sigma_s), pd: normal_mass(a, b, s.mu, s.sigma_s) }
}

/// Exact error of an interval rule with levels `m0`/`m1`; uninformative
/// rules fall back to the prior-only decision.
pub fn interval_rule_pe(r: &RatePair, m0: f64, m1: f64, p: &Prior, sigma_c: f64) -> Result<f64> {
    if r.pf == r.pd || m0 == m1 {
        return Ok(p.prior_only_error());
    }
    Ok(binary_report_pe(r, m0, m1, p, sigma_c)?.pe)
}

/// Random non-LRQ (interval) rules with levels meeting the same power budget
/// never beat the optimized one-sensor LRQ by more than [`DOMINANCE_TOL`].
pub fn verify_lrq_dominance(problem: &OptimProblem, trials: usize, seed: u64) -> Result<DominanceReport> {
    ensure(problem.sensors.len() == 1, || "dominance check covers one sensor".into())?;
    let ChannelModel::Independent(sig) = &problem.channel else {
        return Err(Error::Unsupported("dominance check needs an AWGN channel".into()));
    };
    let sigma_c = sig[0];
    let lrq = optimize_qdd(problem)?;
    let s = &problem.sensors[0];
    let p = &problem.prior;
    let energy = udd_energy(s);
    let span = s.mu + 5.0 * s.sigma_s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DominanceReport { trials, violations: 0, worst_margin: f64::NEG_INFINITY, lrq_pe: lrq.pe };
    for _ in 0..trials {
        let (mut a, mut b) = (rng.random_range(-span..span), rng.random_range(-span..span));
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let r = interval_rates(a, b, s);
        let (p_m0, p_m1) = transmit_probs(&r, p);
        let pe = if p_m1 <= 0.0 || p_m0 <= 0.0 {
            p.prior_only_error()
        } else {
            let limit = (energy / p_m0).sqrt();
            let m0 = rng.random_range(-1.0..=1.0) * limit;
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let m1 = sign * ((energy - p_m0 * m0 * m0).max(0.0) / p_m1).sqrt();
            interval_rule_pe(&r, m0, m1, p, sigma_c)?
        };
        let margin = lrq.pe - pe;
        report.worst_margin = report.worst_margin.max(margin);
        if margin > DOMINANCE_TOL {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Relative deviation of a rule's average energy from the UDD budget.
pub fn power_residual(rule: &SensorRule, s: &SensingModel, p: &Prior) -> f64 {
    let e = udd_energy(s);
    (qdd_energy(rule, &sensor_rates(rule.t(), s), p) - e).abs() / e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::one_sensor::{cdd_one_sensor_pe, equal_prior_closed_pe, ThresholdMode};
    use crate::multi_sensor::CorrelatedChannel;

    fn one(pi1: f64, sigma_s: f64, sigma_c: f64, system: SystemKind) -> OptimProblem {
        OptimProblem::new(
            Prior::new(pi1).unwrap(),
            vec![SensingModel::new(1.0, sigma_s).unwrap()],
            ChannelModel::Independent(vec![sigma_c]),
            system,
        )
        .unwrap()
    }

    #[test]
    fn nelder_mead_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let r = nelder_mead(&f, &|_: &mut [f64]| {}, &[0.0, 0.0], &[0.5, 0.5], 2000, 1e-8, 1e-14);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_respects_projection() {
        let f = |x: &[f64]| (x[0] - 5.0).powi(2);
        let r = nelder_mead(&f, &|x: &mut [f64]| x[0] = x[0].min(2.0), &[0.0], &[0.5], 2000, 1e-9, 1e-14);
        assert!((r.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn latin_hypercube_strata() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = latin_hypercube(8, 3, &mut rng);
        for d in 0..3 {
            let mut bins: Vec<usize> = pts.iter().map(|p| (p[d] * 8.0) as usize).collect();
            bins.sort();
            assert_eq!(bins, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn equal_prior_optimum_is_symmetric() {
        let pr = one(0.5, 1.5, 1.5, SystemKind::Qdd);
        let res = optimize_qdd(&pr).unwrap();
        let s = pr.sensors[0];
        let rule = res.rules[0];
        assert!(rule.t().abs() < 1e-2, "t = {}", rule.t());
        assert!((rule.m0().abs() - udd_energy(&s).sqrt()).abs() < 1e-2);
        assert!((res.pe - equal_prior_closed_pe(&s, 1.5)).abs() < 1e-6);
        assert!(power_residual(&rule, &s, &pr.prior) < 1e-10);
    }

    #[test]
    fn qdd_beats_cdd_and_cdd_beats_blind() {
        for sigma_c in [0.5, 2.0, 4.0] {
            let pr = one(0.7, 1.5, sigma_c, SystemKind::Qdd);
            let q = optimize_qdd(&pr).unwrap();
            let c = optimize_cdd(&pr).unwrap();
            assert!(q.pe <= c.pe + 1e-12);
            let (_, blind) = cdd_one_sensor_pe(&pr.prior, &pr.sensors[0], sigma_c, ThresholdMode::ChannelBlind).unwrap();
            assert!(c.pe <= blind.pe + 1e-12);
            let re = evaluate_rules(&pr.prior, &pr.sensors, &pr.channel, &q.rules, 801).unwrap();
            assert!((re - q.pe).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pr = one(0.3, 1.0, 1.2, SystemKind::Qdd);
        assert_eq!(optimize_qdd(&pr).unwrap(), optimize_qdd(&pr).unwrap());
    }

    #[test]
    fn tied_two_sensor_rules_are_identical() {
        let s = SensingModel::new(1.0, 1.2).unwrap();
        let pr = OptimProblem::new(Prior::new(0.75).unwrap(), vec![s, s], ChannelModel::iid(1.0, 2), SystemKind::Qdd)
            .unwrap()
            .with_tied_rules(true);
        let res = optimize_qdd(&pr).unwrap();
        assert_eq!(res.rules[0], res.rules[1]);
        for r in &res.rules {
            assert!(power_residual(r, &s, &pr.prior) < 1e-10);
        }
    }

    #[test]
    fn problem_validation() {
        let s = SensingModel::new(1.0, 1.0).unwrap();
        assert!(OptimProblem::new(Prior::equal(), vec![s; 3], ChannelModel::iid(1.0, 3), SystemKind::Qdd).is_err());
        let other = SensingModel::new(1.0, 2.0).unwrap();
        let pr = OptimProblem {
            prior: Prior::equal(),
            sensors: vec![s, other],
            channel: ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(0.5, 1.0, 1.0).unwrap()),
            system: SystemKind::Qdd,
            tie_rules: true,
            settings: SolverSettings::default(),
        };
        assert!(optimize_qdd(&pr).is_err());
    }

    #[test]
    fn interval_rule_examples() {
        let s = SensingModel::new(1.0, 1.5).unwrap();
        let p = Prior::equal();
        // [t, inf) is the LRQ itself.
        let r = interval_rates(0.3, f64::INFINITY, &s);
        assert_eq!(r, sensor_rates(0.3, &s));
        // (-inf, t] with swapped levels is the same rule relabeled.
        let e = udd_energy(&s).sqrt();
        let lrq = interval_rule_pe(&sensor_rates(0.0, &s), -e, e, &p, 1.0).unwrap();
        let flipped = interval_rule_pe(&interval_rates(f64::NEG_INFINITY, 0.0, &s), e, -e, &p, 1.0).unwrap();
        assert!((lrq - flipped).abs() < 1e-15);
        // a = b is uninformative.
        let r = interval_rates(0.4, 0.4, &s);
        assert_eq!(interval_rule_pe(&r, -1.0, 1.0, &p, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn dominance_small_run() {
        let pr = one(0.5, 1.5, 1.0, SystemKind::Qdd);
        let rep = verify_lrq_dominance(&pr, 200, 11).unwrap();
        assert_eq!(rep.violations, 0, "{rep:?}");
        assert!(rep.worst_margin <= DOMINANCE_TOL);
    }
}
