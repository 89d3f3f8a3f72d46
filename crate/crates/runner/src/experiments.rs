//! Experiment dispatch. Every kind writes one CSV per output (plus a
//! summary text file alongside) and reports row-level failures without
//! aborting.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use qdd_core::asymptotics::{
    boundary_curve, chernoff_qdd, chernoff_udd, default_sigma_s_grid, BoundaryCurve, BoundaryRegime, CrossingStatus,
};
use qdd_core::montecarlo::{simulate_pe, McConfig};
use qdd_core::multi_sensor::{evaluate, SensorSpec, SystemSpec};
use qdd_core::one_sensor::{cdd_one_sensor_pe, channel_blind_threshold, one_sensor_pe, ThresholdMode};
use qdd_core::optimizer::{evaluate_rules, optimize_cdd, optimize_qdd, udd_pe, OptimProblem, SystemKind};
use qdd_core::sensor::{udd_energy, SensingModel, SensorRule};

use crate::config::{CddThreshold, ExperimentConfig, ExperimentKind, SweepAxis, SweepSpec};
use crate::output::{fmt_opt, fmt_sig, summary_path, with_suffix, write_csv, Table};
use crate::validate::run_checks;
use crate::RunError;

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub outputs: Vec<PathBuf>,
    pub rows: usize,
    /// Failed rows, or failed checks for `validate`.
    pub failed: usize,
    pub text: String,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        match (self.failed, self.kind) {
            (0, _) => 0,
            (_, ExperimentKind::Validate) => 2,
            _ => 3,
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("results/{}.csv", kind_label(cfg.kind))));
    match cfg.kind {
        ExperimentKind::Sweep => run_sweep(cfg, &out),
        ExperimentKind::Optimize => run_optimize(cfg, &out),
        ExperimentKind::Eval => run_eval(cfg, &out),
        ExperimentKind::Boundary => run_boundary(cfg, &out),
        ExperimentKind::Chernoff => run_chernoff(cfg, &out),
        ExperimentKind::Validate => run_validate(cfg, &out),
    }
}

pub fn kind_label(k: ExperimentKind) -> &'static str {
    match k {
        ExperimentKind::Eval => "eval",
        ExperimentKind::Optimize => "optimize",
        ExperimentKind::Sweep => "sweep",
        ExperimentKind::Boundary => "boundary",
        ExperimentKind::Chernoff => "chernoff",
        ExperimentKind::Validate => "validate",
    }
}

fn finish(
    cfg: &ExperimentConfig,
    path: &Path,
    table: &Table,
    text: String,
    failed: usize,
) -> Result<RunSummary, RunError> {
    write_csv(path, cfg, table)?;
    std::fs::write(summary_path(path), &text)?;
    Ok(RunSummary { kind: cfg.kind, outputs: vec![path.to_path_buf()], rows: table.rows.len(), failed, text })
}

/// One system's design at one operating point.
#[derive(Debug, Clone)]
pub struct SystemOutcome {
    pub pe: f64,
    pub rules: Vec<SensorRule>,
    /// Fusion threshold on the received value, one sensor only.
    pub t_z: Option<f64>,
    pub start: Option<usize>,
    pub converged: Option<bool>,
}

/// Operating point: sensing noise, channel noise and channel correlation.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub sigma_s: f64,
    pub sigma_c: f64,
    pub rho: f64,
}

fn problem(cfg: &ExperimentConfig, pt: Point, system: SystemKind) -> Result<OptimProblem, RunError> {
    let sensing = cfg.sensing(pt.sigma_s)?;
    let channel = cfg.channel_model(pt.rho, pt.sigma_c)?;
    Ok(OptimProblem::new(cfg.prior(), vec![sensing; cfg.sensors], channel, system)?
        .with_tied_rules(cfg.tie_rules)
        .with_settings(cfg.solver_settings()))
}

pub fn solve_system(cfg: &ExperimentConfig, pt: Point, system: SystemKind) -> Result<SystemOutcome, RunError> {
    let prob = problem(cfg, pt, system)?;
    let sensing = prob.sensors[0];
    let one = |rule: SensorRule, pe: f64, t_z: Option<f64>| SystemOutcome {
        pe,
        rules: vec![rule],
        t_z,
        start: None,
        converged: None,
    };
    match system {
        SystemKind::Udd => Ok(SystemOutcome { pe: udd_pe(&prob)?, rules: vec![], t_z: None, start: None, converged: None }),
        SystemKind::Cdd if cfg.sensors == 1 => {
            let mode = match cfg.cdd_threshold {
                CddThreshold::ChannelBlind => ThresholdMode::ChannelBlind,
                CddThreshold::Searched => ThresholdMode::Searched,
            };
            let (rule, res) = cdd_one_sensor_pe(&prob.prior, &sensing, pt.sigma_c, mode)?;
            Ok(one(rule, res.pe, res.regime.t_z))
        }
        SystemKind::Cdd if cfg.cdd_threshold == CddThreshold::ChannelBlind => {
            let t = channel_blind_threshold(&prob.prior, &sensing);
            let rules = vec![SensorRule::antipodal(t, udd_energy(&sensing))?; cfg.sensors];
            let pe = evaluate_rules(&prob.prior, &prob.sensors, &prob.channel, &rules, cfg.solver.grid)?;
            Ok(SystemOutcome { pe, rules, t_z: None, start: None, converged: None })
        }
        SystemKind::Cdd | SystemKind::Qdd => {
            let res = if system == SystemKind::Cdd { optimize_cdd(&prob)? } else { optimize_qdd(&prob)? };
            let t_z = match res.rules.as_slice() {
                [r] => one_sensor_pe(r, &prob.prior, &sensing, pt.sigma_c)?.regime.t_z,
                _ => None,
            };
            Ok(SystemOutcome {
                pe: res.pe,
                rules: res.rules,
                t_z,
                start: Some(res.best_start_index),
                converged: Some(res.converged),
            })
        }
    }
}

/// Per-system outcomes at one point, in the order of `cfg.systems`.
fn solve_point(cfg: &ExperimentConfig, pt: Point) -> Vec<(SystemKind, Result<SystemOutcome, RunError>)> {
    cfg.systems.iter().map(|&s| (s, solve_system(cfg, pt, s))).collect()
}

fn point_at(cfg: &ExperimentConfig, axis: SweepAxis, v: f64, rho: f64) -> Point {
    match axis {
        SweepAxis::SigmaC => Point { sigma_s: cfg.sigma_s, sigma_c: v, rho },
        SweepAxis::SigmaS => Point { sigma_s: v, sigma_c: cfg.sigma_c, rho },
    }
}

/// Sweep columns: the swept value, each system's error and design, diagnostics.
pub fn sweep_header(axis: SweepAxis, sensors: usize) -> Vec<String> {
    let mut h = vec![axis.label().to_string(), "udd_pe".into(), "cdd_pe".into()];
    h.extend((1..=sensors).map(|k| format!("cdd_t{k}")));
    h.push("qdd_pe".into());
    for name in ["qdd_t", "qdd_m0_", "qdd_m1_"] {
        h.extend((1..=sensors).map(|k| format!("{name}{k}")));
    }
    if sensors == 1 {
        h.push("qdd_tz".into());
    }
    h.extend(["qdd_start".into(), "qdd_converged".into(), "status".into()]);
    h
}

fn sweep_row(
    sensors: usize,
    v: f64,
    results: &[(SystemKind, Result<SystemOutcome, RunError>)],
) -> (Vec<String>, bool) {
    let get = |k: SystemKind| results.iter().find(|(s, _)| *s == k).and_then(|(_, r)| r.as_ref().ok());
    let blanks = |row: &mut Vec<String>, n: usize| row.extend(std::iter::repeat_n(String::new(), n));
    let mut row = vec![fmt_sig(v), fmt_opt(get(SystemKind::Udd).map(|o| o.pe))];
    match get(SystemKind::Cdd) {
        Some(o) => {
            row.push(fmt_sig(o.pe));
            row.extend(o.rules.iter().map(|r| fmt_sig(r.t())));
        }
        None => blanks(&mut row, 1 + sensors),
    }
    let width = 1 + 3 * sensors + usize::from(sensors == 1) + 2;
    match get(SystemKind::Qdd) {
        Some(o) => {
            row.push(fmt_sig(o.pe));
            row.extend(o.rules.iter().map(|r| fmt_sig(r.t())));
            row.extend(o.rules.iter().map(|r| fmt_sig(r.m0())));
            row.extend(o.rules.iter().map(|r| fmt_sig(r.m1())));
            if sensors == 1 {
                row.push(fmt_opt(o.t_z));
            }
            row.push(o.start.map(|s| s.to_string()).unwrap_or_default());
            row.push(o.converged.map(|c| c.to_string()).unwrap_or_default());
        }
        None => blanks(&mut row, width),
    }
    let errors: Vec<String> = results
        .iter()
        .filter_map(|(s, r)| r.as_ref().err().map(|e| format!("{}: {e}", s.label())))
        .collect();
    let failed = !errors.is_empty();
    row.push(if failed { errors.join("; ") } else { "ok".into() });
    (row, failed)
}

fn default_sweep() -> SweepSpec {
    SweepSpec { axis: SweepAxis::SigmaC, start: 0.1, stop: 4.0, step: 0.1 }
}

fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, RunError> {
    let sweep = cfg.sweep.clone().unwrap_or_else(default_sweep);
    let values = sweep.values();
    let rhos = cfg.rho_values();
    let correlated = cfg.channel.model == crate::config::ChannelKind::Correlated;
    let mut total = RunSummary { kind: cfg.kind, outputs: vec![], rows: 0, failed: 0, text: String::new() };
    for rho in rhos {
        let path = if correlated { with_suffix(out, &format!("_rho{}", fmt_sig(rho))) } else { out.to_path_buf() };
        let results: Vec<_> = values.par_iter().map(|&v| solve_point(cfg, point_at(cfg, sweep.axis, v, rho))).collect();
        let mut table = Table::new(sweep_header(sweep.axis, cfg.sensors));
        let mut failed = 0;
        for (&v, res) in values.iter().zip(&results) {
            let (row, bad) = sweep_row(cfg.sensors, v, res);
            failed += bad as usize;
            table.rows.push(row);
        }
        let mut text = format!("sweep over {} ({} rows, {} failed)", sweep.axis.label(), values.len(), failed);
        if correlated {
            text.push_str(&format!(", rho = {}", fmt_sig(rho)));
        }
        text.push('\n');
        text.push_str(&sweep_summary(sweep.axis, &values, &results));
        let part = finish(cfg, &path, &table, text, failed)?;
        total.outputs.extend(part.outputs);
        total.rows += part.rows;
        total.failed += part.failed;
        total.text.push_str(&part.text);
    }
    Ok(total)
}

fn sweep_summary(axis: SweepAxis, values: &[f64], results: &[Vec<(SystemKind, Result<SystemOutcome, RunError>)>]) -> String {
    let series = |k: SystemKind| -> Vec<Option<f64>> {
        results
            .iter()
            .map(|r| r.iter().find(|(s, _)| *s == k).and_then(|(_, o)| o.as_ref().ok()).map(|o| o.pe))
            .collect()
    };
    let mut text = String::new();
    for k in [SystemKind::Udd, SystemKind::Cdd, SystemKind::Qdd] {
        let s = series(k);
        let best = values.iter().zip(&s).filter_map(|(&v, p)| p.map(|p| (v, p))).min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((v, p)) = best {
            text.push_str(&format!("{}: min pe {} at {} = {}\n", k.label(), fmt_sig(p), axis.label(), fmt_sig(v)));
        }
    }
    let (udd, cdd, qdd) = (series(SystemKind::Udd), series(SystemKind::Cdd), series(SystemKind::Qdd));
    let crossings = sign_changes(values, &cdd, &udd);
    if !crossings.is_empty() {
        let list: Vec<String> = crossings.iter().map(|&c| fmt_sig(c)).collect();
        text.push_str(&format!("cdd - udd changes sign near {} = {}\n", axis.label(), list.join(", ")));
    }
    let compared: Vec<bool> = (0..values.len())
        .filter_map(|i| {
            let q = qdd[i]?;
            let others: Vec<f64> = [udd[i], cdd[i]].into_iter().flatten().collect();
            (!others.is_empty()).then(|| q <= others.iter().copied().fold(f64::INFINITY, f64::min) + 1e-6)
        })
        .collect();
    if !compared.is_empty() {
        let n = compared.iter().filter(|&&b| b).count();
        text.push_str(&format!("qdd at or below the best other system on {n} of {} rows\n", compared.len()));
    }
    text
}

/// Linearly interpolated sign changes of `a - b` along `values`.
fn sign_changes(values: &[f64], a: &[Option<f64>], b: &[Option<f64>]) -> Vec<f64> {
    let d: Vec<Option<(f64, f64)>> = (0..values.len()).map(|i| Some((values[i], a[i]? - b[i]?))).collect();
    d.windows(2)
        .filter_map(|w| {
            let ((x0, d0), (x1, d1)) = (w[0]?, w[1]?);
            (d0 != 0.0 && d0.signum() != d1.signum()).then(|| x0 + (x1 - x0) * d0 / (d0 - d1))
        })
        .collect()
}

fn rule_header(prefix: &str, sensors: usize) -> Vec<String> {
    let mut h = Vec::new();
    for name in ["t", "m0_", "m1_"] {
        h.extend((1..=sensors).map(|k| format!("{prefix}{name}{k}")));
    }
    h
}

fn rule_cells(rules: &[SensorRule], sensors: usize) -> Vec<String> {
    if rules.is_empty() {
        return vec![String::new(); 3 * sensors];
    }
    let mut c: Vec<String> = rules.iter().map(|r| fmt_sig(r.t())).collect();
    c.extend(rules.iter().map(|r| fmt_sig(r.m0())));
    c.extend(rules.iter().map(|r| fmt_sig(r.m1())));
    c
}

fn single_point(cfg: &ExperimentConfig) -> Point {
    Point { sigma_s: cfg.sigma_s, sigma_c: cfg.sigma_c, rho: cfg.rho_values()[0] }
}

fn run_optimize(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, RunError> {
    let pt = single_point(cfg);
    let mut header: Vec<String> = vec!["system".into(), "pe".into()];
    header.extend(rule_header("", cfg.sensors));
    header.extend(["t_z".into(), "start".into(), "converged".into(), "status".into()]);
    let mut table = Table::new(header);
    let mut failed = 0;
    let mut text = format!(
        "optimize at sigma_s = {}, sigma_c = {}, rho = {}\n",
        fmt_sig(pt.sigma_s),
        fmt_sig(pt.sigma_c),
        fmt_sig(pt.rho)
    );
    for (k, res) in solve_point(cfg, pt) {
        let mut row = vec![k.label().to_string()];
        match res {
            Ok(o) => {
                text.push_str(&format!("{}: pe {}\n", k.label(), fmt_sig(o.pe)));
                row.push(fmt_sig(o.pe));
                row.extend(rule_cells(&o.rules, cfg.sensors));
                row.push(fmt_opt(o.t_z));
                row.push(o.start.map(|s| s.to_string()).unwrap_or_default());
                row.push(o.converged.map(|c| c.to_string()).unwrap_or_default());
                row.push("ok".into());
            }
            Err(e) => {
                failed += 1;
                text.push_str(&format!("{}: failed: {e}\n", k.label()));
                row.extend(std::iter::repeat_n(String::new(), 3 * cfg.sensors + 4));
                row.push(e.to_string());
            }
        }
        table.rows.push(row);
    }
    finish(cfg, out, &table, text, failed)
}

/// Rules used by `eval` for a system; UDD has none.
fn eval_rules(cfg: &ExperimentConfig, pt: Point, k: SystemKind) -> Result<Vec<SensorRule>, RunError> {
    let s = cfg.sensing(pt.sigma_s)?;
    let energy = udd_energy(&s);
    Ok(match k {
        SystemKind::Udd => vec![],
        SystemKind::Cdd => {
            let t = match cfg.cdd_threshold {
                CddThreshold::ChannelBlind => channel_blind_threshold(&cfg.prior(), &s),
                CddThreshold::Searched if cfg.sensors <= 2 => {
                    solve_system(cfg, pt, SystemKind::Cdd)?.rules.first().map(|r| r.t()).unwrap_or(0.0)
                }
                CddThreshold::Searched => channel_blind_threshold(&cfg.prior(), &s),
            };
            vec![SensorRule::antipodal(t, energy)?; cfg.sensors]
        }
        SystemKind::Qdd if cfg.rules.is_empty() => vec![SensorRule::antipodal(0.0, energy)?; cfg.sensors],
        SystemKind::Qdd => cfg.rules.iter().map(|r| SensorRule::new(r.t, r.m0, r.m1)).collect::<Result<_, _>>()?,
    })
}

fn eval_spec(cfg: &ExperimentConfig, pt: Point, rules: &[SensorRule]) -> Result<SystemSpec, RunError> {
    let s = cfg.sensing(pt.sigma_s)?;
    let sensors = if rules.is_empty() {
        vec![SensorSpec::udd(s); cfg.sensors]
    } else {
        rules.iter().map(|r| SensorSpec::quantized(s, *r)).collect()
    };
    Ok(SystemSpec::new(cfg.prior(), sensors, cfg.channel_model(pt.rho, pt.sigma_c)?)?)
}

fn run_eval(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, RunError> {
    let pt = single_point(cfg);
    let mut header: Vec<String> = vec!["system".into(), "pe".into(), "mc_pe".into(), "mc_stderr".into(), "mc_z".into()];
    header.extend(rule_header("", cfg.sensors));
    header.push("status".into());
    let mut table = Table::new(header);
    let mut failed = 0;
    let mut text = format!(
        "eval at sigma_s = {}, sigma_c = {}, rho = {}, {} trials\n",
        fmt_sig(pt.sigma_s),
        fmt_sig(pt.sigma_c),
        fmt_sig(pt.rho),
        cfg.trials
    );
    for (i, &k) in cfg.systems.iter().enumerate() {
        let rules = eval_rules(cfg, pt, k);
        let mut row = vec![k.label().to_string()];
        let outcome = rules.and_then(|rules| {
            let spec = eval_spec(cfg, pt, &rules)?;
            let pe = evaluate(&spec, cfg.solver.grid);
            let mc = if cfg.trials > 0 {
                Some(simulate_pe(&McConfig::new(spec, cfg.trials, cfg.seed.wrapping_add(i as u64))?)?)
            } else {
                None
            };
            Ok((rules, pe, mc))
        });
        match outcome {
            Ok((rules, pe, mc)) => {
                let pe_ok = pe.as_ref().ok().copied();
                let z = match (pe_ok, mc) {
                    (Some(p), Some(m)) if m.stderr > 0.0 => Some((m.pe_hat - p) / m.stderr),
                    _ => None,
                };
                row.extend([fmt_opt(pe_ok), fmt_opt(mc.map(|m| m.pe_hat)), fmt_opt(mc.map(|m| m.stderr)), fmt_opt(z)]);
                row.extend(rule_cells(&rules, cfg.sensors));
                match pe {
                    Ok(p) => {
                        text.push_str(&format!("{}: pe {}", k.label(), fmt_sig(p)));
                        if let Some(m) = mc {
                            text.push_str(&format!(", simulated {} +- {}", fmt_sig(m.pe_hat), fmt_sig(m.stderr)));
                        }
                        text.push('\n');
                        row.push("ok".into());
                    }
                    // No evaluator for this system; the simulation still stands.
                    Err(e) => {
                        text.push_str(&format!("{}: no evaluator: {e}\n", k.label()));
                        row.push(e.to_string());
                    }
                }
            }
            Err(e) => {
                failed += 1;
                text.push_str(&format!("{}: failed: {e}\n", k.label()));
                row.extend(std::iter::repeat_n(String::new(), 4 + 3 * cfg.sensors));
                row.push(e.to_string());
            }
        }
        table.rows.push(row);
    }
    finish(cfg, out, &table, text, failed)
}

pub const BOUNDARY_HEADER: [&str; 4] = ["regime", "sigma_s", "sigma_c_star", "status"];

fn status_label(s: CrossingStatus) -> &'static str {
    match s {
        CrossingStatus::Crossing => "crossing",
        CrossingStatus::NoCrossing => "no_crossing",
        CrossingStatus::Degenerate => "degenerate",
    }
}

fn run_boundary(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, RunError> {
    let grid = cfg.boundary.sigma_s.clone().unwrap_or_else(default_sigma_s_grid);
    let bracket = (cfg.boundary.bracket[0], cfg.boundary.bracket[1]);
    let curves: Vec<BoundaryCurve> = [BoundaryRegime::OneSensor, BoundaryRegime::Asymptotic]
        .into_iter()
        .map(|r| boundary_curve(r, &cfg.prior(), cfg.mu, &grid, bracket))
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(BOUNDARY_HEADER.iter().map(|s| s.to_string()).collect());
    let mut text = String::new();
    for c in &curves {
        for p in &c.points {
            table.rows.push(vec![
                c.regime.label().into(),
                fmt_sig(p.sigma_s),
                fmt_opt(p.sigma_c_star),
                status_label(p.status).into(),
            ]);
        }
        let cross: Vec<(f64, f64)> = c.crossings().collect();
        text.push_str(&format!("{}: {} of {} points cross", c.regime.label(), cross.len(), c.points.len()));
        if let Some(last) = cross.iter().map(|p| p.0).reduce(f64::max) {
            text.push_str(&format!(", largest crossing sigma_s = {}", fmt_sig(last)));
        }
        if let Some((ss, sc)) = cross.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)) {
            text.push_str(&format!(", minimum sigma_c* = {} at sigma_s = {}", fmt_sig(sc), fmt_sig(ss)));
        }
        text.push('\n');
    }
    finish(cfg, out, &table, text, 0)
}

fn run_chernoff(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, RunError> {
    let sweep = cfg.sweep.clone().unwrap_or_else(default_sweep);
    let values = sweep.values();
    let rows: Vec<Result<(f64, f64), RunError>> = values
        .par_iter()
        .map(|&v| {
            let pt = point_at(cfg, sweep.axis, v, 0.0);
            let s = SensingModel::new(cfg.mu, pt.sigma_s)?;
            Ok((chernoff_udd(&s, pt.sigma_c)?, chernoff_qdd(&s, pt.sigma_c)?))
        })
        .collect();
    let header = [sweep.axis.label(), "chernoff_udd", "chernoff_qdd", "better", "status"];
    let mut table = Table::new(header.iter().map(|s| s.to_string()).collect());
    let mut failed = 0;
    let mut qdd_better = 0;
    for (&v, r) in values.iter().zip(&rows) {
        table.rows.push(match r {
            Ok((u, q)) => {
                qdd_better += (q > u) as usize;
                let better = if q > u { "qdd" } else { "udd" };
                vec![fmt_sig(v), fmt_sig(*u), fmt_sig(*q), better.into(), "ok".into()]
            }
            Err(e) => {
                failed += 1;
                vec![fmt_sig(v), String::new(), String::new(), String::new(), e.to_string()]
            }
        });
    }
    let text = format!(
        "chernoff information over {} ({} rows, {} failed): qdd larger on {} rows\n",
        sweep.axis.label(),
        values.len(),
        failed,
        qdd_better
    );
    finish(cfg, out, &table, text, failed)
}

pub const VALIDATE_HEADER: [&str; 6] = ["module", "check", "value", "reference", "tolerance", "pass"];

fn run_validate(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, RunError> {
    let checks = run_checks(cfg.seed);
    let mut table = Table::new(VALIDATE_HEADER.iter().map(|s| s.to_string()).collect());
    let mut text = String::new();
    let mut modules: Vec<&str> = checks.iter().map(|c| c.module).collect();
    modules.dedup();
    for m in modules {
        let (n, ok) = checks.iter().filter(|c| c.module == m).fold((0, 0), |(n, ok), c| (n + 1, ok + c.pass as usize));
        text.push_str(&format!("{m}: {ok} of {n} passed\n"));
    }
    for c in &checks {
        if !c.pass {
            text.push_str(&format!("FAILED {} / {}: {} vs {} (tol {})\n", c.module, c.name, c.value, c.reference, c.tol));
        }
        table.rows.push(vec![
            c.module.into(),
            c.name.clone(),
            fmt_sig(c.value),
            fmt_sig(c.reference),
            fmt_sig(c.tol),
            c.pass.to_string(),
        ]);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    text.push_str(&format!("total: {} of {} passed\n", checks.len() - failed, checks.len()));
    finish(cfg, out, &table, text, failed)
}
