//! Experiment configuration: a JSON document with every field optional,
//! overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qdd_core::multi_sensor::{ChannelModel, CorrelatedChannel};
use qdd_core::optimizer::{SolverSettings, SystemKind};
use qdd_core::sensor::{Prior, SensingModel};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Eval,
    Optimize,
    Sweep,
    Boundary,
    Chernoff,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SigmaC,
    SigmaS,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::SigmaC => "sigma_c",
            SweepAxis::SigmaS => "sigma_s",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepSpec {
    /// Sweep values from `start` to `stop` inclusive.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Independent,
    Correlated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub model: ChannelKind,
    /// Correlation coefficients; a correlated run emits one CSV per value.
    pub rho: Vec<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { model: ChannelKind::Independent, rho: vec![0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CddThreshold {
    ChannelBlind,
    Searched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub t: f64,
    pub m0: f64,
    pub m1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub starts: usize,
    pub max_evals: usize,
    pub grid: usize,
    pub search_grid: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverSettings::default();
        Self { starts: d.starts, max_evals: d.max_evals, grid: d.grid_points, search_grid: d.search_grid_points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    /// Explicit `sigma_s` values; `null` selects 0.05 to 3 in steps of 0.05.
    pub sigma_s: Option<Vec<f64>>,
    pub bracket: [f64; 2],
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        let (lo, hi) = qdd_core::asymptotics::DEFAULT_BRACKET;
        Self { sigma_s: None, bracket: [lo, hi] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub systems: Vec<SystemKind>,
    pub pi1: f64,
    pub mu: f64,
    pub sigma_s: f64,
    /// Channel noise when `sigma_c` is not the swept axis.
    pub sigma_c: f64,
    pub sensors: usize,
    pub channel: ChannelConfig,
    pub sweep: Option<SweepSpec>,
    pub cdd_threshold: CddThreshold,
    pub tie_rules: bool,
    /// QDD rules for `eval`, one per sensor; defaults to the symmetric rule.
    pub rules: Vec<RuleConfig>,
    pub solver: SolverConfig,
    pub boundary: BoundaryConfig,
    pub seed: u64,
    /// Monte Carlo trials for `eval` and `validate`; 0 disables simulation.
    pub trials: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Sweep,
            systems: vec![SystemKind::Udd, SystemKind::Cdd, SystemKind::Qdd],
            pi1: 0.5,
            mu: 1.0,
            sigma_s: 1.0,
            sigma_c: 1.0,
            sensors: 1,
            channel: ChannelConfig::default(),
            sweep: None,
            cdd_threshold: CddThreshold::Searched,
            tie_rules: false,
            rules: Vec::new(),
            solver: SolverConfig::default(),
            boundary: BoundaryConfig::default(),
            seed: 0,
            trials: 100_000,
            out: None,
        }
    }
}

/// Command-line overrides applied on top of a file or preset.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub starts: Option<usize>,
    pub max_evals: Option<usize>,
    pub trials: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            RunError::Config(msg) => RunError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(k) = o.kind {
            self.kind = k;
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(g) = o.grid {
            self.solver.grid = g;
            self.solver.search_grid = self.solver.search_grid.min(g);
        }
        if let Some(s) = o.starts {
            self.solver.starts = s;
        }
        if let Some(m) = o.max_evals {
            self.solver.max_evals = m;
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |field: &str, why: String| Err(RunError::Config(format!("field `{field}`: {why}")));
        if !(self.pi1 > 0.0 && self.pi1 < 1.0) {
            return bad("pi1", format!("must lie in (0, 1), got {}", self.pi1));
        }
        if !(self.mu > 0.0) {
            return bad("mu", format!("must be positive, got {}", self.mu));
        }
        if !(self.sigma_s > 0.0) {
            return bad("sigma_s", format!("must be positive, got {}", self.sigma_s));
        }
        if !(self.sigma_c > 0.0) {
            return bad("sigma_c", format!("must be positive, got {}", self.sigma_c));
        }
        if self.sensors == 0 {
            return bad("sensors", "must be at least 1".into());
        }
        if matches!(self.kind, ExperimentKind::Optimize | ExperimentKind::Sweep) && self.sensors > 2 {
            return bad("sensors", "optimization covers one or two sensors".into());
        }
        if self.channel.model == ChannelKind::Correlated {
            if self.sensors != 2 {
                return bad("channel.model", "correlated channels need exactly two sensors".into());
            }
            if self.channel.rho.is_empty() || self.channel.rho.iter().any(|r| !(r.abs() < 1.0)) {
                return bad("channel.rho", "need at least one value in (-1, 1)".into());
            }
        }
        if let Some(s) = &self.sweep {
            if !(s.step > 0.0) || !(s.stop >= s.start) || !(s.start > 0.0) {
                return bad("sweep", format!("need 0 < start <= stop and step > 0, got {s:?}"));
            }
        }
        if self.systems.is_empty() {
            return bad("systems", "need at least one of udd, cdd, qdd".into());
        }
        if self.solver.starts == 0 || self.solver.max_evals < 10 || self.solver.grid < 3 || self.solver.search_grid < 3 {
            return bad("solver", "starts >= 1, max_evals >= 10, grid and search_grid >= 3".into());
        }
        if !self.rules.is_empty() && self.rules.len() != self.sensors {
            return bad("rules", format!("need one rule per sensor ({}), got {}", self.sensors, self.rules.len()));
        }
        let [lo, hi] = self.boundary.bracket;
        if !(lo > 0.0 && hi > lo) {
            return bad("boundary.bracket", format!("need 0 < lo < hi, got [{lo}, {hi}]"));
        }
        Ok(())
    }

    pub fn prior(&self) -> Prior {
        Prior::new(self.pi1).expect("validated")
    }

    pub fn sensing(&self, sigma_s: f64) -> Result<SensingModel, RunError> {
        Ok(SensingModel::new(self.mu, sigma_s)?)
    }

    pub fn channel_model(&self, rho: f64, sigma_c: f64) -> Result<ChannelModel, RunError> {
        Ok(match self.channel.model {
            ChannelKind::Independent => ChannelModel::iid(sigma_c, self.sensors),
            ChannelKind::Correlated => ChannelModel::CorrelatedBivariate(CorrelatedChannel::new(rho, sigma_c, sigma_c)?),
        })
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            starts: self.solver.starts,
            max_evals: self.solver.max_evals,
            grid_points: self.solver.grid,
            search_grid_points: self.solver.search_grid,
            seed: self.seed,
            ..SolverSettings::default()
        }
    }

    /// `rho` values to run; independent channels run once.
    pub fn rho_values(&self) -> Vec<f64> {
        match self.channel.model {
            ChannelKind::Independent => vec![0.0],
            ChannelKind::Correlated => self.channel.rho.clone(),
        }
    }

    pub fn has(&self, s: SystemKind) -> bool {
        self.systems.contains(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_field_names_the_field() {
        let err = ExperimentConfig::from_json("{\n  \"pi1\": 0.5,\n  \"sigmas\": 1.0\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sigmas") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = ExperimentConfig { pi1: 1.5, ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("pi1"));
        let cfg = ExperimentConfig {
            sweep: Some(SweepSpec { axis: SweepAxis::SigmaC, start: 1.0, stop: 2.0, step: 0.0 }),
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("sweep"));
    }

    #[test]
    fn sweep_values_include_stop() {
        let s = SweepSpec { axis: SweepAxis::SigmaC, start: 0.2, stop: 4.0, step: 0.1 };
        let v = s.values();
        assert_eq!(v.len(), 39);
        assert!((v[38] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides { grid: Some(101), starts: Some(3), seed: Some(9), ..Default::default() });
        assert_eq!((cfg.solver.grid, cfg.solver.search_grid, cfg.solver.starts, cfg.seed), (101, 101, 3, 9));
    }
}
