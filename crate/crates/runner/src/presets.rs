//! Named parameter sets for the figure reproductions.

use qdd_core::optimizer::SystemKind;

use crate::config::{
    CddThreshold, ChannelConfig, ChannelKind, ExperimentConfig, ExperimentKind, SweepAxis, SweepSpec,
};
use crate::RunError;

pub const NAMES: [&str; 6] = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];

fn sigma_c_sweep(start: f64, stop: f64, step: f64) -> Option<SweepSpec> {
    Some(SweepSpec { axis: SweepAxis::SigmaC, start, stop, step })
}

pub fn preset(name: &str) -> Result<ExperimentConfig, RunError> {
    let base = ExperimentConfig::default();
    let all = vec![SystemKind::Udd, SystemKind::Cdd, SystemKind::Qdd];
    let cfg = match name {
        // One sensor, unequal priors, channel-blind CDD.
        "fig3" | "fig4" => ExperimentConfig {
            kind: ExperimentKind::Sweep,
            systems: if name == "fig3" { all } else { vec![SystemKind::Qdd] },
            pi1: 0.7,
            mu: 1.0,
            sigma_s: 1.5,
            sensors: 1,
            sweep: sigma_c_sweep(0.2, 4.0, 0.1),
            cdd_threshold: CddThreshold::ChannelBlind,
            ..base
        },
        // Two i.i.d. sensors over independent channels.
        "fig5" | "fig6" => ExperimentConfig {
            kind: ExperimentKind::Sweep,
            systems: if name == "fig5" { all } else { vec![SystemKind::Cdd, SystemKind::Qdd] },
            pi1: 0.75,
            mu: 1.0,
            sigma_s: 1.2,
            sensors: 2,
            sweep: sigma_c_sweep(0.1, 4.0, 0.1),
            cdd_threshold: CddThreshold::Searched,
            ..base
        },
        "fig7" => ExperimentConfig {
            kind: ExperimentKind::Sweep,
            systems: all,
            pi1: 0.5,
            mu: 1.0,
            sigma_s: 1.5,
            sensors: 2,
            channel: ChannelConfig { model: ChannelKind::Correlated, rho: vec![0.0, 0.5, 0.9] },
            sweep: sigma_c_sweep(0.2, 3.0, 0.2),
            cdd_threshold: CddThreshold::Searched,
            ..base
        },
        "fig8" => ExperimentConfig { kind: ExperimentKind::Boundary, pi1: 0.5, mu: 1.0, ..base },
        other => {
            return Err(RunError::Config(format!("unknown preset `{other}`; expected one of {}", NAMES.join(", "))))
        }
    };
    Ok(cfg)
}
