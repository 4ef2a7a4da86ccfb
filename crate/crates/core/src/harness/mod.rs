//! Experiment drivers at desk scale, plus CSV persistence of their results.

pub mod analysis;
pub mod cloud;
pub mod config;
pub mod maps;
pub mod output;
pub mod scheme;
pub mod single;

use std::path::PathBuf;

use crate::error::{Error, Result};

pub use analysis::{drift_test, fit_order, DriftReport, OrderFit};
pub use cloud::{experiment_cloud, CloudOutcome};
pub use config::{power_ladder, ExperimentConfig, ExperimentKind, MethodKind, PAPER_SCALE_WARNING};
pub use maps::{experiment_maps, MapOutcome};
pub use output::{RunRecord, Table};
pub use scheme::Scheme;
pub use single::{
    experiment_convergence, experiment_energy, experiment_residual_control,
    experiment_work_precision, ConvergenceOutcome, EnergyOutcome, ResidualOutcome,
    WorkPrecisionOutcome,
};

/// Result of any experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Convergence(ConvergenceOutcome),
    Residual(ResidualOutcome),
    WorkPrecision(WorkPrecisionOutcome),
    Energy(EnergyOutcome),
    Cloud(CloudOutcome),
    Map(MapOutcome),
}

pub fn run_experiment(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<Outcome> {
    Ok(match kind {
        ExperimentKind::Converge => Outcome::Convergence(experiment_convergence(cfg)?),
        ExperimentKind::Residual => Outcome::Residual(experiment_residual_control(cfg)?),
        ExperimentKind::WorkPrecision => Outcome::WorkPrecision(experiment_work_precision(cfg)?),
        ExperimentKind::Energy => Outcome::Energy(experiment_energy(cfg)?),
        ExperimentKind::Cloud => Outcome::Cloud(experiment_cloud(cfg)?),
        ExperimentKind::MapStability
        | ExperimentKind::MapConvergence
        | ExperimentKind::MapEnergy => Outcome::Map(experiment_maps(cfg, kind)?),
    })
}

impl Outcome {
    pub fn files(&self, cfg: &ExperimentConfig) -> Vec<(PathBuf, Table)> {
        match self {
            Outcome::Convergence(o) => o.files(cfg),
            Outcome::Residual(o) => o.files(cfg),
            Outcome::WorkPrecision(o) => o.files(cfg),
            Outcome::Energy(o) => o.files(cfg),
            Outcome::Cloud(o) => o.files(cfg),
            Outcome::Map(o) => o.files(cfg),
        }
    }

    /// Writes every table, then reports a divergence that ended a long run early.
    pub fn write(&self, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        for (path, table) in self.files(cfg) {
            table.write_csv(&path)?;
            paths.push(path);
        }
        let diverged = match self {
            Outcome::Energy(o) => o.divergence(),
            Outcome::Cloud(o) => o.divergence(),
            _ => None,
        };
        match diverged {
            Some(step) => Err(Error::Divergence { step }),
            None => Ok(paths),
        }
    }

    /// One-line summary with the key metric.
    pub fn summary(&self) -> String {
        let order =
            |f: Option<OrderFit>| f.map_or("n/a".to_string(), |f| format!("{:.3}", f.order));
        match self {
            Outcome::Convergence(o) => {
                let parts: Vec<String> = o
                    .fits
                    .iter()
                    .map(|(l, f)| format!("{l} {}", order(*f)))
                    .collect();
                format!("converge: fitted order {}", parts.join(", "))
            }
            Outcome::Residual(o) => {
                let parts: Vec<String> = o
                    .saturation
                    .iter()
                    .map(|s| {
                        format!(
                            "tol {:e} -> {}",
                            s.tol,
                            s.error.map_or("n/a".into(), |e| format!("{e:.3e}"))
                        )
                    })
                    .collect();
                format!("residual: saturated error {}", parts.join(", "))
            }
            Outcome::WorkPrecision(o) => {
                let parts: Vec<String> = o
                    .crossovers
                    .iter()
                    .map(|c| {
                        format!(
                            "{:e} -> {}",
                            c.target,
                            c.cheapest.as_deref().unwrap_or("none")
                        )
                    })
                    .collect();
                format!("work-precision: cheapest at target {}", parts.join(", "))
            }
            Outcome::Energy(o) => {
                let parts: Vec<String> = o
                    .runs
                    .iter()
                    .map(|r| {
                        format!(
                            "{} max {:.3e} slope {:.3e}",
                            r.label, r.drift.max_error, r.drift.slope
                        )
                    })
                    .collect();
                format!("energy: {}", parts.join(", "))
            }
            Outcome::Cloud(o) => {
                let fits: Vec<String> = o
                    .fits
                    .iter()
                    .map(|(l, f)| format!("{l} {}", order(*f)))
                    .collect();
                let onsets: Vec<String> = o
                    .energy
                    .iter()
                    .map(|r| {
                        format!(
                            "{} {}",
                            r.label,
                            r.onset.map_or("none".into(), |s| s.to_string())
                        )
                    })
                    .collect();
                format!(
                    "cloud: centre-of-mass order {}; drift onset {}; initial hash {}",
                    fits.join(", "),
                    onsets.join(", "),
                    &o.initial_hash[..16]
                )
            }
            Outcome::Map(o) => format!(
                "{}: {} points, {} numerically stable, {} unstable where the trap is stable",
                o.kind.name(),
                o.points.len(),
                o.numerically_stable(),
                o.unstable_outside_mask()
            ),
        }
    }
}
