use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::integrators::EndPoint;
use crate::linear::{convergence_map, energy_map, stability_map, MapMethod, MapPoint, MapSettings};

use super::config::{ExperimentConfig, ExperimentKind, MethodKind};
use super::output::{fmt_f64, output_path, Table};

pub const MAP_HEADER: [&str; 7] = [
    "eps_omegaE_dt",
    "omegaB_dt",
    "value",
    "physical_stable",
    "numerical_stable",
    "status",
    "iterations",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MapOutcome {
    pub kind: ExperimentKind,
    pub method: Option<MapMethod>,
    pub points: Vec<MapPoint>,
}

impl MapOutcome {
    pub fn numerically_stable(&self) -> usize {
        self.points.iter().filter(|p| p.numerical_stable).count()
    }

    /// Numerically unstable points where the exact dynamics are stable.
    pub fn unstable_outside_mask(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.physical_stable && !p.numerical_stable)
            .count()
    }

    pub fn failed(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.status == crate::linear::PointStatus::Failed)
            .count()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&MAP_HEADER);
        for p in &self.points {
            t.push(vec![
                fmt_f64(p.eps_omega_e_dt),
                fmt_f64(p.omega_b_dt),
                fmt_f64(p.value),
                p.physical_stable.to_string(),
                p.numerical_stable.to_string(),
                p.status.as_str().to_string(),
                p.iterations.to_string(),
            ]);
        }
        t
    }

    pub fn files(&self, cfg: &ExperimentConfig) -> Vec<(PathBuf, Table)> {
        let method = match self.method {
            None => "sdc-iteration".to_string(),
            Some(MapMethod::ClassicalBoris) => "boris".into(),
            Some(MapMethod::Collocation) => "collocation".into(),
            Some(MapMethod::BorisSdc { tol, .. }) => format!("boris-sdc_tol{tol:e}"),
            Some(MapMethod::FixedSweeps(k)) => format!("boris-sdc_K{k}"),
        };
        let mut parts = vec![method];
        if !matches!(self.method, Some(MapMethod::ClassicalBoris)) {
            parts.insert(0, format!("M{}", cfg.m));
        }
        vec![(
            output_path(&cfg.output, self.kind.name(), &parts, cfg.seed),
            self.table(),
        )]
    }
}

/// Map method for the configured integration method.
pub fn map_method(cfg: &ExperimentConfig) -> Result<MapMethod> {
    match cfg.method {
        MethodKind::Boris | MethodKind::Verlet => Ok(MapMethod::ClassicalBoris),
        MethodKind::Collocation => Ok(MapMethod::Collocation),
        MethodKind::BorisSdc => Ok(match cfg.map.sweeps {
            Some(k) => MapMethod::FixedSweeps(k),
            None => MapMethod::BorisSdc {
                tol: cfg.map.tol,
                k_max: cfg.map.k_max,
            },
        }),
        MethodKind::Picard => Err(Error::param(
            "method",
            "maps are available for boris, verlet, boris-sdc and collocation",
        )),
    }
}

/// Stability, convergence or energy map over the configured grid.
pub fn experiment_maps(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<MapOutcome> {
    cfg.validate()?;
    let settings = MapSettings {
        family: cfg.nodes,
        m: cfg.m,
        end_point: EndPoint::default_for(cfg.nodes),
        exec: cfg.execution(),
    };
    let grid = &cfg.map.grid;
    match kind {
        ExperimentKind::MapStability => {
            let method = map_method(cfg)?;
            Ok(MapOutcome {
                kind,
                method: Some(method),
                points: stability_map(grid, method, &settings)?,
            })
        }
        ExperimentKind::MapConvergence => Ok(MapOutcome {
            kind,
            method: None,
            points: convergence_map(grid, &settings)?,
        }),
        ExperimentKind::MapEnergy => {
            let method = map_method(cfg)?;
            Ok(MapOutcome {
                kind,
                method: Some(method),
                points: energy_map(grid, method, &settings)?,
            })
        }
        _ => Err(Error::param(
            "kind",
            format!("`{}` is not a map", kind.name()),
        )),
    }
}
