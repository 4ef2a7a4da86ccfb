use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fields::PenningParams;
use crate::integrators::{ParticleState, Precision};
use crate::linear::MapGrid;
use crate::quadrature::NodeFamily;
use crate::Vec3;

/// The experiments the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Converge,
    Residual,
    WorkPrecision,
    Energy,
    Cloud,
    MapStability,
    MapConvergence,
    MapEnergy,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::Converge,
        Self::Residual,
        Self::WorkPrecision,
        Self::Energy,
        Self::Cloud,
        Self::MapStability,
        Self::MapConvergence,
        Self::MapEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Converge => "converge",
            Self::Residual => "residual",
            Self::WorkPrecision => "work-precision",
            Self::Energy => "energy",
            Self::Cloud => "cloud",
            Self::MapStability => "map-stability",
            Self::MapConvergence => "map-convergence",
            Self::MapEnergy => "map-energy",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param("kind", format!("unknown experiment `{s}`")))
    }
}

/// Integration method selected on the command line or in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Boris,
    Verlet,
    #[default]
    BorisSdc,
    Picard,
    Collocation,
}

impl FromStr for MethodKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "boris" => Ok(Self::Boris),
            "verlet" | "velocity-verlet" => Ok(Self::Verlet),
            "boris-sdc" | "sdc" => Ok(Self::BorisSdc),
            "picard" => Ok(Self::Picard),
            "collocation" => Ok(Self::Collocation),
            _ => Err(Error::param("method", format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub x: [f64; 3],
    pub v: [f64; 3],
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            x: [10.0, 0.0, 0.0],
            v: [100.0, 0.0, 100.0],
        }
    }
}

impl InitialState {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.x)
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::from(self.v)
    }

    pub fn state(&self) -> ParticleState {
        ParticleState::single(self.position(), self.velocity())
    }
}

/// Long single-particle energy runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub steps: usize,
    pub dt: f64,
    /// Rows written to the CSV every `stride` steps; the drift test always sees every step.
    pub stride: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            steps: 1_000_000,
            dt: 1.0 / 64.0,
            stride: 1000,
        }
    }
}

/// Particle cloud with softened Coulomb interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    pub particles: usize,
    pub lambda: f64,
    pub charge: f64,
    pub mass: f64,
    /// Radius of the ball from which position distortions are drawn.
    pub x_shift: f64,
    pub v_shift: f64,
    /// Reference step is the finest ladder step divided by this factor.
    pub reference_refinement: usize,
    pub reference_tol: f64,
    pub relax_steps: usize,
    pub energy_steps: usize,
    pub energy_dt: f64,
    pub energy_stride: usize,
    /// Sweeps of the Boris-SDC run compared with classical Boris in the energy study.
    pub energy_iterations: usize,
    /// Relative deviation of the energy ratio that marks the onset of drift.
    pub onset_threshold: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            particles: 20,
            lambda: 0.01,
            charge: 1.0,
            mass: 1.0,
            x_shift: 1e-3,
            v_shift: 5.0,
            reference_refinement: 100,
            reference_tol: 1e-12,
            relax_steps: 2560,
            energy_steps: 200_000,
            energy_dt: 1.0 / 64.0,
            energy_stride: 100,
            energy_iterations: 2,
            onset_threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub grid: MapGrid,
    pub tol: f64,
    pub k_max: usize,
    /// Fixed sweep count instead of the residual tolerance.
    pub sweeps: Option<usize>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            grid: MapGrid::default(),
            tol: 1e-12,
            k_max: 100,
            sweeps: None,
        }
    }
}

/// Everything an experiment needs. Defaults reproduce the single-particle setup of the
/// reference study; [`ExperimentConfig::preset`] adjusts them per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    pub output: PathBuf,
    pub precision: Precision,
    pub parallel: bool,
    pub trap: PenningParams,
    pub initial: InitialState,
    pub t_end: f64,
    /// Step counts of the time-step ladder.
    pub steps: Vec<usize>,
    pub nodes: NodeFamily,
    pub m: usize,
    pub method: MethodKind,
    pub iterations: Vec<usize>,
    pub tolerances: Vec<f64>,
    pub k_max: usize,
    /// Error targets of the work-precision comparison.
    pub targets: Vec<f64>,
    pub energy: EnergyConfig,
    pub cloud: CloudConfig,
    pub map: MapConfig,
    /// Use the full-length runs of the original study.
    pub paper_scale: bool,
}

/// Step counts 2^lo ..= 2^hi.
pub fn power_ladder(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|e| 1usize << e).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 2018,
            output: PathBuf::from("results"),
            precision: Precision::Standard,
            parallel: true,
            trap: PenningParams::default(),
            initial: InitialState::default(),
            t_end: 16.0,
            steps: power_ladder(5, 10),
            nodes: NodeFamily::GaussLobatto,
            m: 3,
            method: MethodKind::BorisSdc,
            iterations: vec![1, 2, 3, 4],
            tolerances: vec![1e-2, 1e-6, 1e-10],
            k_max: 50,
            targets: vec![1e-2, 1e-10],
            energy: EnergyConfig::default(),
            cloud: CloudConfig::default(),
            map: MapConfig::default(),
            paper_scale: false,
        }
    }
}

pub const PAPER_SCALE_WARNING: &str =
    "paper-scale preset: 16777216 steps per energy run and a 100-particle cloud; expect hours of runtime";

impl ExperimentConfig {
    /// Desk-scale defaults for one experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind: Some(kind),
            ..Self::default()
        };
        match kind {
            ExperimentKind::Converge => {}
            ExperimentKind::Residual => {
                cfg.m = 5;
                cfg.steps = power_ladder(5, 13);
            }
            ExperimentKind::WorkPrecision => {
                cfg.m = 5;
                cfg.iterations = vec![1, 2, 4];
                cfg.steps = power_ladder(5, 14);
            }
            ExperimentKind::Energy => {
                cfg.iterations = vec![4, 8];
                cfg.precision = Precision::CompensatedSummation;
            }
            ExperimentKind::Cloud => {
                cfg.iterations = vec![1, 2];
            }
            ExperimentKind::MapStability
            | ExperimentKind::MapConvergence
            | ExperimentKind::MapEnergy => {}
        }
        cfg
    }

    /// Switches to the run lengths of the original study.
    pub fn apply_paper_scale(&mut self) {
        self.paper_scale = true;
        self.energy.steps = 16_777_216;
        self.energy.dt = 262_144.0 / 16_777_216.0;
        self.cloud.particles = 100;
        self.cloud.energy_steps = 16_777_216;
        self.cloud.energy_dt = self.energy.dt;
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file; keys left out keep the preset's values.
    pub fn load(path: &Path, base: &Self) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut value: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let base_value = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        merge_tables(&mut value, base_value);
        let cfg: Self = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if cfg.paper_scale && !base.paper_scale {
            let mut cfg = cfg;
            cfg.apply_paper_scale();
            return Ok(cfg);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", "final time must be positive"));
        }
        if self.steps.is_empty() || self.steps.contains(&0) {
            return Err(Error::param("steps", "ladder needs positive step counts"));
        }
        if self.m < self.nodes.min_nodes() {
            return Err(Error::param(
                "M",
                format!("needs at least {} nodes", self.nodes.min_nodes()),
            ));
        }
        if self.iterations.is_empty() || self.iterations.contains(&0) {
            return Err(Error::param(
                "iterations",
                "sweep counts must be at least 1",
            ));
        }
        if self.tolerances.iter().any(|t| !(*t > 0.0 && t.is_finite()))
            || self.tolerances.is_empty()
        {
            return Err(Error::param(
                "tol",
                "tolerances must be positive and finite",
            ));
        }
        if self.k_max == 0 {
            return Err(Error::param("k_max", "K_max must be at least 1"));
        }
        if !(self.energy.dt > 0.0) || self.energy.steps == 0 {
            return Err(Error::param("dt", "energy run needs positive dt and steps"));
        }
        let c = &self.cloud;
        if c.particles == 0 {
            return Err(Error::param(
                "particles",
                "cloud needs at least one particle",
            ));
        }
        if c.particles > 1 && !(c.lambda > 0.0) {
            return Err(Error::param(
                "lambda",
                "softening length must be > 0 for N > 1",
            ));
        }
        if !(c.x_shift >= 0.0 && c.v_shift >= 0.0) {
            return Err(Error::param(
                "shift",
                "distortion radii must be non-negative",
            ));
        }
        if c.relax_steps >= c.energy_steps {
            return Err(Error::param(
                "relax_steps",
                "relaxation must be shorter than the energy run",
            ));
        }
        if c.reference_refinement == 0 {
            return Err(Error::param("reference_refinement", "must be at least 1"));
        }
        self.map.grid.validate()?;
        Ok(())
    }
}

fn merge_tables(over: &mut toml::Table, base: toml::Table) {
    for (k, v) in base {
        match (over.get_mut(&k), v) {
            (Some(toml::Value::Table(o)), toml::Value::Table(b)) => merge_tables(o, b),
            (Some(_), _) => {}
            (None, v) => {
                over.insert(k, v);
            }
        }
    }
}
