//! Time stepping: classical Boris, Boris-SDC, Picard iteration and trajectory runs.

mod sweep;

use serde::{Deserialize, Serialize};

use crate::boris::boris_velocity_update;
use crate::error::{Error, Result};
use crate::fields::ForceModel;
use crate::quadrature::{NodeFamily, QuadratureRule};
use crate::summation::CompensatedVec3;
use crate::Vec3;

pub use sweep::{NodeValues, SweepWorkspace};

/// Positions and velocities of all particles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
}

impl ParticleState {
    pub fn new(x: Vec<Vec3>, v: Vec<Vec3>) -> Self {
        assert_eq!(x.len(), v.len(), "position/velocity length mismatch");
        Self { x, v }
    }

    pub fn single(x: Vec3, v: Vec3) -> Self {
        Self {
            x: vec![x],
            v: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.v)
            .all(|p| p.iter().all(|c| c.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationMode {
    FixedIterations(usize),
    ResidualTolerance { tol: f64, k_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    #[default]
    #[serde(alias = "std")]
    Standard,
    #[serde(alias = "compensated")]
    CompensatedSummation,
}

impl std::str::FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "std" | "double" => Ok(Self::Standard),
            "compensated" | "compensated-summation" | "kahan" => Ok(Self::CompensatedSummation),
            _ => Err(Error::param(
                "precision",
                format!("unknown precision '{s}'"),
            )),
        }
    }
}

/// Where the step result is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndPoint {
    /// Node `M`; requires a node family containing the right endpoint.
    LastNode,
    /// Quadrature over the whole step from the final iterate's forces.
    Collocation,
}

impl EndPoint {
    pub fn default_for(family: NodeFamily) -> Self {
        match family {
            NodeFamily::GaussLobatto => Self::LastNode,
            NodeFamily::GaussLegendre => Self::Collocation,
        }
    }
}

/// The iteration applied on every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sweeper {
    BorisSdc,
    Picard,
}

#[derive(Debug, Clone)]
pub struct StepConfig {
    pub rule: QuadratureRule,
    pub mode: IterationMode,
    pub precision: Precision,
    pub end_point: EndPoint,
    pub sweeper: Sweeper,
    /// Spend M+1 force evaluations on the initial copy instead of one.
    pub per_node_init: bool,
}

impl StepConfig {
    pub fn new(rule: QuadratureRule, mode: IterationMode) -> Result<Self> {
        let end_point = EndPoint::default_for(rule.family);
        let cfg = Self {
            rule,
            mode,
            precision: Precision::Standard,
            end_point,
            sweeper: Sweeper::BorisSdc,
            per_node_init: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_end_point(mut self, end_point: EndPoint) -> Result<Self> {
        self.end_point = end_point;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sweeper(mut self, sweeper: Sweeper) -> Self {
        self.sweeper = sweeper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            IterationMode::FixedIterations(0) => {
                return Err(Error::param("iterations", "K must be at least 1"));
            }
            IterationMode::ResidualTolerance { tol, k_max } => {
                if !(tol > 0.0 && tol.is_finite()) {
                    return Err(Error::param("tol", "tolerance must be positive and finite"));
                }
                if k_max == 0 {
                    return Err(Error::param("k_max", "K_max must be at least 1"));
                }
            }
            _ => {}
        }
        if self.end_point == EndPoint::LastNode && self.rule.family != NodeFamily::GaussLobatto {
            return Err(Error::param(
                "end_point",
                "last-node result needs Gauss-Lobatto nodes",
            ));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.rule.dt()
    }
}

/// Outcome of one SDC/Picard step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub residual: f64,
    pub kmax_exhausted: bool,
}

/// One classical Boris (velocity-Verlet) step; `e`/`b` are the fields at `x` on entry and
/// at the new position on exit, so each step costs one field evaluation.
pub fn classical_boris_step_cached<F: ForceModel + ?Sized>(
    state: &mut ParticleState,
    e: &mut Vec<Vec3>,
    b: &mut Vec<Vec3>,
    dt: f64,
    model: &F,
) {
    let alpha = model.alpha();
    let n = state.len();
    let x_new: Vec<Vec3> = (0..n)
        .map(|i| {
            let f = alpha * (e[i] + state.v[i].cross(&b[i]));
            state.x[i] + dt * (state.v[i] + 0.5 * dt * f)
        })
        .collect();
    let mut e_new = vec![Vec3::zeros(); n];
    model.electric_field(&x_new, &mut e_new);
    let b_new: Vec<Vec3> = if model.uniform_magnetic_field() {
        b.clone()
    } else {
        x_new.iter().map(|p| model.magnetic_field(p)).collect()
    };
    for i in 0..n {
        let e_mid = 0.5 * (e[i] + e_new[i]);
        state.v[i] = boris_velocity_update(
            &state.v[i],
            dt,
            alpha,
            &e_mid,
            &b[i],
            &b_new[i],
            &Vec3::zeros(),
        );
    }
    state.x = x_new;
    *e = e_new;
    *b = b_new;
}

/// Fields at the current positions.
pub fn evaluate_fields<F: ForceModel + ?Sized>(
    state: &ParticleState,
    model: &F,
) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut e = vec![Vec3::zeros(); state.len()];
    model.electric_field(&state.x, &mut e);
    let b = state.x.iter().map(|p| model.magnetic_field(p)).collect();
    (e, b)
}

pub fn classical_boris_step<F: ForceModel + ?Sized>(
    state: &ParticleState,
    dt: f64,
    model: &F,
) -> Result<ParticleState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "time step must be positive"));
    }
    let (mut e, mut b) = evaluate_fields(state, model);
    let mut out = state.clone();
    classical_boris_step_cached(&mut out, &mut e, &mut b, dt, model);
    Ok(out)
}

/// Velocity-Verlet with the implicit velocity equation solved by a dense 3x3 solve.
/// Mathematically identical to the Boris step for the Lorentz force.
pub fn velocity_verlet_step<F: ForceModel + ?Sized>(
    state: &ParticleState,
    dt: f64,
    model: &F,
) -> Result<ParticleState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "time step must be positive"));
    }
    let alpha = model.alpha();
    let (e, b) = evaluate_fields(state, model);
    let n = state.len();
    let x_new: Vec<Vec3> = (0..n)
        .map(|i| {
            let f = alpha * (e[i] + state.v[i].cross(&b[i]));
            state.x[i] + dt * (state.v[i] + 0.5 * dt * f)
        })
        .collect();
    let mut e_new = vec![Vec3::zeros(); n];
    model.electric_field(&x_new, &mut e_new);
    let mut v_new = Vec::with_capacity(n);
    for i in 0..n {
        let b1 = model.magnetic_field(&x_new[i]);
        let h = 0.5 * dt * alpha;
        // v' - h v' x b1 = v + h (E + v x b0) + h E'
        let rhs = state.v[i] + h * (e[i] + state.v[i].cross(&b[i])) + h * e_new[i];
        let cross = nalgebra::Matrix3::new(0.0, b1.z, -b1.y, -b1.z, 0.0, b1.x, b1.y, -b1.x, 0.0);
        let a = nalgebra::Matrix3::identity() - h * cross;
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular velocity system".into()))?;
        v_new.push(sol);
    }
    Ok(ParticleState { x: x_new, v: v_new })
}

/// Runs the configured iteration on one step starting from the workspace's current
/// initial value. The workspace must already be initialized.
pub fn iterate_step<F: ForceModel + ?Sized>(
    ws: &mut SweepWorkspace,
    cfg: &StepConfig,
    model: &F,
    step: usize,
) -> Result<StepReport> {
    let sweep = |ws: &mut SweepWorkspace| match cfg.sweeper {
        Sweeper::BorisSdc => ws.sdc_sweep(&cfg.rule, model, step),
        Sweeper::Picard => ws.picard_sweep(&cfg.rule, model, step),
    };
    match cfg.mode {
        IterationMode::FixedIterations(k) => {
            for _ in 0..k {
                sweep(ws)?;
            }
            Ok(StepReport {
                iterations: k,
                residual: ws.residual_norm(&cfg.rule),
                kmax_exhausted: false,
            })
        }
        IterationMode::ResidualTolerance { tol, k_max } => {
            let mut it = 0;
            let mut r;
            loop {
                sweep(ws)?;
                it += 1;
                r = ws.residual_norm(&cfg.rule);
                if !r.is_finite() {
                    return Err(Error::Divergence { step });
                }
                if r <= tol || it >= k_max {
                    break;
                }
            }
            Ok(StepReport {
                iterations: it,
                residual: r,
                kmax_exhausted: r > tol,
            })
        }
    }
}

/// Increments `(x_{n+1} - x_0, v_{n+1} - v_0)` for the configured end point.
pub fn step_increments(ws: &SweepWorkspace, cfg: &StepConfig) -> (Vec<Vec3>, Vec<Vec3>) {
    match cfg.end_point {
        EndPoint::LastNode => ws.last_node_increments(),
        EndPoint::Collocation => ws.end_update_increments(&cfg.rule),
    }
}

/// Single step of the configured SDC/Picard method.
pub fn sdc_step<F: ForceModel + ?Sized>(
    state: &ParticleState,
    cfg: &StepConfig,
    model: &F,
) -> Result<(ParticleState, StepReport)> {
    let mut ws = SweepWorkspace::new(cfg.rule.m, state.len());
    ws.initialize(state, model, cfg.per_node_init);
    let report = iterate_step(&mut ws, cfg, model, 0)?;
    let (dx, dv) = step_increments(&ws, cfg);
    let out = ParticleState {
        x: state.x.iter().zip(&dx).map(|(a, d)| a + d).collect(),
        v: state.v.iter().zip(&dv).map(|(a, d)| a + d).collect(),
    };
    Ok((out, report))
}

/// Time-stepping method of a trajectory run.
#[derive(Debug, Clone)]
pub enum Method {
    ClassicalBoris,
    VelocityVerlet,
    Iterated(StepConfig),
}

impl Method {
    pub fn precision(&self) -> Precision {
        match self {
            Method::Iterated(c) => c.precision,
            _ => Precision::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub rhs_evals: u64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Recorded states (same strides as `samples`) when requested.
    pub states: Vec<ParticleState>,
    pub final_state: ParticleState,
    pub steps_done: usize,
    pub rhs_evals: u64,
    pub total_iterations: u64,
    /// Steps on which the residual tolerance was not reached within K_max.
    pub kmax_hits: usize,
    /// Step index at which the state became non-finite.
    pub divergence: Option<usize>,
}

impl Trajectory {
    pub fn into_result(self) -> Result<Self> {
        match self.divergence {
            Some(step) => Err(Error::Divergence { step }),
            None => Ok(self),
        }
    }
}

pub struct RunOptions<'a> {
    pub stride: usize,
    pub record_states: bool,
    pub energy: Option<&'a dyn Fn(&ParticleState) -> f64>,
    pub t0: f64,
    /// Overrides the step's precision setting for the non-iterated methods.
    pub precision: Option<Precision>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            stride: 1,
            record_states: false,
            energy: None,
            t0: 0.0,
            precision: None,
        }
    }
}

struct Accumulator {
    compensated: bool,
    x: Vec<CompensatedVec3>,
    v: Vec<CompensatedVec3>,
}

impl Accumulator {
    fn new(state: &ParticleState, compensated: bool) -> Self {
        Self {
            compensated,
            x: state.x.iter().map(|p| CompensatedVec3::new(*p)).collect(),
            v: state.v.iter().map(|p| CompensatedVec3::new(*p)).collect(),
        }
    }

    fn add_x(&mut self, state: &mut ParticleState, dx: &[Vec3]) {
        for i in 0..state.len() {
            if self.compensated {
                self.x[i].add(&dx[i]);
                state.x[i] = self.x[i].value();
            } else {
                state.x[i] += dx[i];
            }
        }
    }

    fn set_v(&mut self, state: &mut ParticleState, v_new: &[Vec3]) {
        for i in 0..state.len() {
            if self.compensated {
                self.v[i].add(&(v_new[i] - state.v[i]));
                state.v[i] = self.v[i].value();
            } else {
                state.v[i] = v_new[i];
            }
        }
    }

    fn apply(&mut self, state: &mut ParticleState, dx: &[Vec3], dv: &[Vec3]) {
        if self.compensated {
            for i in 0..state.len() {
                self.x[i].add(&dx[i]);
                self.v[i].add(&dv[i]);
                state.x[i] = self.x[i].value();
                state.v[i] = self.v[i].value();
            }
        } else {
            for i in 0..state.len() {
                state.x[i] += dx[i];
                state.v[i] += dv[i];
            }
        }
    }
}

/// Advances `u0` by `n_steps` steps of size `dt`. A non-finite state stops the run and is
/// reported through `Trajectory::divergence` with everything recorded so far.
///
/// For `Method::Iterated` the step size is taken from the rule, which must span `dt`.
pub fn run_trajectory<F: ForceModel + ?Sized>(
    u0: &ParticleState,
    n_steps: usize,
    dt: f64,
    method: &Method,
    model: &F,
    opts: &RunOptions<'_>,
) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::param("n_steps", "need at least one step"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "time step must be positive"));
    }
    if let Method::Iterated(cfg) = method {
        cfg.validate()?;
        if ((cfg.dt() - dt) / dt).abs() > 1e-12 {
            return Err(Error::param(
                "dt",
                "rule interval does not match the step size",
            ));
        }
    }
    let stride = opts.stride.max(1);
    let precision = opts.precision.unwrap_or_else(|| method.precision());
    let mut acc = Accumulator::new(u0, precision == Precision::CompensatedSummation);
    let mut state = u0.clone();
    let mut samples = Vec::new();
    let mut states = Vec::new();
    let mut rhs_evals = 0u64;
    let mut total_iterations = 0u64;
    let mut kmax_hits = 0;
    let mut divergence = None;

    let mut record =
        |step: usize, state: &ParticleState, residual: f64, iterations: usize, rhs: u64| {
            samples.push(Sample {
                step,
                time: opts.t0 + step as f64 * dt,
                energy: opts.energy.map_or(f64::NAN, |h| h(state)),
                residual,
                iterations,
                rhs_evals: rhs,
            });
            if opts.record_states {
                states.push(state.clone());
            }
        };
    record(0, &state, 0.0, 0, 0);

    let mut steps_done = 0;
    match method {
        Method::ClassicalBoris => {
            let alpha = model.alpha();
            let n = state.len();
            let (mut e, mut b) = evaluate_fields(&state, model);
            rhs_evals += 1;
            let mut e_new = vec![Vec3::zeros(); n];
            for step in 1..=n_steps {
                let dx: Vec<Vec3> = (0..n)
                    .map(|i| {
                        let f = alpha * (e[i] + state.v[i].cross(&b[i]));
                        dt * (state.v[i] + 0.5 * dt * f)
                    })
                    .collect();
                let mut next = state.clone();
                acc.add_x(&mut next, &dx);
                model.electric_field(&next.x, &mut e_new);
                let b_new: Vec<Vec3> = if model.uniform_magnetic_field() {
                    b.clone()
                } else {
                    next.x.iter().map(|p| model.magnetic_field(p)).collect()
                };
                let v_new: Vec<Vec3> = (0..n)
                    .map(|i| {
                        let e_mid = 0.5 * (e[i] + e_new[i]);
                        boris_velocity_update(
                            &state.v[i],
                            dt,
                            alpha,
                            &e_mid,
                            &b[i],
                            &b_new[i],
                            &Vec3::zeros(),
                        )
                    })
                    .collect();
                acc.set_v(&mut next, &v_new);
                rhs_evals += 1;
                if !next.is_finite() {
                    divergence = Some(step);
                    break;
                }
                state = next;
                std::mem::swap(&mut e, &mut e_new);
                b = b_new;
                steps_done = step;
                if step % stride == 0 || step == n_steps {
                    record(step, &state, 0.0, 1, rhs_evals);
                }
            }
        }
        Method::VelocityVerlet => {
            for step in 1..=n_steps {
                let next = velocity_verlet_step(&state, dt, model)?;
                rhs_evals += 1;
                if !next.is_finite() {
                    divergence = Some(step);
                    break;
                }
                let dx: Vec<Vec3> = next.x.iter().zip(&state.x).map(|(a, b)| a - b).collect();
                let dv: Vec<Vec3> = next.v.iter().zip(&state.v).map(|(a, b)| a - b).collect();
                acc.apply(&mut state, &dx, &dv);
                steps_done = step;
                if step % stride == 0 || step == n_steps {
                    record(step, &state, 0.0, 1, rhs_evals);
                }
            }
        }
        Method::Iterated(cfg) => {
            let mut ws = SweepWorkspace::new(cfg.rule.m, state.len());
            for step in 1..=n_steps {
                let before = ws.rhs_evals;
                ws.initialize(&state, model, cfg.per_node_init);
                let report = match iterate_step(&mut ws, cfg, model, step) {
                    Ok(r) => r,
                    Err(Error::Divergence { .. }) => {
                        divergence = Some(step);
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let (dx, dv) = step_increments(&ws, cfg);
                let mut next = state.clone();
                acc.apply(&mut next, &dx, &dv);
                if !next.is_finite() {
                    divergence = Some(step);
                    break;
                }
                state = next;
                rhs_evals += ws.rhs_evals - before;
                total_iterations += report.iterations as u64;
                if report.kmax_exhausted {
                    kmax_hits += 1;
                }
                steps_done = step;
                if step % stride == 0 || step == n_steps {
                    record(step, &state, report.residual, report.iterations, rhs_evals);
                }
            }
        }
    }
    if !matches!(method, Method::Iterated(_)) {
        total_iterations = steps_done as u64;
    }

    Ok(Trajectory {
        samples,
        states,
        final_state: state,
        steps_done,
        rhs_evals,
        total_iterations,
        kmax_hits,
        divergence,
    })
}

#[cfg(test)]
mod tests;
