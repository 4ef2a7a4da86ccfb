//! Single-particle experiments: order of convergence, residual control, work versus
//! precision and long-time energy behaviour.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::exec::map_slice;
use crate::fields::{analytic_solution, state_energy, ForceModel, PenningTrap};
use crate::integrators::{run_trajectory, ParticleState, RunOptions, Trajectory};

use super::analysis::{cost_at_error, drift_test, fit_order, DriftReport, OrderFit};
use super::config::{ExperimentConfig, ExperimentKind, MethodKind};
use super::output::{fmt_f64, list_tag, output_path, tol_tag, RunRecord, Table};
use super::scheme::Scheme;

/// One run of a time-step ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub scheme: Scheme,
    pub label: String,
    pub n_steps: usize,
    pub dt: f64,
    /// Relative error of the observed quantity; NaN for a diverged run.
    pub error: f64,
    pub rhs_evals: u64,
    pub mean_iterations: f64,
    pub kmax_hits: usize,
    pub diverged: bool,
}

pub const LADDER_HEADER: [&str; 11] = [
    "scheme",
    "M",
    "K",
    "tol",
    "n_steps",
    "dt",
    "rel_error",
    "rhs_evals",
    "mean_iterations",
    "kmax_hits",
    "status",
];

pub fn ladder_table(rows: &[LadderRow]) -> Table {
    let mut t = Table::new(&LADDER_HEADER);
    for r in rows {
        t.push(vec![
            r.label.clone(),
            r.scheme.nodes().map_or(String::new(), |m| m.to_string()),
            r.scheme.sweeps().map_or(String::new(), |k| k.to_string()),
            r.scheme.tolerance().map_or(String::new(), fmt_f64),
            r.n_steps.to_string(),
            fmt_f64(r.dt),
            fmt_f64(r.error),
            r.rhs_evals.to_string(),
            fmt_f64(r.mean_iterations),
            r.kmax_hits.to_string(),
            if r.diverged { "diverged" } else { "ok" }.to_string(),
        ]);
    }
    t
}

/// Runs every scheme at every ladder step count; `error` scores the final state.
pub fn run_ladder<F, E>(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
    steps: &[usize],
    u0: &ParticleState,
    model: &F,
    error: E,
) -> Result<Vec<LadderRow>>
where
    F: ForceModel + ?Sized,
    E: Fn(&ParticleState) -> f64 + Sync,
{
    let jobs: Vec<(Scheme, usize)> = schemes
        .iter()
        .flat_map(|s| steps.iter().map(move |&n| (*s, n)))
        .collect();
    let rows = map_slice(
        cfg.execution(),
        &jobs,
        |&(scheme, n)| -> Result<LadderRow> {
            let dt = cfg.t_end / n as f64;
            let method = scheme.method(dt, cfg.precision)?;
            let tr = run_trajectory(
                u0,
                n,
                dt,
                &method,
                model,
                &RunOptions {
                    stride: n,
                    ..Default::default()
                },
            )?;
            let diverged = tr.divergence.is_some();
            Ok(LadderRow {
                scheme,
                label: scheme.label(),
                n_steps: n,
                dt,
                error: if diverged {
                    f64::NAN
                } else {
                    error(&tr.final_state)
                },
                rhs_evals: tr.rhs_evals,
                mean_iterations: tr.total_iterations as f64 / tr.steps_done.max(1) as f64,
                kmax_hits: tr.kmax_hits,
                diverged,
            })
        },
    );
    rows.into_iter().collect()
}

/// Order fit of one scheme's rows.
pub fn scheme_fit(rows: &[LadderRow], label: &str) -> Option<OrderFit> {
    let (dt, err): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.label == label)
        .map(|r| (r.dt, r.error))
        .unzip();
    fit_order(&dt, &err)
}

fn single_particle(cfg: &ExperimentConfig) -> Result<(PenningTrap, ParticleState, f64)> {
    cfg.validate()?;
    let x_ref = analytic_solution(
        &cfg.trap,
        &cfg.initial.position(),
        &cfg.initial.velocity(),
        cfg.t_end,
    )?
    .0;
    if x_ref.x == 0.0 {
        return Err(Error::param(
            "t_end",
            "exact x coordinate vanishes; relative error undefined",
        ));
    }
    Ok((
        PenningTrap::external(cfg.trap),
        cfg.initial.state(),
        x_ref.x,
    ))
}

/// Relative error of the x coordinate against the exact value `x_ref`.
pub fn relative_x_error(x: f64, x_ref: f64) -> f64 {
    (x - x_ref).abs() / x_ref.abs()
}

/// Ladder schemes selected by the configured method: classical Boris as the baseline
/// plus the configured method for every sweep count.
pub fn ladder_schemes(cfg: &ExperimentConfig) -> Vec<Scheme> {
    let mut out = vec![Scheme::ClassicalBoris];
    match cfg.method {
        MethodKind::Boris => {}
        MethodKind::Verlet => out.push(Scheme::VelocityVerlet),
        MethodKind::Collocation => out.push(Scheme::collocation(cfg.nodes, cfg.m)),
        MethodKind::BorisSdc | MethodKind::Picard => {
            let sweeper = if cfg.method == MethodKind::Picard {
                crate::integrators::Sweeper::Picard
            } else {
                crate::integrators::Sweeper::BorisSdc
            };
            out.extend(cfg.iterations.iter().map(|&k| Scheme::Sweeps {
                sweeper,
                family: cfg.nodes,
                m: cfg.m,
                k,
            }));
        }
    }
    out
}

fn scheme_tag(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.method {
        MethodKind::BorisSdc | MethodKind::Picard => {
            vec![
                format!("{}M{}", method_prefix(cfg.method), cfg.m),
                list_tag("K", &cfg.iterations),
            ]
        }
        MethodKind::Collocation => vec![format!("collocationM{}", cfg.m)],
        MethodKind::Boris => vec!["boris".into()],
        MethodKind::Verlet => vec!["verlet".into()],
    }
}

fn method_prefix(m: MethodKind) -> &'static str {
    if m == MethodKind::Picard {
        "picard-"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutcome {
    pub rows: Vec<LadderRow>,
    pub fits: Vec<(String, Option<OrderFit>)>,
}

impl ConvergenceOutcome {
    pub fn fit(&self, label: &str) -> Option<OrderFit> {
        self.fits
            .iter()
            .find(|(l, _)| l == label)
            .and_then(|(_, f)| *f)
    }

    pub fn fit_table(&self) -> Table {
        let mut t = Table::new(&["scheme", "order", "points"]);
        for (l, f) in &self.fits {
            t.push(vec![
                l.clone(),
                f.map_or("NaN".into(), |f| fmt_f64(f.order)),
                f.map_or(0, |f| f.points).to_string(),
            ]);
        }
        t
    }

    pub fn files(&self, cfg: &ExperimentConfig) -> Vec<(PathBuf, Table)> {
        let tag = scheme_tag(cfg);
        let mut fit_tag = tag.clone();
        fit_tag.push("fit".into());
        vec![
            (
                output_path(&cfg.output, ExperimentKind::Converge.name(), &tag, cfg.seed),
                ladder_table(&self.rows),
            ),
            (
                output_path(
                    &cfg.output,
                    ExperimentKind::Converge.name(),
                    &fit_tag,
                    cfg.seed,
                ),
                self.fit_table(),
            ),
        ]
    }
}

/// Relative x error at `t_end` over the step ladder, with a log-log order fit per scheme.
pub fn experiment_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceOutcome> {
    convergence_with(cfg, &ladder_schemes(cfg))
}

pub fn convergence_with(cfg: &ExperimentConfig, schemes: &[Scheme]) -> Result<ConvergenceOutcome> {
    let (trap, u0, x_ref) = single_particle(cfg)?;
    let rows = run_ladder(cfg, schemes, &cfg.steps, &u0, &trap, |s| {
        relative_x_error(s.x[0].x, x_ref)
    })?;
    let fits = schemes
        .iter()
        .map(|s| (s.label(), scheme_fit(&rows, &s.label())))
        .collect();
    Ok(ConvergenceOutcome { rows, fits })
}

/// Error level reached by a residual-controlled run once the time step no longer matters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    pub tol: f64,
    /// Coarsest ladder step count at which the converged run is a decade below every tolerance.
    pub n_steps: Option<usize>,
    pub error: Option<f64>,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualOutcome {
    pub rows: Vec<LadderRow>,
    /// Runs iterated to the collocation solution on the same ladder.
    pub reference: Vec<LadderRow>,
    pub saturation: Vec<Saturation>,
}

impl ResidualOutcome {
    pub fn files(&self, cfg: &ExperimentConfig) -> Vec<(PathBuf, Table)> {
        let tag = vec![format!("M{}", cfg.m), tol_tag(&cfg.tolerances)];
        let mut sat_tag = tag.clone();
        sat_tag.push("saturation".into());
        let mut all = self.rows.clone();
        all.extend(self.reference.iter().cloned());
        let mut sat = Table::new(&["tol", "n_steps", "rel_error", "mean_iterations"]);
        for s in &self.saturation {
            sat.push(vec![
                fmt_f64(s.tol),
                s.n_steps.map_or(String::new(), |n| n.to_string()),
                fmt_f64(s.error.unwrap_or(f64::NAN)),
                fmt_f64(s.mean_iterations.unwrap_or(f64::NAN)),
            ]);
        }
        vec![
            (
                output_path(&cfg.output, ExperimentKind::Residual.name(), &tag, cfg.seed),
                ladder_table(&all),
            ),
            (
                output_path(
                    &cfg.output,
                    ExperimentKind::Residual.name(),
                    &sat_tag,
                    cfg.seed,
                ),
                sat,
            ),
        ]
    }
}

/// Ladder runs with residual-controlled sweeps, one per tolerance, plus the saturation
/// level of each tolerance.
pub fn experiment_residual_control(cfg: &ExperimentConfig) -> Result<ResidualOutcome> {
    let (trap, u0, x_ref) = single_particle(cfg)?;
    let err = |s: &ParticleState| relative_x_error(s.x[0].x, x_ref);
    let schemes: Vec<Scheme> = cfg
        .tolerances
        .iter()
        .map(|&tol| Scheme::Tolerance {
            sweeper: crate::integrators::Sweeper::BorisSdc,
            family: cfg.nodes,
            m: cfg.m,
            tol,
            k_max: cfg.k_max,
        })
        .collect();
    let reference_scheme = Scheme::collocation(cfg.nodes, cfg.m);
    let mut all = schemes.clone();
    all.push(reference_scheme);
    let mut rows = run_ladder(cfg, &all, &cfg.steps, &u0, &trap, err)?;
    let reference: Vec<LadderRow> = rows.split_off(schemes.len() * cfg.steps.len());

    let min_tol = cfg.tolerances.iter().copied().fold(f64::INFINITY, f64::min);
    let mut order: Vec<&LadderRow> = reference.iter().collect();
    order.sort_by_key(|r| r.n_steps);
    let fine = order
        .iter()
        .find(|r| !r.diverged && r.error <= 0.1 * min_tol)
        .map(|r| r.n_steps);
    let saturation = cfg
        .tolerances
        .iter()
        .zip(&schemes)
        .map(|(&tol, s)| {
            let row = fine.and_then(|n| rows.iter().find(|r| r.scheme == *s && r.n_steps == n));
            Saturation {
                tol,
                n_steps: fine,
                error: row.map(|r| r.error),
                mean_iterations: row.map(|r| r.mean_iterations),
            }
        })
        .collect();
    Ok(ResidualOutcome {
        rows,
        reference,
        saturation,
    })
}

/// Cheapest scheme for one error target.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub target: f64,
    /// Interpolated force evaluations per scheme; `None` if the target is never reached.
    pub costs: Vec<(String, Option<f64>)>,
    pub cheapest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkPrecisionOutcome {
    pub rows: Vec<LadderRow>,
    pub crossovers: Vec<Crossover>,
}

impl WorkPrecisionOutcome {
    pub fn cost(&self, target: f64, label: &str) -> Option<f64> {
        self.crossovers
            .iter()
            .find(|c| c.target == target)
            .and_then(|c| c.costs.iter().find(|(l, _)| l == label))
            .and_then(|(_, c)| *c)
    }

    pub fn files(&self, cfg: &ExperimentConfig) -> Vec<(PathBuf, Table)> {
        let tag = scheme_tag(cfg);
        let mut cross_tag = tag.clone();
        cross_tag.push("crossover".into());
        let mut t = Table::new(&["target", "scheme", "rhs_evals", "cheapest"]);
        for c in &self.crossovers {
            for (l, cost) in &c.costs {
                t.push(vec![
                    fmt_f64(c.target),
                    l.clone(),
                    fmt_f64(cost.unwrap_or(f64::NAN)),
                    (c.cheapest.as_deref() == Some(l.as_str())).to_string(),
                ]);
            }
        }
        vec![
            (
                output_path(
                    &cfg.output,
                    ExperimentKind::WorkPrecision.name(),
                    &tag,
                    cfg.seed,
                ),
                ladder_table(&self.rows),
            ),
            (
                output_path(
                    &cfg.output,
                    ExperimentKind::WorkPrecision.name(),
                    &cross_tag,
                    cfg.seed,
                ),
                t,
            ),
        ]
    }
}

/// Error against force evaluations for every scheme, and the cheapest scheme per target.
pub fn experiment_work_precision(cfg: &ExperimentConfig) -> Result<WorkPrecisionOutcome> {
    work_precision_with(cfg, &ladder_schemes(cfg))
}

pub fn work_precision_with(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
) -> Result<WorkPrecisionOutcome> {
    let (trap, u0, x_ref) = single_particle(cfg)?;
    let rows = run_ladder(cfg, schemes, &cfg.steps, &u0, &trap, |s| {
        relative_x_error(s.x[0].x, x_ref)
    })?;
    let crossovers = cfg
        .targets
        .iter()
        .map(|&target| {
            let costs: Vec<(String, Option<f64>)> = schemes
                .iter()
                .map(|s| {
                    let label = s.label();
                    let mut curve: Vec<(f64, f64)> = rows
                        .iter()
                        .filter(|r| r.label == label && !r.diverged)
                        .map(|r| (r.rhs_evals as f64, r.error))
                        .collect();
                    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
                    (label, cost_at_error(&curve, target))
                })
                .collect();
            let cheapest = costs
                .iter()
                .filter_map(|(l, c)| c.map(|c| (l, c)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(l, _)| l.clone());
            Crossover {
                target,
                costs,
                cheapest,
            }
        })
        .collect();
    Ok(WorkPrecisionOutcome { rows, crossovers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRun {
    pub label: String,
    pub record: RunRecord,
    pub drift: DriftReport,
    pub divergence: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyOutcome {
    pub runs: Vec<EnergyRun>,
}

pub const ENERGY_SUMMARY_HEADER: [&str; 5] = [
    "scheme",
    "max_rel_error",
    "drift_slope",
    "drifting",
    "diverged_at",
];

impl EnergyOutcome {
    pub fn run(&self, label: &str) -> Option<&EnergyRun> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn files(&self, cfg: &ExperimentConfig) -> Vec<(PathBuf, Table)> {
        let kind = ExperimentKind::Energy.name();
        let mut out: Vec<(PathBuf, Table)> = self
            .runs
            .iter()
            .map(|r| {
                (
                    output_path(&cfg.output, kind, std::slice::from_ref(&r.label), cfg.seed),
                    r.record.to_table(),
                )
            })
            .collect();
        let mut sum = Table::new(&ENERGY_SUMMARY_HEADER);
        for r in &self.runs {
            sum.push(vec![
                r.label.clone(),
                fmt_f64(r.drift.max_error),
                fmt_f64(r.drift.slope),
                r.drift.drifting.to_string(),
                r.divergence.map_or(String::new(), |s| s.to_string()),
            ]);
        }
        let mut tag = scheme_tag(cfg);
        tag.push("summary".into());
        out.push((output_path(&cfg.output, kind, &tag, cfg.seed), sum));
        out
    }

    pub fn divergence(&self) -> Option<usize> {
        self.runs.iter().find_map(|r| r.divergence)
    }
}

/// Full per-step trajectory with energies.
pub(crate) fn energy_trajectory<F: ForceModel + ?Sized>(
    u0: &ParticleState,
    steps: usize,
    dt: f64,
    scheme: &Scheme,
    cfg: &ExperimentConfig,
    model: &F,
    energy: &(dyn Fn(&ParticleState) -> f64 + Sync),
) -> Result<Trajectory> {
    let method = scheme.method(dt, cfg.precision)?;
    let opts = RunOptions {
        stride: 1,
        energy: Some(energy),
        precision: Some(cfg.precision),
        ..Default::default()
    };
    run_trajectory(u0, steps, dt, &method, model, &opts)
}

/// Relative energy error over a long run for classical Boris and each configured sweep
/// count. A divergent run keeps its partial record.
pub fn experiment_energy(cfg: &ExperimentConfig) -> Result<EnergyOutcome> {
    energy_with(cfg, &ladder_schemes(cfg))
}

pub fn energy_with(cfg: &ExperimentConfig, schemes: &[Scheme]) -> Result<EnergyOutcome> {
    cfg.validate()?;
    let trap = PenningTrap::external(cfg.trap);
    let u0 = cfg.initial.state();
    let p = cfg.trap;
    let charge = [p.alpha];
    let mass = [1.0];
    let energy = move |s: &ParticleState| state_energy(&p, &s.x, &s.v, &charge, &mass, 0.0);
    let h0 = energy(&u0);
    if h0 == 0.0 {
        return Err(Error::param(
            "initial",
            "initial energy is zero; relative error undefined",
        ));
    }
    let runs = map_slice(cfg.execution(), schemes, |scheme| -> Result<EnergyRun> {
        let tr = energy_trajectory(
            &u0,
            cfg.energy.steps,
            cfg.energy.dt,
            scheme,
            cfg,
            &trap,
            &energy,
        )?;
        let err: Vec<f64> = tr
            .samples
            .iter()
            .map(|s| ((s.energy - h0) / h0).abs())
            .collect();
        let steps: Vec<f64> = tr.samples.iter().map(|s| s.step as f64).collect();
        let drift = drift_test(&steps, &err);
        let label = scheme.label();
        let record = RunRecord::from_trajectory(&label, &tr, cfg.energy.stride, |i, _| err[i]);
        Ok(EnergyRun {
            label,
            record,
            drift,
            divergence: tr.divergence,
        })
    });
    Ok(EnergyOutcome {
        runs: runs.into_iter().collect::<Result<_>>()?,
    })
}
