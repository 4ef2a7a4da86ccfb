//! Particle cloud with Coulomb interaction: centre-of-mass accuracy and energy drift.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::map_slice;
use crate::fields::{mass_center, state_energy, ParticleEnsemble, PenningTrap};
use crate::integrators::{run_trajectory, ParticleState, RunOptions};
use crate::Vec3;

use super::analysis::{drift_onset, OrderFit};
use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{fmt_f64, list_tag, output_path, RunRecord, Table};
use super::scheme::Scheme;
use super::single::{
    energy_trajectory, ladder_schemes, ladder_table, relative_x_error, run_ladder, scheme_fit,
    LadderRow,
};

/// Uniform sample from the ball of radius `r` by rejection from the enclosing cube.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, r: f64) -> Vec3 {
    loop {
        let p = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if p.norm_squared() <= 1.0 {
            return r * p;
        }
    }
}

/// The configured initial state with every particle distorted by its own random shifts.
pub fn distorted_cloud(cfg: &ExperimentConfig) -> Result<ParticleEnsemble> {
    let c = &cfg.cloud;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (x0, v0) = (cfg.initial.position(), cfg.initial.velocity());
    let mut x = Vec::with_capacity(c.particles);
    let mut v = Vec::with_capacity(c.particles);
    for _ in 0..c.particles {
        x.push(x0 + uniform_in_ball(&mut rng, c.x_shift));
        v.push(v0 + uniform_in_ball(&mut rng, c.v_shift));
    }
    ParticleEnsemble::new(
        x,
        v,
        vec![c.charge; c.particles],
        vec![c.mass; c.particles],
        c.lambda,
    )
}

/// SHA-256 over the particle data, as lowercase hex.
pub fn ensemble_hash(ens: &ParticleEnsemble) -> String {
    let mut h = Sha256::new();
    h.update((ens.len() as u64).to_le_bytes());
    for p in ens.x.iter().chain(&ens.v) {
        for c in p.iter() {
            h.update(c.to_le_bytes());
        }
    }
    for s in ens.charge.iter().chain(&ens.mass) {
        h.update(s.to_le_bytes());
    }
    h.update(ens.lambda.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudEnergyRun {
    pub label: String,
    /// Energy ratio to the value at the end of the relaxation phase.
    pub record: RunRecord,
    pub reference_energy: f64,
    pub onset: Option<usize>,
    pub max_deviation: f64,
    pub divergence: Option<usize>,
    pub initial_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudOutcome {
    pub initial_hash: String,
    pub rows: Vec<LadderRow>,
    pub fits: Vec<(String, Option<OrderFit>)>,
    pub reference_steps: usize,
    pub energy: Vec<CloudEnergyRun>,
}

impl CloudOutcome {
    pub fn fit(&self, label: &str) -> Option<OrderFit> {
        self.fits
            .iter()
            .find(|(l, _)| l == label)
            .and_then(|(_, f)| *f)
    }

    pub fn energy_run(&self, label: &str) -> Option<&CloudEnergyRun> {
        self.energy.iter().find(|r| r.label == label)
    }

    pub fn files(&self, cfg: &ExperimentConfig) -> Vec<(PathBuf, Table)> {
        let kind = ExperimentKind::Cloud.name();
        let n = format!("N{}", cfg.cloud.particles);
        let base = vec![
            n.clone(),
            format!("M{}", cfg.m),
            list_tag("K", &cfg.iterations),
        ];
        let mut fit_tag = base.clone();
        fit_tag.push("fit".into());
        let mut fit = Table::new(&["scheme", "order", "points", "initial_hash"]);
        for (l, f) in &self.fits {
            fit.push(vec![
                l.clone(),
                f.map_or("NaN".into(), |f| fmt_f64(f.order)),
                f.map_or(0, |f| f.points).to_string(),
                self.initial_hash.clone(),
            ]);
        }
        let mut out = vec![
            (
                output_path(&cfg.output, kind, &base, cfg.seed),
                ladder_table(&self.rows),
            ),
            (output_path(&cfg.output, kind, &fit_tag, cfg.seed), fit),
        ];
        let mut sum = Table::new(&[
            "scheme",
            "reference_energy",
            "onset_step",
            "max_deviation",
            "diverged_at",
            "initial_hash",
        ]);
        for r in &self.energy {
            out.push((
                output_path(
                    &cfg.output,
                    kind,
                    &[n.clone(), "energy".into(), r.label.clone()],
                    cfg.seed,
                ),
                r.record.to_table(),
            ));
            sum.push(vec![
                r.label.clone(),
                fmt_f64(r.reference_energy),
                r.onset.map_or(String::new(), |s| s.to_string()),
                fmt_f64(r.max_deviation),
                r.divergence.map_or(String::new(), |s| s.to_string()),
                r.initial_hash.clone(),
            ]);
        }
        out.push((
            output_path(
                &cfg.output,
                kind,
                &[n, "energy".into(), "summary".into()],
                cfg.seed,
            ),
            sum,
        ));
        out
    }

    pub fn divergence(&self) -> Option<usize> {
        self.energy.iter().find_map(|r| r.divergence)
    }
}

/// Energy-study schemes: classical Boris and Boris-SDC with the configured sweep count.
pub fn cloud_energy_schemes(cfg: &ExperimentConfig) -> Vec<Scheme> {
    vec![
        Scheme::ClassicalBoris,
        Scheme::sdc(cfg.m, cfg.cloud.energy_iterations),
    ]
}

/// Centre-of-mass work-precision ladder against a fine reference run, and the energy
/// drift onset after relaxation.
pub fn experiment_cloud(cfg: &ExperimentConfig) -> Result<CloudOutcome> {
    cloud_with(cfg, &ladder_schemes(cfg), &cloud_energy_schemes(cfg))
}

pub fn cloud_with(
    cfg: &ExperimentConfig,
    ladder: &[Scheme],
    energy_schemes: &[Scheme],
) -> Result<CloudOutcome> {
    cfg.validate()?;
    let ens = distorted_cloud(cfg)?;
    let initial_hash = ensemble_hash(&ens);
    let trap = PenningTrap::with_coulomb(cfg.trap, &ens);
    let u0 = ParticleState::new(ens.x.clone(), ens.v.clone());
    let mass = ens.mass.clone();

    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut reference_steps = 0;
    if !ladder.is_empty() {
        let n_max = *cfg.steps.iter().max().expect("validated ladder");
        reference_steps = n_max * cfg.cloud.reference_refinement;
        let reference = Scheme::Tolerance {
            sweeper: crate::integrators::Sweeper::BorisSdc,
            family: crate::quadrature::NodeFamily::GaussLobatto,
            m: 5,
            tol: cfg.cloud.reference_tol,
            k_max: cfg.k_max,
        };
        let dt_ref = cfg.t_end / reference_steps as f64;
        let tr = run_trajectory(
            &u0,
            reference_steps,
            dt_ref,
            &reference.method(dt_ref, cfg.precision)?,
            &trap,
            &RunOptions {
                stride: reference_steps,
                ..Default::default()
            },
        )?;
        if let Some(step) = tr.divergence {
            return Err(Error::Divergence { step });
        }
        let x_ref = mass_center(&tr.final_state.x, &mass)?.x;
        rows = run_ladder(cfg, ladder, &cfg.steps, &u0, &trap, |s| {
            match mass_center(&s.x, &mass) {
                Ok(c) => relative_x_error(c.x, x_ref),
                Err(_) => f64::NAN,
            }
        })?;
        fits = ladder
            .iter()
            .map(|s| (s.label(), scheme_fit(&rows, &s.label())))
            .collect();
    }

    let c = &cfg.cloud;
    let (charge, lambda, p) = (ens.charge.clone(), ens.lambda, cfg.trap);
    let energy = |s: &ParticleState| state_energy(&p, &s.x, &s.v, &charge, &mass, lambda);
    let energy = map_slice(
        cfg.execution(),
        energy_schemes,
        |scheme| -> Result<CloudEnergyRun> {
            let start = ParticleState::new(ens.x.clone(), ens.v.clone());
            let start_hash = ensemble_hash(&ParticleEnsemble {
                x: start.x.clone(),
                v: start.v.clone(),
                ..ens.clone()
            });
            let tr = energy_trajectory(
                &start,
                c.energy_steps,
                c.energy_dt,
                scheme,
                cfg,
                &trap,
                &energy,
            )?;
            let h_ref = tr.samples.get(c.relax_steps).map_or(f64::NAN, |s| s.energy);
            let ratio: Vec<f64> = tr.samples.iter().map(|s| s.energy / h_ref).collect();
            let onset =
                drift_onset(&ratio, c.relax_steps, c.onset_threshold).map(|i| tr.samples[i].step);
            let max_deviation = ratio
                .iter()
                .skip(c.relax_steps)
                .map(|r| (r - 1.0).abs())
                .fold(0.0, f64::max);
            let label = scheme.label();
            let record = RunRecord::from_trajectory(&label, &tr, c.energy_stride, |i, _| ratio[i]);
            Ok(CloudEnergyRun {
                label,
                record,
                reference_energy: h_ref,
                onset,
                max_deviation,
                divergence: tr.divergence,
                initial_hash: start_hash,
            })
        },
    );
    let energy = energy.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CloudOutcome {
        initial_hash,
        rows,
        fits,
        reference_steps,
        energy,
    })
}
