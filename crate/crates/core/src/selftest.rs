//! Quick library self-test: quadrature, kernel and equivalence invariants.

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boris::{boris_velocity_update, rotate};
use crate::fields::PenningTrap;
use crate::integrators::{
    classical_boris_step, sdc_step, EndPoint, IterationMode, ParticleState, StepConfig,
};
use crate::linear::{assemble_operators, PointAnalyzer};
use crate::quadrature::{NodeFamily, QuadratureRule};
use crate::{PenningParams, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.checks.len()
    }
}

type CheckFn = fn() -> Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-r..r),
        rng.random_range(-r..r),
        rng.random_range(-r..r),
    )
}

fn state_gap(a: &ParticleState, b: &ParticleState) -> f64 {
    let mut g: f64 = 0.0;
    for i in 0..a.len() {
        g = g.max((a.x[i] - b.x[i]).norm() / b.x[i].norm().max(1.0));
        g = g.max((a.v[i] - b.v[i]).norm() / b.v[i].norm().max(1.0));
    }
    g
}

fn table1() -> (PenningTrap, ParticleState) {
    (
        PenningTrap::external(PenningParams::default()),
        ParticleState::single(Vec3::new(10.0, 0.0, 0.0), Vec3::new(100.0, 0.0, 100.0)),
    )
}

fn quadrature_exactness() -> Result<String, String> {
    let (a, b) = (0.2, 0.9);
    let mut worst: f64 = 0.0;
    for m in [2, 3, 5, 7] {
        let r =
            QuadratureRule::new(NodeFamily::GaussLobatto, m, a, b).map_err(|e| e.to_string())?;
        for p in 0..m {
            for row in 1..=m {
                let num: f64 = (0..=m)
                    .map(|j| r.q_mat[(row, j)] * r.taus[j].powi(p as i32))
                    .sum();
                let exact =
                    (r.taus[row].powi(p as i32 + 1) - a.powi(p as i32 + 1)) / (p as f64 + 1.0);
                worst = worst.max(rel(num, exact));
            }
        }
        for p in 0..=(2 * m - 3) {
            let num: f64 = (0..=m).map(|j| r.q[j] * r.taus[j].powi(p as i32)).sum();
            let exact = (b.powi(p as i32 + 1) - a.powi(p as i32 + 1)) / (p as f64 + 1.0);
            worst = worst.max(rel(num, exact));
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max relative error {worst:.1e}"))
    } else {
        Err(format!("max relative error {worst:.1e} > 1e-12"))
    }
}

fn two_node_matrices() -> Result<String, String> {
    let dt = 0.37;
    let r = QuadratureRule::new(NodeFamily::GaussLobatto, 2, 0.0, dt).map_err(|e| e.to_string())?;
    let s = [0.0, dt / 2.0, dt / 2.0];
    let sx = [0.0, dt * dt / 2.0, 0.0];
    let sq = [0.0, dt * dt / 4.0, dt * dt / 4.0];
    let ok = (0..3).all(|j| r.s[(2, j)] == s[j] && r.sx[(2, j)] == sx[j] && r.sq[(2, j)] == sq[j]);
    if ok {
        Ok("S, Sx, SQ exact".into())
    } else {
        Err(format!("S={} Sx={} SQ={}", r.s, r.sx, r.sq))
    }
}

fn rotation_preserves_speed() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let v = random_vec(&mut rng, 100.0);
        let t = random_vec(&mut rng, 3.0);
        worst = worst.max(rel(rotate(&v, &t).norm(), v.norm()));
    }
    if worst <= 1e-14 {
        Ok(format!("max relative speed change {worst:.1e}"))
    } else {
        Err(format!("speed changed by {worst:.1e}"))
    }
}

fn velocity_update_solves_trapezoid() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (v, e, c) = (
            random_vec(&mut rng, 10.0),
            random_vec(&mut rng, 10.0),
            random_vec(&mut rng, 10.0),
        );
        let (b0, b1) = (random_vec(&mut rng, 3.0), random_vec(&mut rng, 3.0));
        let (dt, alpha) = (rng.random_range(0.01..1.0), rng.random_range(0.5..2.0));
        let got = boris_velocity_update(&v, dt, alpha, &e, &b0, &b1, &c);
        let h = 0.5 * dt * alpha;
        let cross = Matrix3::new(0.0, b1.z, -b1.y, -b1.z, 0.0, b1.x, b1.y, -b1.x, 0.0);
        let rhs = v + dt * (alpha * e + c) + h * v.cross(&b0);
        let want = (Matrix3::identity() - h * cross)
            .lu()
            .solve(&rhs)
            .ok_or("singular oracle")?;
        worst = worst.max((got - want).norm() / want.norm());
    }
    if worst <= 1e-13 {
        Ok(format!("max relative deviation {worst:.1e}"))
    } else {
        Err(format!("deviation {worst:.1e} > 1e-13"))
    }
}

fn two_node_sweep_is_boris() -> Result<String, String> {
    let (trap, u0) = table1();
    let dt = 0.01;
    let rule =
        QuadratureRule::new(NodeFamily::GaussLobatto, 2, 0.0, dt).map_err(|e| e.to_string())?;
    let cfg =
        StepConfig::new(rule, IterationMode::FixedIterations(1)).map_err(|e| e.to_string())?;
    let (sdc, _) = sdc_step(&u0, &cfg, &trap).map_err(|e| e.to_string())?;
    let boris = classical_boris_step(&u0, dt, &trap).map_err(|e| e.to_string())?;
    let gap = state_gap(&sdc, &boris);
    if gap <= 1e-14 {
        Ok(format!("gap {gap:.1e}"))
    } else {
        Err(format!("gap {gap:.1e} > 1e-14"))
    }
}

fn single_sweep_is_substepped_boris() -> Result<String, String> {
    let (trap, u0) = table1();
    let dt = 0.02;
    let mut worst: f64 = 0.0;
    for m in [3, 5] {
        let rule =
            QuadratureRule::new(NodeFamily::GaussLobatto, m, 0.0, dt).map_err(|e| e.to_string())?;
        let taus = rule.taus.clone();
        let cfg =
            StepConfig::new(rule, IterationMode::FixedIterations(1)).map_err(|e| e.to_string())?;
        let (sdc, _) = sdc_step(&u0, &cfg, &trap).map_err(|e| e.to_string())?;
        let mut s = u0.clone();
        for w in taus[1..].windows(2) {
            s = classical_boris_step(&s, w[1] - w[0], &trap).map_err(|e| e.to_string())?;
        }
        worst = worst.max(state_gap(&sdc, &s));
    }
    if worst <= 1e-13 {
        Ok(format!("gap {worst:.1e}"))
    } else {
        Err(format!("gap {worst:.1e} > 1e-13"))
    }
}

fn end_update_matches_last_node() -> Result<String, String> {
    let (trap, u0) = table1();
    let dt = 0.01;
    let rule =
        QuadratureRule::new(NodeFamily::GaussLobatto, 4, 0.0, dt).map_err(|e| e.to_string())?;
    let mode = IterationMode::ResidualTolerance {
        tol: 1e-12,
        k_max: 50,
    };
    let last = StepConfig::new(rule.clone(), mode).map_err(|e| e.to_string())?;
    let coll = last
        .clone()
        .with_end_point(EndPoint::Collocation)
        .map_err(|e| e.to_string())?;
    let (a, _) = sdc_step(&u0, &last, &trap).map_err(|e| e.to_string())?;
    let (b, _) = sdc_step(&u0, &coll, &trap).map_err(|e| e.to_string())?;
    let gap = state_gap(&a, &b);
    if gap <= 1e-13 {
        Ok(format!("gap {gap:.1e}"))
    } else {
        Err(format!("gap {gap:.1e} > 1e-13"))
    }
}

fn sweeps_match_matrix_form() -> Result<String, String> {
    let (trap, u0) = table1();
    let params = PenningParams::default();
    let dt = 0.05;
    let mut worst: f64 = 0.0;
    for m in [2, 3, 5] {
        let rule =
            QuadratureRule::new(NodeFamily::GaussLobatto, m, 0.0, dt).map_err(|e| e.to_string())?;
        for k in 1..=3 {
            let ops = assemble_operators(&params, &rule, k, EndPoint::LastNode)
                .map_err(|e| e.to_string())?;
            let cfg = StepConfig::new(rule.clone(), IterationMode::FixedIterations(k))
                .map_err(|e| e.to_string())?;
            let (s, _) = sdc_step(&u0, &cfg, &trap).map_err(|e| e.to_string())?;
            let u = DMatrix::from_column_slice(6, 1, &[10.0, 0.0, 0.0, 100.0, 0.0, 100.0]);
            let p = &ops.p_tilde_sdc * &u;
            let want =
                ParticleState::single(Vec3::new(p[0], p[1], p[2]), Vec3::new(p[3], p[4], p[5]));
            worst = worst.max(state_gap(&s, &want));
        }
    }
    if worst <= 1e-12 {
        Ok(format!("gap {worst:.1e}"))
    } else {
        Err(format!("gap {worst:.1e} > 1e-12"))
    }
}

fn iteration_converges_for_small_steps() -> Result<String, String> {
    let params = PenningParams::default();
    let an = PointAnalyzer::new(NodeFamily::GaussLobatto, 3, 1e-3, EndPoint::LastNode)
        .map_err(|e| e.to_string())?;
    let k = an.iteration_matrix(&params).map_err(|e| e.to_string())?;
    let rho = crate::linear::spectral_radius(&k).map_err(|e| e.to_string())?;
    if rho < 0.05 {
        Ok(format!("rho(K) = {rho:.1e}"))
    } else {
        Err(format!("rho(K) = {rho:.3} at a tiny step"))
    }
}

const CHECKS: [(&str, CheckFn); 9] = [
    ("quadrature exactness", quadrature_exactness),
    ("two-node matrices", two_node_matrices),
    ("rotation preserves speed", rotation_preserves_speed),
    (
        "velocity update solves the trapezoidal system",
        velocity_update_solves_trapezoid,
    ),
    ("two-node sweep equals Boris", two_node_sweep_is_boris),
    (
        "single sweep equals substepped Boris",
        single_sweep_is_substepped_boris,
    ),
    ("end update equals last node", end_update_matches_last_node),
    ("sweeps equal the matrix form", sweeps_match_matrix_form),
    (
        "iteration converges for small steps",
        iteration_converges_for_small_steps,
    ),
];

pub fn run() -> Report {
    let checks = CHECKS
        .iter()
        .map(|(name, f)| match f() {
            Ok(detail) => Check {
                name,
                passed: true,
                detail,
            },
            Err(detail) => Check {
                name,
                passed: false,
                detail,
            },
        })
        .collect();
    Report { checks }
}
