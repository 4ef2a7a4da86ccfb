use super::*;
use crate::fields::{FreeSpace, PenningParams, PenningTrap};
use crate::quadrature::{NodeFamily, QuadratureRule};

fn rel(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn table1() -> (PenningTrap, ParticleState) {
    let trap = PenningTrap::external(PenningParams::default());
    let u0 = ParticleState::single(Vec3::new(10.0, 0.0, 0.0), Vec3::new(100.0, 0.0, 100.0));
    (trap, u0)
}

fn lobatto(m: usize, dt: f64) -> QuadratureRule {
    QuadratureRule::new(NodeFamily::GaussLobatto, m, 0.0, dt).unwrap()
}

/// Uniform electric field, no magnetic field.
struct ConstantForce(Vec3);

impl ForceModel for ConstantForce {
    fn alpha(&self) -> f64 {
        1.0
    }
    fn electric_field(&self, _x: &[Vec3], out: &mut [Vec3]) {
        out.iter_mut().for_each(|e| *e = self.0);
    }
    fn magnetic_field(&self, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
}

#[test]
fn one_sweep_on_two_lobatto_nodes_is_a_boris_step() {
    let (trap, u0) = table1();
    for dt in [0.1, 0.01, 1.0 / 64.0] {
        let cfg = StepConfig::new(lobatto(2, dt), IterationMode::FixedIterations(1)).unwrap();
        let (sdc, _) = sdc_step(&u0, &cfg, &trap).unwrap();
        let boris = classical_boris_step(&u0, dt, &trap).unwrap();
        assert!(rel(&sdc.x[0], &boris.x[0]) <= 1e-14, "x {dt}");
        assert!(rel(&sdc.v[0], &boris.v[0]) <= 1e-14, "v {dt}");
    }
}

#[test]
fn first_sweep_is_substepped_boris() {
    let (trap, u0) = table1();
    let dt = 0.05;
    for m in [2, 3, 4, 5, 7] {
        let rule = lobatto(m, dt);
        let mut ws = SweepWorkspace::new(m, 1);
        ws.initialize(&u0, &trap, false);
        ws.sdc_sweep(&rule, &trap, 0).unwrap();
        let mut s = u0.clone();
        for j in 1..=m {
            if rule.dtau[j - 1] > 0.0 {
                s = classical_boris_step(&s, rule.dtau[j - 1], &trap).unwrap();
            }
            assert!(rel(&ws.position(j, 0), &s.x[0]) <= 1e-13, "M={m} node {j}");
            assert!(rel(&ws.velocity(j, 0), &s.v[0]) <= 1e-13, "M={m} node {j}");
        }
    }
}

#[test]
fn converged_end_update_equals_last_node() {
    let (trap, u0) = table1();
    for m in [3, 5] {
        let rule = lobatto(m, 0.01);
        let cfg = StepConfig::new(
            rule,
            IterationMode::ResidualTolerance {
                tol: 1e-12,
                k_max: 50,
            },
        )
        .unwrap();
        let mut ws = SweepWorkspace::new(m, 1);
        ws.initialize(&u0, &trap, false);
        let rep = iterate_step(&mut ws, &cfg, &trap, 0).unwrap();
        assert!(!rep.kmax_exhausted);
        let end = ws.collocation_end_update(&cfg.rule);
        assert!(rel(&end.x[0], &ws.position(m, 0)) <= 1e-13);
        assert!(rel(&end.v[0], &ws.velocity(m, 0)) <= 1e-13);
    }
}

#[test]
fn force_free_motion_is_straight_drift() {
    let u0 = ParticleState::new(
        vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 0.0)],
        vec![Vec3::new(0.5, -0.25, 2.0), Vec3::new(0.0, 0.0, 0.0)],
    );
    let dt = 0.5;
    let rule = lobatto(4, dt);
    let mut ws = SweepWorkspace::new(4, 2);
    ws.initialize(&u0, &FreeSpace, false);
    ws.sdc_sweep(&rule, &FreeSpace, 0).unwrap();
    for m in 0..=4 {
        for i in 0..2 {
            let t = rule.taus[m];
            assert_eq!(ws.position(m, i), u0.x[i] + t * u0.v[i]);
            assert_eq!(ws.velocity(m, i), u0.v[i]);
        }
    }
    let end = ws.collocation_end_update(&rule);
    for i in 0..2 {
        assert_eq!(end.x[i], u0.x[i] + dt * u0.v[i]);
    }
    let boris = classical_boris_step(&u0, dt, &FreeSpace).unwrap();
    assert_eq!(boris.x[0], u0.x[0] + dt * u0.v[0]);
}

#[test]
fn residual_vanishes_for_resting_free_particle() {
    let u0 = ParticleState::single(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros());
    let rule = lobatto(3, 0.3);
    let mut ws = SweepWorkspace::new(3, 1);
    ws.initialize(&u0, &FreeSpace, false);
    assert_eq!(ws.residual_norm(&rule), 0.0);
}

#[test]
fn initial_residual_is_nonzero_with_force() {
    let (trap, u0) = table1();
    let rule = lobatto(3, 0.01);
    let mut ws = SweepWorkspace::new(3, 1);
    ws.initialize(&u0, &trap, false);
    assert!(ws.residual_norm(&rule) > 0.0);
    for m in 0..=3 {
        assert_eq!(ws.position(m, 0), u0.x[0]);
        assert_eq!(ws.velocity(m, 0), u0.v[0]);
    }
}

#[test]
fn midpoint_rule_is_exact_for_constant_force() {
    let a = Vec3::new(0.3, -2.0, 1.5);
    let model = ConstantForce(a);
    let dt = 0.7;
    let rule = QuadratureRule::new(NodeFamily::GaussLegendre, 1, 0.0, dt).unwrap();
    let u0 = ParticleState::single(Vec3::new(1.0, 0.0, -1.0), Vec3::new(2.0, 1.0, 0.0));
    let cfg = StepConfig::new(rule, IterationMode::FixedIterations(3)).unwrap();
    let (out, _) = sdc_step(&u0, &cfg, &model).unwrap();
    let x = u0.x[0] + dt * u0.v[0] + 0.5 * dt * dt * a;
    let v = u0.v[0] + dt * a;
    assert!(rel(&out.x[0], &x) <= 1e-15);
    assert!(rel(&out.v[0], &v) <= 1e-15);
}

#[test]
fn force_evaluation_count() {
    let (trap, u0) = table1();
    for (m, k) in [(3, 1), (3, 4), (5, 2)] {
        let dt = 0.01;
        let cfg = StepConfig::new(lobatto(m, dt), IterationMode::FixedIterations(k)).unwrap();
        let n = 7;
        let traj = run_trajectory(
            &u0,
            n,
            dt,
            &Method::Iterated(cfg.clone()),
            &trap,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.rhs_evals, (n * (m * k + 1)) as u64);
        assert_eq!(traj.total_iterations, (n * k) as u64);

        let mut per_node = cfg;
        per_node.per_node_init = true;
        let traj = run_trajectory(
            &u0,
            n,
            dt,
            &Method::Iterated(per_node),
            &trap,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.rhs_evals, (n * (m * k + m + 1)) as u64);
    }
    let traj = run_trajectory(
        &u0,
        9,
        0.01,
        &Method::ClassicalBoris,
        &trap,
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(traj.rhs_evals, 10);
}

#[test]
fn tolerance_mode_counts_iterations() {
    let (trap, u0) = table1();
    let dt = 1.0 / 64.0;
    let cfg = StepConfig::new(
        lobatto(5, dt),
        IterationMode::ResidualTolerance {
            tol: 1e-10,
            k_max: 40,
        },
    )
    .unwrap();
    let traj = run_trajectory(
        &u0,
        20,
        dt,
        &Method::Iterated(cfg),
        &trap,
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(traj.kmax_hits, 0);
    assert_eq!(traj.rhs_evals, 20 + 5 * traj.total_iterations);
    for s in &traj.samples[1..] {
        assert!(s.residual <= 1e-10);
        assert!(s.iterations >= 1);
    }
}

#[test]
fn kmax_exhaustion_is_flagged_not_fatal() {
    let (trap, u0) = table1();
    let dt = 1.0 / 16.0;
    let cfg = StepConfig::new(
        lobatto(3, dt),
        IterationMode::ResidualTolerance {
            tol: 1e-300,
            k_max: 2,
        },
    )
    .unwrap();
    let traj = run_trajectory(
        &u0,
        3,
        dt,
        &Method::Iterated(cfg),
        &trap,
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(traj.kmax_hits, 3);
    assert_eq!(traj.total_iterations, 6);
}

#[test]
fn converged_iterate_is_a_fixed_point() {
    let (trap, u0) = table1();
    let m = 5;
    let rule = lobatto(m, 1.0 / 64.0);
    let mut ws = SweepWorkspace::new(m, 1);
    ws.initialize(&u0, &trap, false);
    let mut r = f64::INFINITY;
    for _ in 0..60 {
        ws.sdc_sweep(&rule, &trap, 0).unwrap();
        r = ws.residual_norm(&rule);
        if r <= 1e-12 {
            break;
        }
    }
    assert!(r <= 1e-12);
    let before = ws.cur.clone();
    ws.sdc_sweep(&rule, &trap, 0).unwrap();
    for j in 1..=m {
        let x_old = u0.x[0] + before.dx[j];
        assert!(rel(&ws.position(j, 0), &x_old) <= 1e-10);
        assert!(rel(&ws.velocity(j, 0), &before.v[j]) <= 1e-10);
    }
}

#[test]
fn residual_decreases_monotonically_when_converging() {
    let (trap, u0) = table1();
    for (m, dt) in [(3, 1.0 / 64.0), (5, 1.0 / 128.0), (3, 1.0 / 256.0)] {
        let rule = lobatto(m, dt);
        let mut ws = SweepWorkspace::new(m, 1);
        ws.initialize(&u0, &trap, false);
        let mut prev = ws.residual_norm(&rule);
        for _ in 0..40 {
            ws.sdc_sweep(&rule, &trap, 0).unwrap();
            let r = ws.residual_norm(&rule);
            if r <= 1e-12 {
                break;
            }
            assert!(r < prev, "M={m} dt={dt}: {r} >= {prev}");
            prev = r;
        }
    }
}

#[test]
fn picard_sweep_contracts_for_small_steps() {
    let (trap, u0) = table1();
    let rule = lobatto(3, 1e-4);
    let mut ws = SweepWorkspace::new(3, 1);
    ws.initialize(&u0, &trap, false);
    let r0 = ws.residual_norm(&rule);
    ws.picard_sweep(&rule, &trap, 0).unwrap();
    let r1 = ws.residual_norm(&rule);
    assert!(r1 * 10.0 <= r0, "{r1} vs {r0}");
}

#[test]
fn picard_reaches_free_drift_in_one_sweep() {
    let u0 = ParticleState::single(Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 4.0, 0.5));
    let rule = QuadratureRule::new(NodeFamily::GaussLegendre, 3, 0.0, 2.0).unwrap();
    let mut ws = SweepWorkspace::new(3, 1);
    ws.initialize(&u0, &FreeSpace, false);
    ws.picard_sweep(&rule, &FreeSpace, 0).unwrap();
    assert!(ws.residual_norm(&rule) <= 1e-15);
}

#[test]
fn picard_and_sdc_share_the_fixed_point() {
    let (trap, u0) = table1();
    let dt = 1.0 / 128.0;
    let sdc = StepConfig::new(
        lobatto(3, dt),
        IterationMode::ResidualTolerance {
            tol: 1e-12,
            k_max: 100,
        },
    )
    .unwrap();
    let pic = sdc.clone().with_sweeper(Sweeper::Picard);
    let (a, _) = sdc_step(&u0, &sdc, &trap).unwrap();
    let (b, rep) = sdc_step(&u0, &pic, &trap).unwrap();
    assert!(!rep.kmax_exhausted);
    assert!(rel(&a.x[0], &b.x[0]) <= 1e-12);
    assert!(rel(&a.v[0], &b.v[0]) <= 1e-12);
}

#[test]
fn velocity_verlet_matches_boris() {
    let (trap, u0) = table1();
    let a = classical_boris_step(&u0, 0.01, &trap).unwrap();
    let b = velocity_verlet_step(&u0, 0.01, &trap).unwrap();
    assert!(rel(&a.x[0], &b.x[0]) <= 1e-15);
    assert!(rel(&a.v[0], &b.v[0]) <= 1e-14);
}

#[test]
fn circular_orbit_keeps_speed() {
    let params = PenningParams::new(1.0, 0.0, 25.0, -1.0).unwrap();
    let trap = PenningTrap::external(params);
    let mut s = ParticleState::single(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 25.0, 0.0));
    let speed = s.v[0].norm();
    for _ in 0..1000 {
        s = classical_boris_step(&s, 0.01, &trap).unwrap();
        assert!((s.v[0].norm() - speed).abs() <= 1e-13 * speed);
    }
}

#[test]
fn runner_matches_repeated_steps() {
    let (trap, u0) = table1();
    let dt = 1.0 / 32.0;
    let traj = run_trajectory(
        &u0,
        10,
        dt,
        &Method::ClassicalBoris,
        &trap,
        &RunOptions::default(),
    )
    .unwrap();
    let mut s = u0.clone();
    for _ in 0..10 {
        s = classical_boris_step(&s, dt, &trap).unwrap();
    }
    assert_eq!(traj.final_state, s);

    let cfg = StepConfig::new(lobatto(3, dt), IterationMode::FixedIterations(2)).unwrap();
    let traj = run_trajectory(
        &u0,
        10,
        dt,
        &Method::Iterated(cfg.clone()),
        &trap,
        &RunOptions::default(),
    )
    .unwrap();
    let mut s = u0.clone();
    for _ in 0..10 {
        s = sdc_step(&s, &cfg, &trap).unwrap().0;
    }
    assert_eq!(traj.final_state, s);
}

#[test]
fn compensated_run_stays_close_to_standard() {
    let (trap, u0) = table1();
    let dt = 1.0 / 64.0;
    let cfg = StepConfig::new(lobatto(3, dt), IterationMode::FixedIterations(4)).unwrap();
    let plain = run_trajectory(
        &u0,
        200,
        dt,
        &Method::Iterated(cfg.clone()),
        &trap,
        &RunOptions::default(),
    )
    .unwrap();
    let comp = cfg.with_precision(Precision::CompensatedSummation);
    let comp = run_trajectory(
        &u0,
        200,
        dt,
        &Method::Iterated(comp),
        &trap,
        &RunOptions::default(),
    )
    .unwrap();
    assert!(rel(&plain.final_state.x[0], &comp.final_state.x[0]) <= 1e-12);
}

#[test]
fn divergence_is_reported_with_partial_record() {
    let (trap, u0) = table1();
    let dt = 1.0;
    let cfg = StepConfig::new(lobatto(5, dt), IterationMode::FixedIterations(20)).unwrap();
    let opts = RunOptions {
        energy: None,
        ..Default::default()
    };
    let traj = run_trajectory(&u0, 2000, dt, &Method::Iterated(cfg), &trap, &opts).unwrap();
    let step = traj.divergence.expect("should blow up");
    assert!(step >= 1);
    assert_eq!(traj.steps_done, step - 1);
    assert!(traj.clone().into_result().is_err());
}

#[test]
fn invalid_configurations_are_rejected() {
    let rule = lobatto(3, 0.1);
    assert!(StepConfig::new(rule.clone(), IterationMode::FixedIterations(0)).is_err());
    assert!(StepConfig::new(
        rule.clone(),
        IterationMode::ResidualTolerance { tol: 0.0, k_max: 3 }
    )
    .is_err());
    assert!(StepConfig::new(
        rule,
        IterationMode::ResidualTolerance {
            tol: 1e-8,
            k_max: 0
        }
    )
    .is_err());
    let leg = QuadratureRule::new(NodeFamily::GaussLegendre, 3, 0.0, 0.1).unwrap();
    let cfg = StepConfig::new(leg, IterationMode::FixedIterations(1)).unwrap();
    assert!(cfg.with_end_point(EndPoint::LastNode).is_err());
    let (trap, u0) = table1();
    assert!(classical_boris_step(&u0, 0.0, &trap).is_err());
    assert!(run_trajectory(
        &u0,
        0,
        0.1,
        &Method::ClassicalBoris,
        &trap,
        &RunOptions::default()
    )
    .is_err());
}
