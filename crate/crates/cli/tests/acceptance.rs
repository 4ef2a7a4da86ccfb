//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use boris_sdc::boris::{boris_velocity_update, rotate};
use boris_sdc::harness::analysis::DRIFT_THRESHOLD;
use boris_sdc::harness::cloud::experiment_cloud;
use boris_sdc::harness::single::{
    convergence_with, experiment_energy, experiment_residual_control,
};
use boris_sdc::harness::{ExperimentConfig, ExperimentKind, OrderFit, Scheme};
use boris_sdc::integrators::{classical_boris_step, sdc_step, EndPoint};
use boris_sdc::linear::{
    assemble_operators, convergence_map, energy_diagnostic, energy_map, stability_map, MapGrid,
    MapMethod, MapPoint, MapSettings,
};
use boris_sdc::{
    IterationMode, NodeFamily, ParticleState, PenningParams, PenningTrap, QuadratureRule,
    StepConfig, Vec3,
};
use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Clause {
    text: String,
    ok: bool,
}

fn clause(ok: bool, text: impl Into<String>) -> Clause {
    Clause {
        text: text.into(),
        ok,
    }
}

fn verdict(n: u32, title: &str, clauses: &[Clause]) {
    let ok = clauses.iter().all(|c| c.ok);
    let details: Vec<String> = clauses
        .iter()
        .map(|c| format!("[{}] {}", if c.ok { "ok" } else { "FAIL" }, c.text))
        .collect();
    println!(
        "criterion {n}: {} {title}: {}",
        if ok { "PASS" } else { "FAIL" },
        details.join("; ")
    );
    assert!(ok, "criterion {n} failed: {}", details.join("; "));
}

fn within(elapsed: Duration, limit_s: u64) -> Clause {
    clause(
        elapsed <= Duration::from_secs(limit_s),
        format!("runtime {:.1}s <= {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn table1() -> (PenningParams, PenningTrap, ParticleState) {
    let p = PenningParams::default();
    (
        p,
        PenningTrap::external(p),
        ParticleState::single(Vec3::new(10.0, 0.0, 0.0), Vec3::new(100.0, 0.0, 100.0)),
    )
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-r..r),
        rng.random_range(-r..r),
        rng.random_range(-r..r),
    )
}

fn random_states(seed: u64, n: usize) -> Vec<ParticleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ParticleState::single(random_vec(&mut rng, 20.0), random_vec(&mut rng, 150.0)))
        .collect()
}

/// Per-particle relative gap over the position and velocity blocks.
fn gap(a: &ParticleState, b: &ParticleState) -> f64 {
    (0..a.len())
        .map(|i| {
            ((a.x[i] - b.x[i]).norm() / b.x[i].norm()).max((a.v[i] - b.v[i]).norm() / b.v[i].norm())
        })
        .fold(0.0, f64::max)
}

fn lobatto(m: usize, dt: f64) -> QuadratureRule {
    QuadratureRule::new(NodeFamily::GaussLobatto, m, 0.0, dt).unwrap()
}

fn fixed(m: usize, dt: f64, k: usize) -> StepConfig {
    StepConfig::new(lobatto(m, dt), IterationMode::FixedIterations(k)).unwrap()
}

fn order_text(f: Option<OrderFit>) -> String {
    f.map_or("no fit".into(), |f| {
        format!("{:.3} ({} pts)", f.order, f.points)
    })
}

#[test]
fn criterion_01_order_of_convergence() {
    let start = Instant::now();
    let cfg = ExperimentConfig::preset(ExperimentKind::Converge);
    let schemes = [
        Scheme::ClassicalBoris,
        Scheme::sdc(3, 1),
        Scheme::sdc(3, 2),
        Scheme::sdc(3, 3),
        Scheme::sdc(3, 4),
        Scheme::sdc(5, 2),
        Scheme::sdc(5, 4),
    ];
    let out = convergence_with(&cfg, &schemes).unwrap();
    let elapsed = start.elapsed();
    let check = |label: &str, pred: &dyn Fn(f64) -> bool, want: &str| {
        let f = out.fit(label);
        clause(
            f.is_some_and(|f| pred(f.order)),
            format!("{label} {} {want}", order_text(f)),
        )
    };
    let near = |target: f64, tol: f64| move |o: f64| (o - target).abs() <= tol;
    verdict(
        1,
        "order of convergence",
        &[
            check("boris", &near(2.0, 0.1), "= 2.0 +- 0.1"),
            check("M3K1", &|o| o >= 1.8, ">= 1.8"),
            check("M3K2", &near(4.0, 0.5), "= 4.0 +- 0.5"),
            check("M3K3", &near(4.0, 0.5), "= 4.0 +- 0.5"),
            check("M3K4", &near(4.0, 0.5), "= 4.0 +- 0.5"),
            check("M5K2", &near(4.0, 0.5), "= 4.0 +- 0.5"),
            check("M5K4", &|o| o >= 7.0, ">= 7.0"),
            within(elapsed, 60),
        ],
    );
}

#[test]
fn criterion_02_exact_reductions() {
    let (_, trap, u0) = table1();
    let mut states = random_states(21, 20);
    states.push(u0);

    let mut a: f64 = 0.0;
    let mut b: f64 = 0.0;
    let mut c: f64 = 0.0;
    for s in &states {
        for dt in [1e-3, 1e-2, 0.05] {
            let (sdc, _) = sdc_step(s, &fixed(2, dt, 1), &trap).unwrap();
            a = a.max(gap(&sdc, &classical_boris_step(s, dt, &trap).unwrap()));

            for m in [3, 4, 5] {
                let cfg = fixed(m, dt, 1);
                let (sdc, _) = sdc_step(s, &cfg, &trap).unwrap();
                let mut sub = s.clone();
                for w in cfg.rule.taus[1..].windows(2) {
                    sub = classical_boris_step(&sub, w[1] - w[0], &trap).unwrap();
                }
                b = b.max(gap(&sdc, &sub));
            }

            for m in [3, 5] {
                let mode = IterationMode::ResidualTolerance {
                    tol: 1e-13,
                    k_max: 100,
                };
                let last = StepConfig::new(lobatto(m, dt), mode).unwrap();
                let coll = last.clone().with_end_point(EndPoint::Collocation).unwrap();
                let (x, _) = sdc_step(s, &last, &trap).unwrap();
                let (y, _) = sdc_step(s, &coll, &trap).unwrap();
                c = c.max(gap(&x, &y));
            }
        }
    }
    verdict(
        2,
        "exact reductions",
        &[
            clause(
                a <= 1e-14,
                format!("M=2 one sweep vs Boris {a:.2e} <= 1e-14"),
            ),
            clause(
                b <= 1e-13,
                format!("K=1 vs substepped Boris {b:.2e} <= 1e-13"),
            ),
            clause(
                c <= 1e-13,
                format!("end update vs last node {c:.2e} <= 1e-13"),
            ),
        ],
    );
}

fn as_column(s: &ParticleState) -> DMatrix<f64> {
    DMatrix::from_column_slice(
        6,
        1,
        &[s.x[0].x, s.x[0].y, s.x[0].z, s.v[0].x, s.v[0].y, s.v[0].z],
    )
}

fn from_column(p: &DMatrix<f64>) -> ParticleState {
    ParticleState::single(Vec3::new(p[0], p[1], p[2]), Vec3::new(p[3], p[4], p[5]))
}

#[test]
fn criterion_03_sweep_matches_matrix_oracle() {
    let (params, trap, u0) = table1();
    let mut states = random_states(31, 5);
    states.push(u0);
    let mut sweep: f64 = 0.0;
    let mut coll: f64 = 0.0;
    for dt in [0.01, 0.04] {
        for m in [2, 3, 5] {
            let rule = lobatto(m, dt);
            for k in 1..=3 {
                let ops = assemble_operators(&params, &rule, k, EndPoint::LastNode).unwrap();
                for s in &states {
                    let (got, _) = sdc_step(s, &fixed(m, dt, k), &trap).unwrap();
                    sweep = sweep.max(gap(&got, &from_column(&(&ops.p_tilde_sdc * as_column(s)))));
                }
            }
            let ops = assemble_operators(&params, &rule, 1, EndPoint::LastNode).unwrap();
            for s in &states {
                let (got, _) = sdc_step(s, &fixed(m, dt, 40), &trap).unwrap();
                coll = coll.max(gap(&got, &from_column(&(&ops.p_tilde_coll * as_column(s)))));
            }
        }
    }
    verdict(
        3,
        "sweep equals dense operators",
        &[
            clause(
                sweep <= 1e-12,
                format!("k sweeps vs P^k action {sweep:.2e} <= 1e-12"),
            ),
            clause(
                coll <= 1e-10,
                format!("converged vs collocation solve {coll:.2e} <= 1e-10"),
            ),
        ],
    );
}

fn grid101() -> MapGrid {
    MapGrid::square(101)
}

fn stable_count(points: &[MapPoint]) -> usize {
    points.iter().filter(|p| p.numerical_stable).count()
}

#[test]
fn criterion_04_stability_maps() {
    let start = Instant::now();
    let grid = grid101();
    let mut clauses = Vec::new();
    let boris = stability_map(&grid, MapMethod::ClassicalBoris, &MapSettings::lobatto(3)).unwrap();
    let boris_stable = stable_count(&boris);
    let wrong: Vec<&MapPoint> = boris
        .iter()
        .filter(|p| p.eps_omega_e_dt > 2.05 && p.numerical_stable)
        .collect();
    let example = wrong.first().map_or(String::new(), |p| {
        format!(
            ", e.g. ({:.2}, {:.2}) rho {:.6}",
            p.eps_omega_e_dt, p.omega_b_dt, p.value
        )
    });
    clauses.push(clause(
        wrong.is_empty(),
        format!(
            "Boris stable at {} points with eps omega_E dt > 2.05{example}",
            wrong.len()
        ),
    ));
    for m in [3, 5] {
        let settings = MapSettings::lobatto(m);
        let coll = stability_map(&grid, MapMethod::Collocation, &settings).unwrap();
        let bad = coll
            .iter()
            .filter(|p| p.physical_stable && !p.numerical_stable)
            .count();
        clauses.push(clause(
            bad == 0,
            format!("M={m} collocation unstable outside the mask: {bad}"),
        ));
        let sdc = stability_map(
            &grid,
            MapMethod::BorisSdc {
                tol: 1e-12,
                k_max: 100,
            },
            &settings,
        )
        .unwrap();
        let n = stable_count(&sdc);
        clauses.push(clause(
            n >= boris_stable,
            format!("M={m} Boris-SDC stable {n} >= Boris {boris_stable}"),
        ));
    }
    clauses.push(within(start.elapsed(), 300));
    verdict(4, "stability maps", &clauses);
}

#[test]
fn criterion_05_convergence_map() {
    let base = grid101();
    let coarse = MapGrid::square(21);
    let mut clauses = Vec::new();
    for m in [3, 5] {
        let settings = MapSettings::lobatto(m);
        let mut radii = Vec::new();
        for j in 0..=7 {
            let s = 0.5f64.powi(j);
            let grid = MapGrid {
                eps_omega_e_min: coarse.eps_omega_e_min * s,
                eps_omega_e_max: coarse.eps_omega_e_max * s,
                omega_b_min: coarse.omega_b_min * s,
                omega_b_max: coarse.omega_b_max * s,
                ..coarse
            };
            let pts = convergence_map(&grid, &settings).unwrap();
            radii.push(pts.iter().map(|p| p.value).fold(0.0, f64::max));
        }
        let decreasing = radii.windows(2).all(|w| w[1] < w[0]);
        let finest = *radii.last().unwrap();
        clauses.push(clause(
            decreasing && finest <= 0.05,
            format!(
                "M={m} max rho(K) over the grid scaled by 2^-j: {}; finest <= 0.05",
                radii
                    .iter()
                    .map(|r| format!("{r:.2e}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        ));
    }
    let map5 = convergence_map(&base, &MapSettings::lobatto(5)).unwrap();
    let above: Vec<&MapPoint> = map5
        .iter()
        .filter(|p| p.omega_b_dt >= 20.0 && p.value > 1.0)
        .collect();
    clauses.push(clause(
        !above.is_empty(),
        format!(
            "M=5 points with omega_B dt >= 20 and rho > 1: {}",
            above.len()
        ),
    ));
    verdict(5, "convergence map", &clauses);
}

#[test]
fn criterion_06_residual_control() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Residual);
    let out = experiment_residual_control(&cfg).unwrap();
    let mut clauses = Vec::new();
    for tol in [1e-2, 1e-6, 1e-10] {
        let sat = out
            .saturation
            .iter()
            .find(|s| s.tol == tol)
            .expect("tolerance in the preset");
        let ok = sat.error.is_some_and(|e| (e / tol).log10().abs() <= 1.0);
        clauses.push(clause(
            ok,
            format!(
                "tol {tol:e}: error {} at N = {}",
                sat.error.map_or("n/a".into(), |e| format!("{e:.2e}")),
                sat.n_steps.map_or("n/a".into(), |n| n.to_string())
            ),
        ));
    }
    verdict(6, "residual control (M=5)", &clauses);
}

#[test]
fn criterion_07_energy_behaviour() {
    let start = Instant::now();
    let cfg = ExperimentConfig::preset(ExperimentKind::Energy);
    assert_eq!(cfg.energy.steps, 1_000_000);
    let out = experiment_energy(&cfg).unwrap();
    let elapsed = start.elapsed();
    let boris = &out.run("boris").unwrap().drift;
    let k4 = &out.run("M3K4").unwrap().drift;
    let k8 = &out.run("M3K8").unwrap().drift;
    verdict(
        7,
        "energy behaviour",
        &[
            clause(
                !boris.drifting,
                format!(
                    "Boris slope {:.2e}, |slope| < {DRIFT_THRESHOLD:e}",
                    boris.slope
                ),
            ),
            clause(
                !k8.drifting,
                format!("M3K8 slope {:.2e}, |slope| < {DRIFT_THRESHOLD:e}", k8.slope),
            ),
            clause(
                k4.drifting && k4.slope > 0.0,
                format!("M3K4 slope {:.2e} > 0", k4.slope),
            ),
            clause(
                k8.max_error * 1e3 <= boris.max_error,
                format!(
                    "max error M3K8 {:.2e} vs Boris {:.2e}",
                    k8.max_error, boris.max_error
                ),
            ),
            within(elapsed, 600),
        ],
    );
}

fn evenly<T: Copy>(items: &[T], n: usize) -> Vec<T> {
    (0..n.min(items.len()))
        .map(|i| items[i * items.len() / n.min(items.len())])
        .collect()
}

#[test]
fn criterion_08_energy_diagnostic() {
    let grid = grid101();
    let (params, _, _) = table1();
    let mut clauses = Vec::new();
    for m in [3, 5] {
        let settings = MapSettings::lobatto(m);
        let conv = convergence_map(&grid, &settings).unwrap();
        let hhat = energy_map(
            &grid,
            MapMethod::BorisSdc {
                tol: 1e-12,
                k_max: 100,
            },
            &settings,
        )
        .unwrap();
        let good: Vec<usize> = (0..conv.len())
            .filter(|&i| conv[i].value <= 0.5 && conv[i].physical_stable)
            .collect();
        let bad: Vec<usize> = (0..conv.len()).filter(|&i| conv[i].value > 1.0).collect();
        let good = evenly(&good, 10);
        let bad = evenly(&bad, 5);
        let worst_good = good.iter().map(|&i| hhat[i].value).fold(0.0, f64::max);
        let least_bad = bad
            .iter()
            .map(|&i| hhat[i].value)
            .fold(f64::INFINITY, f64::min);
        clauses.push(clause(
            good.len() == 10 && worst_good <= 1e-8,
            format!(
                "M={m} {} convergent points, max |H_ii| {worst_good:.2e} <= 1e-8",
                good.len()
            ),
        ));
        clauses.push(clause(
            bad.len() == 5 && least_bad >= 0.1,
            format!(
                "M={m} {} divergent points, min max |H_ii| {least_bad:.2e} >= 0.1",
                bad.len()
            ),
        ));
        let zero =
            energy_diagnostic(&params, NodeFamily::GaussLobatto, m, 0.0, 1e-12, 100).unwrap();
        clauses.push(clause(zero == 0.0, format!("M={m} H at dt = 0: {zero:e}")));
    }
    verdict(8, "energy diagnostic", &clauses);
}

fn trapezoid_oracle(
    v: &Vec3,
    dt: f64,
    alpha: f64,
    e: &Vec3,
    b0: &Vec3,
    b1: &Vec3,
    c: &Vec3,
) -> Vec3 {
    let h = 0.5 * dt * alpha;
    // v x b1 written as a matrix acting on v
    let cross = Matrix3::new(0.0, b1.z, -b1.y, -b1.z, 0.0, b1.x, b1.y, -b1.x, 0.0);
    let rhs = v + dt * (alpha * e + c) + h * v.cross(b0);
    (Matrix3::identity() - h * cross).lu().solve(&rhs).unwrap()
}

#[test]
fn criterion_09_kernel_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut speed: f64 = 0.0;
    for _ in 0..10_000 {
        let v = random_vec(&mut rng, 100.0);
        let t = random_vec(&mut rng, 5.0);
        speed = speed.max((rotate(&v, &t).norm() - v.norm()).abs() / v.norm());
    }
    let mut constant: f64 = 0.0;
    let mut varying: f64 = 0.0;
    for i in 0..1000 {
        let (v, e, c) = (
            random_vec(&mut rng, 100.0),
            random_vec(&mut rng, 50.0),
            random_vec(&mut rng, 50.0),
        );
        let b0 = random_vec(&mut rng, 30.0);
        let b1 = if i % 2 == 0 {
            b0
        } else {
            random_vec(&mut rng, 30.0)
        };
        let (dt, alpha) = (rng.random_range(1e-3..0.2), rng.random_range(0.1..2.0));
        let got = boris_velocity_update(&v, dt, alpha, &e, &b0, &b1, &c);
        let want = trapezoid_oracle(&v, dt, alpha, &e, &b0, &b1, &c);
        let err = (got - want).norm() / want.norm();
        if i % 2 == 0 {
            constant = constant.max(err);
        } else {
            varying = varying.max(err);
        }
    }
    verdict(
        9,
        "kernel properties",
        &[
            clause(
                speed <= 1e-14,
                format!("rotation speed change {speed:.2e} <= 1e-14 on 1e4 inputs"),
            ),
            clause(
                constant <= 1e-13,
                format!("update vs 3x3 solve, constant B {constant:.2e} <= 1e-13"),
            ),
            clause(
                varying <= 1e-13,
                format!("update vs 3x3 solve, varying B {varying:.2e} <= 1e-13"),
            ),
        ],
    );
}

#[test]
fn criterion_10_quadrature_exactness() {
    let (a, b) = (0.3, 1.7);
    let mut q_err: f64 = 0.0;
    let mut w_err: f64 = 0.0;
    for m in [2, 3, 5, 7] {
        let r = QuadratureRule::new(NodeFamily::GaussLobatto, m, a, b).unwrap();
        for p in 0..m as i32 {
            for row in 1..=m {
                let got: f64 = (0..=m).map(|j| r.q_mat[(row, j)] * r.taus[j].powi(p)).sum();
                let want = (r.taus[row].powi(p + 1) - a.powi(p + 1)) / f64::from(p + 1);
                q_err = q_err.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
            }
        }
        for p in 0..=(2 * m as i32 - 3) {
            let got: f64 = (0..=m).map(|j| r.q[j] * r.taus[j].powi(p)).sum();
            let want = (b.powi(p + 1) - a.powi(p + 1)) / f64::from(p + 1);
            w_err = w_err.max((got - want).abs() / want.abs());
        }
    }
    let dt = 0.37;
    let r = lobatto(2, dt);
    let exact = (0..3).all(|j| {
        r.s[(2, j)] == [0.0, dt / 2.0, dt / 2.0][j]
            && r.sx[(2, j)] == [0.0, dt * dt / 2.0, 0.0][j]
            && r.sq[(2, j)] == [0.0, dt * dt / 4.0, dt * dt / 4.0][j]
    }) && (0..2)
        .all(|i| (0..3).all(|j| r.s[(i, j)] == 0.0 && r.sx[(i, j)] == 0.0 && r.sq[(i, j)] == 0.0));
    verdict(
        10,
        "quadrature exactness",
        &[
            clause(
                q_err <= 1e-12,
                format!("node-to-node weights to degree M-1: {q_err:.2e} <= 1e-12"),
            ),
            clause(
                w_err <= 1e-12,
                format!("full-interval weights to degree 2M-3: {w_err:.2e} <= 1e-12"),
            ),
            clause(exact, "M=2 matrices S, Sx, SQ bit-exact"),
        ],
    );
}

#[test]
fn criterion_11_cloud() {
    let start = Instant::now();
    let cfg = ExperimentConfig::preset(ExperimentKind::Cloud);
    assert_eq!(cfg.cloud.particles, 20);
    let out = experiment_cloud(&cfg).unwrap();
    let elapsed = start.elapsed();
    let mut clauses = Vec::new();
    for (label, target) in [("boris", 2.0), ("M3K1", 2.0), ("M3K2", 4.0)] {
        let f = out.fit(label);
        clauses.push(clause(
            f.is_some_and(|f| (f.order - target).abs() <= 0.7),
            format!("centre-of-mass {label} {} = {target} +- 0.7", order_text(f)),
        ));
    }
    let boris = out.energy_run("boris").unwrap();
    let sdc = out.energy_run("M3K2").unwrap();
    let later = match (boris.onset, sdc.onset) {
        (Some(b), Some(s)) => s > b,
        (Some(_), None) => true,
        (None, _) => false,
    };
    clauses.push(clause(
        later,
        format!("drift onset Boris {:?} < M3K2 {:?}", boris.onset, sdc.onset),
    ));
    clauses.push(clause(
        boris.initial_hash == sdc.initial_hash,
        "identical initial ensemble",
    ));
    clauses.push(within(elapsed, 600));
    verdict(11, "cloud", &clauses);
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_determinism() {
    let root = tempfile::tempdir().unwrap();
    let cloud_cfg = root.path().join("cloud.toml");
    std::fs::write(
        &cloud_cfg,
        "steps = [64, 128]\n[cloud]\nparticles = 8\nrelax_steps = 100\nenergy_steps = 2000\nreference_refinement = 4\n",
    )
    .unwrap();
    let cloud_cfg = cloud_cfg.to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["converge".into()],
        vec![
            "work-precision".into(),
            "--steps".into(),
            "32,64,128,256".into(),
        ],
        vec!["energy".into(), "--steps".into(), "20000".into()],
        vec!["cloud".into(), "--config".into(), cloud_cfg],
        vec!["map-stability".into(), "--grid".into(), "31".into()],
        vec![
            "map-energy".into(),
            "--grid".into(),
            "31".into(),
            "--M".into(),
            "5".into(),
        ],
    ];
    let mut clauses = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (rep, threads) in ["1", "4", "4"].iter().enumerate() {
            let dir = root.path().join(format!("run{i}_{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_boris-sdc"))
                .env("BORIS_SDC_THREADS", threads)
                .args(args)
                .arg("--out")
                .arg(&dir)
                .output()
                .unwrap()
                .status;
            assert!(status.success(), "{args:?}");
            outputs.push(read_csvs(&dir));
        }
        let same = !outputs[0].is_empty() && outputs.windows(2).all(|w| w[0] == w[1]);
        clauses.push(clause(
            same,
            format!("{} ({} CSV files)", args[0], outputs[0].len()),
        ));
    }
    verdict(12, "determinism", &clauses);
}
