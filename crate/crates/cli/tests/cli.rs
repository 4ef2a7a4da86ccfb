use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boris-sdc"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

fn assert_success(args: &[&str]) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    let out = run(args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!csv_files(dir.path()).is_empty(), "{args:?} wrote no CSV");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    let kind = args[0];
    assert!(stdout.starts_with(kind), "{stdout}");
    assert!(dir
        .path()
        .join(format!("{kind}_seed2018_config.toml"))
        .exists());
    (dir, out)
}

#[test]
fn converge_writes_ladder_and_fit() {
    let (dir, _) = assert_success(&["converge", "--steps", "64,128,256", "--iterations", "1,2"]);
    let files = csv_files(dir.path());
    assert!(
        files
            .iter()
            .any(|p| p.ends_with("converge_M3_K1-2_seed2018.csv")),
        "{files:?}"
    );
    assert!(
        files
            .iter()
            .any(|p| p.ends_with("converge_M3_K1-2_fit_seed2018.csv")),
        "{files:?}"
    );
}

#[test]
fn residual_runs() {
    assert_success(&["residual", "--steps", "256,512", "--tol", "1e-2,1e-6"]);
}

#[test]
fn work_precision_runs() {
    assert_success(&["work-precision", "--steps", "64,128", "--iterations", "1,2"]);
}

#[test]
fn energy_runs() {
    let (dir, _) = assert_success(&["energy", "--steps", "2000", "--iterations", "2"]);
    let rows = std::fs::read_to_string(dir.path().join("energy_boris_seed2018.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3);
}

#[test]
fn cloud_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cloud.toml");
    std::fs::write(
        &cfg,
        "steps = [64, 128]\n[cloud]\nparticles = 3\nrelax_steps = 10\nenergy_steps = 100\nreference_refinement = 2\n",
    )
    .unwrap();
    let out = run(
        &["cloud", "--config", cfg.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("cloud:"));
    assert!(csv_files(&dir.path().join("out")).len() >= 3);
}

#[test]
fn map_stability_runs() {
    assert_success(&["map-stability", "--grid", "5"]);
}

#[test]
fn map_stability_for_boris() {
    let (dir, _) = assert_success(&["map-stability", "--grid", "4", "--method", "boris"]);
    assert!(dir.path().join("map-stability_boris_seed2018.csv").exists());
}

#[test]
fn map_convergence_runs() {
    assert_success(&["map-convergence", "--grid", "5", "--M", "5"]);
}

#[test]
fn map_energy_runs() {
    assert_success(&["map-energy", "--grid", "5", "--iterations", "3"]);
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("selftest: 9/9 checks passed"), "{stdout}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let out = bin().args(["converge", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_parameter_names_it_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["converge", "--M", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`M`"));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    let out = run(&["converge", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergence_exits_2_with_partial_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "energy",
            "--dt",
            "1",
            "--steps",
            "5000",
            "--iterations",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergence"));
    assert!(dir.path().join("energy_boris_seed2018.csv").exists());
}

#[test]
fn missing_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["converge", "--config", "/definitely/not/here.toml"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = run(&["converge", "--steps", "32,64"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn overrides_win_over_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "m = 5\nseed = 7\nsteps = [32, 64]\niterations = [3]\n",
    )
    .unwrap();
    let out = run(
        &[
            "converge",
            "--config",
            cfg.to_str().unwrap(),
            "--M",
            "4",
            "--seed",
            "9",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let echoed = std::fs::read_to_string(dir.path().join("converge_seed9_config.toml")).unwrap();
    assert!(echoed.contains("m = 4"), "{echoed}");
    assert!(echoed.contains("seed = 9"), "{echoed}");
    assert!(dir.path().join("converge_M4_K3_seed9.csv").exists());
}

#[test]
fn thread_cap_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("BORIS_SDC_THREADS", "1")
        .args(["map-stability", "--grid", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let bad = bin()
        .env("BORIS_SDC_THREADS", "zero")
        .arg("selftest")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
