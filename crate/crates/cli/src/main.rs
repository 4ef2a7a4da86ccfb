use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boris_sdc::harness::{
    run_experiment, ExperimentConfig, ExperimentKind, MethodKind, PAPER_SCALE_WARNING,
};
use boris_sdc::{selftest, Error, NodeFamily, Precision};
use clap::{Args, Parser, Subcommand};

/// Boris-SDC experiment driver.
#[derive(Debug, Parser)]
#[command(name = "boris-sdc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Order of convergence over a time-step ladder.
    Converge(Overrides),
    /// Final error against the residual tolerance.
    Residual(Overrides),
    /// Error against right-hand side evaluations.
    WorkPrecision(Overrides),
    /// Long-time relative energy error.
    Energy(Overrides),
    /// Particle cloud: centre-of-mass error and energy ratio.
    Cloud(Overrides),
    /// Spectral radius of the step operator on a parameter grid.
    MapStability(Overrides),
    /// Spectral radius of the SDC iteration matrix on a parameter grid.
    MapConvergence(Overrides),
    /// Energy error diagnostic on a parameter grid.
    MapEnergy(Overrides),
    /// Quadrature, kernel and equivalence checks.
    Selftest,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML file with experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of quadrature nodes.
    #[arg(long = "M", value_name = "M")]
    m: Option<usize>,
    /// Sweep counts, comma separated. Map experiments use the first as a fixed sweep count.
    #[arg(long, value_delimiter = ',')]
    iterations: Option<Vec<usize>>,
    /// Residual tolerances, comma separated. Map experiments use the first.
    #[arg(long, value_delimiter = ',')]
    tol: Option<Vec<f64>>,
    /// Step counts of the ladder, comma separated; the energy run takes a single count.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    /// Time step of the energy runs; ladder experiments use the single step count t_end/dt.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["lobatto", "legendre"])]
    nodes: Option<String>,
    #[arg(long, value_parser = ["std", "compensated"])]
    precision: Option<String>,
    #[arg(long, value_parser = ["boris", "verlet", "boris-sdc", "picard", "collocation"])]
    method: Option<String>,
    /// Grid points per axis of the map experiments.
    #[arg(long)]
    grid: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Full-length runs of the original study.
    #[arg(long)]
    paper_scale: bool,
}

fn exit_status(e: &Error) -> u8 {
    match e {
        Error::Parameter { .. } | Error::Config(_) => 1,
        Error::Divergence { .. } | Error::Numerical(_) | Error::UnsupportedRegime(_) => 2,
        Error::Io { .. } | Error::Csv(_) => 3,
    }
}

fn param(name: &str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name: name.into(),
        reason: reason.into(),
    }
}

fn build_config(kind: ExperimentKind, o: &Overrides) -> Result<ExperimentConfig, Error> {
    let preset = ExperimentConfig::preset(kind);
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::load(path, &preset)?,
        None => preset,
    };
    cfg.kind = Some(kind);
    let is_map = matches!(
        kind,
        ExperimentKind::MapStability | ExperimentKind::MapConvergence | ExperimentKind::MapEnergy
    );
    if o.paper_scale && !cfg.paper_scale {
        cfg.apply_paper_scale();
    }
    if let Some(out) = &o.out {
        cfg.output = out.clone();
    }
    if let Some(m) = o.m {
        cfg.m = m;
    }
    if let Some(it) = &o.iterations {
        if is_map {
            cfg.map.sweeps = it.first().copied();
        } else if kind == ExperimentKind::Cloud {
            cfg.iterations = it.clone();
            if let Some(&k) = it.iter().max() {
                cfg.cloud.energy_iterations = k;
            }
        } else {
            cfg.iterations = it.clone();
        }
    }
    if let Some(tol) = &o.tol {
        if is_map {
            cfg.map.tol = *tol.first().ok_or_else(|| param("tol", "needs a value"))?;
        } else {
            cfg.tolerances = tol.clone();
        }
    }
    if let Some(steps) = &o.steps {
        if kind == ExperimentKind::Energy {
            match steps.as_slice() {
                [n] => cfg.energy.steps = *n,
                _ => return Err(param("steps", "the energy run takes a single step count")),
            }
        } else {
            cfg.steps = steps.clone();
        }
    }
    if let Some(dt) = o.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(param("dt", "time step must be positive"));
        }
        match kind {
            ExperimentKind::Energy => cfg.energy.dt = dt,
            ExperimentKind::Cloud => cfg.cloud.energy_dt = dt,
            _ if is_map => {
                return Err(param("dt", "map grids are given in units of the time step"))
            }
            _ => {
                let n = (cfg.t_end / dt).round();
                if n < 1.0 || ((n * dt - cfg.t_end) / cfg.t_end).abs() > 1e-12 {
                    return Err(param(
                        "dt",
                        format!("t_end = {} is not a multiple of dt = {dt}", cfg.t_end),
                    ));
                }
                cfg.steps = vec![n as usize];
            }
        }
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(nodes) = &o.nodes {
        cfg.nodes = nodes.parse::<NodeFamily>()?;
    }
    if let Some(p) = &o.precision {
        cfg.precision = p.parse::<Precision>()?;
    }
    if let Some(method) = &o.method {
        cfg.method = method.parse::<MethodKind>()?;
    }
    if let Some(n) = o.grid {
        if n == 0 {
            return Err(param("grid", "needs at least one point per axis"));
        }
        cfg.map.grid.n_eps_omega_e = n;
        cfg.map.grid.n_omega_b = n;
    }
    if o.sequential {
        cfg.parallel = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_effective_config(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<PathBuf, Error> {
    let dir: &Path = &cfg.output;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let path = dir.join(format!("{}_seed{}_config.toml", kind.name(), cfg.seed));
    std::fs::write(&path, cfg.to_toml_string()?).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

fn run(kind: ExperimentKind, o: &Overrides) -> Result<String, Error> {
    let cfg = build_config(kind, o)?;
    if cfg.paper_scale {
        eprintln!("warning: {PAPER_SCALE_WARNING}");
    }
    write_effective_config(&cfg, kind)?;
    let outcome = run_experiment(&cfg, kind)?;
    let summary = outcome.summary();
    match outcome.write(&cfg) {
        Ok(paths) => {
            eprintln!("wrote {} file(s) to {}", paths.len(), cfg.output.display());
            Ok(summary)
        }
        Err(e) => {
            println!("{summary}");
            Err(e)
        }
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("BORIS_SDC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        param(
            "BORIS_SDC_THREADS",
            format!("expected a positive integer, got `{raw}`"),
        )
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(exit_status(&e));
    }
    let (kind, overrides) = match &cli.command {
        Command::Selftest => {
            let report = selftest::run();
            for c in &report.checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            println!(
                "selftest: {}/{} checks passed",
                report.passed(),
                report.checks.len()
            );
            return ExitCode::from(if report.all_passed() { 0 } else { 2 });
        }
        Command::Converge(o) => (ExperimentKind::Converge, o),
        Command::Residual(o) => (ExperimentKind::Residual, o),
        Command::WorkPrecision(o) => (ExperimentKind::WorkPrecision, o),
        Command::Energy(o) => (ExperimentKind::Energy, o),
        Command::Cloud(o) => (ExperimentKind::Cloud, o),
        Command::MapStability(o) => (ExperimentKind::MapStability, o),
        Command::MapConvergence(o) => (ExperimentKind::MapConvergence, o),
        Command::MapEnergy(o) => (ExperimentKind::MapEnergy, o),
    };
    match run(kind, overrides) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}
