use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use zonal_core::dynamics::{self, InitialCondition, RunConfig, Simulation};
use zonal_core::experiments::{self, SweepError};
use zonal_core::io::{self, Checkpoint, Manifest};
use zonal_core::rotation::RotationOps;
use zonal_core::{toy, Basis, Error, Geometry, Result};

/// Thread count for the worker pool; defaults to all cores.
const THREADS_ENV: &str = "ZONAL_THREADS";

#[derive(Parser)]
#[command(name = "zonal", version, about = "Rotating Euler flow on a biaxial ellipsoid")]
struct Cli {
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an eigenbasis, print its spectrum and optionally save it.
    Basis(BasisArgs),
    /// Integrate one configuration.
    Simulate(SimulateArgs),
    /// Zonalization error against rotation rate, with a log-log slope fit.
    Sweep(SweepArgs),
    /// Finite-dimensional time-averaging bound check.
    ToyAverage(ToyArgs),
    /// Operator diagnostics over a seeded ensemble.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long)]
    b: f64,
    #[arg(long)]
    lmax: usize,
    /// Defaults to `2·lmax + 8`.
    #[arg(long)]
    ntheta: Option<usize>,
    /// Defaults to `4·lmax + 8`.
    #[arg(long)]
    nphi: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Write `checkpoint.bin` every this many steps (0: only at the end).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: u64,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated, increasing.
    #[arg(long, value_delimiter = ',', default_values_t = [50.0, 100.0, 200.0, 400.0, 800.0])]
    omegas: Vec<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Number of operators; seeds are `seed, seed + 1, …`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [1e2, 1e3, 1e4])]
    omegas: Vec<f64>,
    #[arg(long = "T", default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = 3)]
    k: i32,
    #[arg(long, default_value_t = 1)]
    j: i32,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 21)]
    lmax: usize,
    #[arg(long, default_value_t = 64)]
    ntheta: usize,
    #[arg(long, default_value_t = 128)]
    nphi: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Draw purely zonal samples.
    #[arg(long)]
    zonal: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let quiet = cli.quiet;
    let outcome = match cli.command {
        Command::Basis(a) => cmd_basis(a, quiet),
        Command::Simulate(a) => cmd_simulate(a, quiet),
        Command::Sweep(a) => cmd_sweep(a, quiet),
        Command::ToyAverage(a) => cmd_toy_average(a, quiet),
        Command::Diagnose(a) => cmd_diagnose(a, quiet),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invalid_input() { 2 } else { 1 })
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn progress(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_basis(a: BasisArgs, quiet: bool) -> Result<ExitCode> {
    let n_theta = a.ntheta.unwrap_or(2 * a.lmax + 8);
    let n_phi = a.nphi.unwrap_or(4 * a.lmax + 8);
    let basis = Basis::new(Geometry::new(a.b, n_theta, n_phi)?, a.lmax)?;
    progress(quiet, format!("# b = {}  l_max = {}  grid {} x {}", a.b, a.lmax, n_theta, n_phi));
    progress(quiet, "m,l,lambda");
    for t in basis.tables() {
        for (i, lam) in t.eigenvalues.iter().enumerate() {
            progress(quiet, format!("{},{},{}", t.m, t.m.max(1) + i, io::fmt_f64(*lam)));
        }
    }
    if let Some(out) = a.out {
        io::save_basis(&out, &basis)?;
        progress(quiet, format!("wrote {}", out.display()));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(a: SimulateArgs, quiet: bool) -> Result<ExitCode> {
    let resumed = a.resume.as_deref().map(io::load_checkpoint).transpose()?;
    let mut config = match (&a.config, &resumed) {
        (Some(path), _) => io::read_config(path)?,
        (None, Some(cp)) => cp.config.clone(),
        (None, None) => return Err(Error::Config("--config or --resume is required".into())),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    ensure_dir(&a.out_dir)?;
    let mut manifest = Manifest::new("simulate", config.seed, io::format_config(&config));
    let mut sim = match resumed {
        Some(cp) => {
            if a.config.is_some() && !same_run(&cp.config, &config) {
                return Err(Error::Config("checkpoint was written for a different configuration".into()));
            }
            Simulation::resume(config.clone(), cp.state, cp.dt)?
        }
        None => Simulation::new(config.clone())?,
    };
    progress(quiet, format!("dt = {}  steps = {}", sim.dt, sim.n_steps));
    let every = a.checkpoint_every;
    let ckpt_path = a.out_dir.join("checkpoint.bin");
    let report_every = (sim.n_steps / 10).max(1);
    sim.run_with(|s| {
        let step = s.state.step_count;
        if every > 0 && step % every == 0 {
            let cp = Checkpoint { config: s.config.clone(), dt: s.dt, state: s.state.clone() };
            io::write_atomic(&ckpt_path, &io::encode_checkpoint(&cp)?)?;
        }
        if step % report_every == 0 {
            progress(quiet, format!("t = {:.6}  step {step}", s.state.t));
        }
        Ok(())
    })?;
    manifest.write_output(&a.out_dir, "diagnostics.csv", io::diagnostics_csv(&sim.diagnostics).as_bytes())?;
    let cp = Checkpoint { config: sim.config.clone(), dt: sim.dt, state: sim.state.clone() };
    manifest.write_output(&a.out_dir, "checkpoint.bin", &io::encode_checkpoint(&cp)?)?;
    let ubar = dynamics::time_average_stream(&sim.state)?;
    let err = experiments::zonalization_error_stream(sim.basis(), &ubar, config.k.max(3))?;
    let summary = format!(
        "energy_drift,enstrophy_drift,max_hk_norm,zonalization_error\n{},{},{},{}\n",
        io::fmt_f64(sim.diagnostics.energy_drift()),
        io::fmt_f64(sim.diagnostics.enstrophy_drift()),
        io::fmt_f64(sim.diagnostics.max_hk_norm()),
        io::fmt_f64(err)
    );
    manifest.write_output(&a.out_dir, "summary.csv", summary.as_bytes())?;
    manifest.finish(&a.out_dir)?;
    progress(quiet, format!("energy drift {:.3e}", sim.diagnostics.energy_drift()));
    Ok(ExitCode::SUCCESS)
}

/// Everything except the horizon must agree for a resume to make sense.
fn same_run(a: &RunConfig, b: &RunConfig) -> bool {
    RunConfig { t_final: b.t_final, ..a.clone() } == *b
}

fn cmd_sweep(a: SweepArgs, quiet: bool) -> Result<ExitCode> {
    let mut config = io::read_config(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    ensure_dir(&a.out_dir)?;
    let mut manifest = Manifest::new("sweep", config.seed, io::format_config(&config));
    progress(quiet, format!("sweeping ω over {:?}", a.omegas));
    match experiments::omega_sweep(&config, &a.omegas) {
        Ok(result) => {
            for r in &result.rows {
                progress(quiet, format!("ω = {}  error = {:.6e}  ({:.1} s)", r.omega, r.error, r.runtime_s));
            }
            manifest.write_output(&a.out_dir, "sweep.csv", io::sweep_csv(&result).as_bytes())?;
            manifest.write_output(&a.out_dir, "sweep_fit.csv", io::sweep_fit_csv(&result).as_bytes())?;
            manifest.write_output(&a.out_dir, "sweep_loglog.dat", io::sweep_loglog(&result).as_bytes())?;
            let script = io::sweep_gnuplot("sweep_loglog.dat", &result);
            manifest.write_output(&a.out_dir, "sweep.gp", script.as_bytes())?;
            manifest.finish(&a.out_dir)?;
            progress(
                quiet,
                format!("slope = {:.4} ± {:.4}", result.fit.slope, result.fit.slope_half_width),
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(SweepError { omega, completed, source }) => {
            let partial = experiments::SweepResult {
                k: config.k,
                seed: config.seed,
                rows: completed,
                fit: experiments::LinearFit { slope: f64::NAN, intercept: f64::NAN, slope_half_width: f64::NAN, n: 0 },
            };
            manifest.write_output(&a.out_dir, "sweep.csv", io::sweep_csv(&partial).as_bytes())?;
            manifest.finish(&a.out_dir)?;
            eprintln!("sweep aborted at ω = {omega}; {} completed rows kept", partial.rows.len());
            Err(source)
        }
    }
}

fn cmd_toy_average(a: ToyArgs, quiet: bool) -> Result<ExitCode> {
    if a.seeds == 0 {
        return Err(Error::InvalidParameter("--seeds must be at least 1".into()));
    }
    ensure_dir(&a.out_dir)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let echo = format!("dim = {}\nseeds = {}\nseed = {}\nomegas = {:?}\nT = {}\n", a.dim, a.seeds, a.seed, a.omegas, a.t_final);
    let mut manifest = Manifest::new("toy-average", a.seed, echo);
    let report = toy::verify(a.dim, &seeds, &a.omegas, a.t_final)?;
    for r in &report.rows {
        progress(
            quiet,
            format!("seed {}  ω = {:e}  lhs = {:.4e}  rhs = {:.4e}  {}", r.seed, r.omega, r.lhs, r.rhs, if r.holds() { "ok" } else { "VIOLATED" }),
        );
    }
    manifest.write_output(&a.out_dir, "toy.csv", io::toy_csv(&report).as_bytes())?;
    manifest.finish(&a.out_dir)?;
    progress(quiet, format!("slope = {:.4}", report.slope));
    if report.all_hold() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("bound violated in at least one row");
        Ok(ExitCode::from(1))
    }
}

fn cmd_diagnose(a: DiagnoseArgs, quiet: bool) -> Result<ExitCode> {
    if a.samples == 0 {
        return Err(Error::InvalidParameter("--samples must be at least 1".into()));
    }
    ensure_dir(&a.out_dir)?;
    let basis = Arc::new(Basis::new(Geometry::new(a.b, a.ntheta, a.nphi)?, a.lmax)?);
    let rot = RotationOps::new(Arc::clone(&basis));
    let ic = if a.zonal {
        InitialCondition::Zonal { l_cut: None }
    } else {
        InitialCondition::RandomBandLimited { l_cut: None }
    };
    let echo = format!(
        "b = {}\nk = {}\nj = {}\nsamples = {}\nl_max = {}\nn_theta = {}\nn_phi = {}\nseed = {}\nzonal = {}\n",
        a.b, a.k, a.j, a.samples, a.lmax, a.ntheta, a.nphi, a.seed, a.zonal
    );
    let mut manifest = Manifest::new("diagnose", a.seed, echo);
    let mut csv = String::from("sample,gap_lhs,gap_rhs,gap_ratio,commutation_residual,advection_num,advection_den\n");
    for i in 0..a.samples {
        let cfg = RunConfig {
            b: a.b,
            l_max: a.lmax,
            n_theta: a.ntheta,
            n_phi: a.nphi,
            k: a.k,
            seed: a.seed + i as u64,
            initial_condition: ic.clone(),
            ..RunConfig::default()
        };
        let psi = dynamics::initial_stream(&basis, &cfg)?;
        let (lhs, rhs) = rot.key_estimate_gap(&psi, a.k)?;
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        let comm = rot.commutation_residual(&psi, a.j)?;
        let (num, den) = rot.advection_commutator_residual(&psi, a.j.max(1))?;
        csv += &format!(
            "{i},{},{},{},{},{},{}\n",
            io::fmt_f64(lhs),
            io::fmt_f64(rhs),
            io::fmt_f64(ratio),
            io::fmt_f64(comm),
            io::fmt_f64(num),
            io::fmt_f64(den)
        );
        progress(quiet, format!("sample {i}: gap ratio {ratio:.6}  commutation {comm:.3e}"));
    }
    manifest.write_output(&a.out_dir, "diagnose.csv", csv.as_bytes())?;
    manifest.finish(&a.out_dir)?;
    Ok(ExitCode::SUCCESS)
}
