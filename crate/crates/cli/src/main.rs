// Input validation uses `!(x >= 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use casimir_core::checks::run_checks;
use casimir_core::config::{ModelKind, RunConfig};
use casimir_core::harness::{
    apply_seed, execute, fmt_num, replay, write_metrics_csv, Job, JobOutcome, SweepSpec,
};
use casimir_core::physics::{
    casimir_power, casimir_saturation, detectability_grid, log_space, CasimirDrive, DetectorModel,
    Timescales,
};
use casimir_core::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "casimir", version, about = "Casimir photon seeding of cavity superradiance")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML); built-in defaults otherwise
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random tip phases and collisions
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Dynamics model: full or reduced (default full)
    #[arg(long, global = true, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Parameter override, key=value with a dotted key (repeatable)
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic times of the configuration
    Timescales,
    /// Saturated Casimir photon number and power
    Casimir {
        /// Q times epsilon
        #[arg(long, conflicts_with = "epsilon")]
        q_epsilon: Option<f64>,
        /// Modulation depth, with the configured Q
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Detectability regions over an epsilon-Q grid, as CSV
    Detectability {
        #[arg(long, default_value_t = 1e-11)]
        eps_min: f64,
        #[arg(long, default_value_t = 1e-7)]
        eps_max: f64,
        #[arg(long, default_value_t = 1e6)]
        q_min: f64,
        #[arg(long, default_value_t = 1e11)]
        q_max: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Single run: series.csv, summary.csv, manifest
    Run,
    /// Seeded and unseeded runs plus their metrics
    Pair,
    /// Parameter sweep from a spec file
    Sweep {
        /// Sweep spec (TOML)
        #[arg(long, required_unless_present = "reference_table")]
        spec: Option<PathBuf>,
        /// Use the built-in grid of the reference table
        #[arg(long)]
        reference_table: bool,
    },
    /// Invariant and identity suite
    Check,
    /// Print configuration
    Config {
        /// Print the built-in defaults
        #[arg(long)]
        defaults: bool,
    },
    /// Re-execute a manifest and compare its outputs byte for byte
    Replay { manifest: PathBuf },
}

enum Failure {
    Usage(String),
    Numerical(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}

fn load_config(g: &Global) -> Result<RunConfig, Failure> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::reference(),
    };
    for o in &g.overrides {
        cfg = cfg.with_override(o)?;
    }
    if let Some(seed) = g.seed {
        apply_seed(&mut cfg, seed);
    }
    Ok(cfg)
}

fn out_dir(g: &Global) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("casimir-out"))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    let model = g.model.unwrap_or_default();
    match cli.command {
        Command::Timescales => timescales(&load_config(g)?),
        Command::Casimir { q_epsilon, epsilon } => casimir(&load_config(g)?, q_epsilon, epsilon),
        Command::Detectability {
            eps_min,
            eps_max,
            q_min,
            q_max,
            points,
        } => detectability(g, &load_config(g)?, [eps_min, eps_max], [q_min, q_max], points),
        Command::Run => {
            let dir = out_dir(g);
            let (outcome, _) = execute(
                Job::Run {
                    model,
                    config: load_config(g)?,
                },
                &dir,
            )?;
            if let JobOutcome::Run(r) = outcome {
                println!(
                    "peak photons {} at t = {} s; resonant ground population {}",
                    fmt_num(r.peak_photons),
                    fmt_num(r.peak_time),
                    fmt_num(r.ground_pop_resonant)
                );
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Pair => {
            let dir = out_dir(g);
            let (outcome, _) = execute(
                Job::Pair {
                    model,
                    config: load_config(g)?,
                },
                &dir,
            )?;
            if let JobOutcome::Pair(p) = outcome {
                print_rows(std::slice::from_ref(&p.2))?;
            }
            Ok(())
        }
        Command::Sweep { spec, reference_table } => {
            let mut spec = match (spec, reference_table) {
                (Some(path), _) => SweepSpec::load(&path)?,
                (None, _) => SweepSpec::reference_table(),
            };
            if let Some(seed) = g.seed {
                spec.master_seed = seed;
            }
            if let Some(m) = g.model {
                spec.model = m;
            }
            for o in &g.overrides {
                spec.base = spec.base.with_override(o)?;
            }
            let dir = out_dir(g);
            let (outcome, _) = execute(
                Job::Sweep {
                    workers: g.workers,
                    spec,
                },
                &dir,
            )?;
            if let JobOutcome::Sweep(rows) = outcome {
                print_rows(&rows)?;
            }
            Ok(())
        }
        Command::Check => check(&load_config(g)?),
        Command::Config { defaults } => {
            let cfg = if defaults { RunConfig::reference() } else { load_config(g)? };
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Replay { manifest } => {
            let dir = g.out.clone().unwrap_or_else(|| replay_dir(&manifest));
            let differing = replay(&manifest, &dir)?;
            if differing.is_empty() {
                println!("replay into {} reproduced every output", dir.display());
                Ok(())
            } else {
                let names: Vec<String> = differing.iter().map(|p| p.display().to_string()).collect();
                Err(Failure::Check(format!("outputs differ: {}", names.join(", "))))
            }
        }
    }
}

fn replay_dir(manifest: &Path) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join("replay")
}

fn print_rows(rows: &[casimir_core::harness::MetricsRow]) -> Result<(), Failure> {
    let stdout = std::io::stdout();
    write_metrics_csv(rows, stdout.lock()).map_err(|e| Failure::Usage(e.to_string()))
}

fn timescales(cfg: &RunConfig) -> Result<(), Failure> {
    let ts = Timescales::evaluate(
        &cfg.species,
        &cfg.cavity,
        cfg.beam.n_at,
        cfg.beam.temperature,
        cfg.initial.seed_photons(),
        &cfg.constants,
    )?;
    let lines = [
        ("T1 (free space)", ts.t1_free),
        ("T1cav", ts.t1_cav),
        ("T_SR", ts.t_sr),
        ("1/Gamma", ts.gamma_inv),
        ("T2*", ts.t2_star),
        ("T_D", ts.t_delay),
        ("Delta T_D", ts.t_delay_jitter),
    ];
    for (name, value) in lines {
        println!("{name:<16} = {value:.3e} s");
    }
    println!("{:<16} = {:.3e}", "Gamma*T_SR", cfg.loss_ratio());
    Ok(())
}

fn casimir(cfg: &RunConfig, q_epsilon: Option<f64>, epsilon: Option<f64>) -> Result<(), Failure> {
    let cavity = &cfg.cavity;
    let epsilon = match (q_epsilon, epsilon) {
        (Some(qe), _) => qe / cavity.quality,
        (None, Some(e)) => e,
        (None, None) => return Err(Failure::Usage("casimir needs --q-epsilon or --epsilon".into())),
    };
    if !(epsilon >= 0.0) {
        return Err(Failure::Usage("modulation depth must be non-negative".into()));
    }
    let drive = CasimirDrive::resonant(cavity, epsilon);
    let n_max = casimir_saturation(&drive, cavity);
    println!("Q*epsilon = {:.4}", cavity.quality * epsilon);
    println!("N_max     = {}", format_count(n_max));
    println!("P_cas     = {:.3e} W", casimir_power(&drive, cavity, &cfg.constants));
    Ok(())
}

fn format_count(n: f64) -> String {
    if !(1e-2..1e5).contains(&n) {
        format!("{n:.3e}")
    } else if n >= 10.0 {
        format!("{n:.0}")
    } else {
        format!("{n:.3}")
    }
}

fn detectability(
    g: &Global,
    cfg: &RunConfig,
    eps: [f64; 2],
    q: [f64; 2],
    points: usize,
) -> Result<(), Failure> {
    if !(eps[0] > 0.0 && eps[1] >= eps[0] && q[0] > 0.0 && q[1] >= q[0] && points > 0) {
        return Err(Failure::Usage("grid bounds must be positive and ordered".into()));
    }
    let detector = DetectorModel::default();
    let grid = detectability_grid(
        &log_space(eps[0], eps[1], points),
        &log_space(q[0], q[1], points),
        &cfg.cavity,
        CasimirDrive::VACUUM_SEED,
        &detector,
        &cfg.constants,
    );
    let mut buf = Vec::new();
    let io = |e: std::io::Error| Failure::Usage(e.to_string());
    writeln!(buf, "epsilon,Q,power_W,region,benchmark").map_err(io)?;
    for p in &grid {
        writeln!(
            buf,
            "{},{},{},{},{}",
            fmt_num(p.epsilon),
            fmt_num(p.quality),
            fmt_num(p.power),
            p.region.label(),
            p.benchmark
        )
        .map_err(io)?;
    }
    match &g.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("detectability.csv");
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
            println!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(&buf).map_err(io)?,
    }
    Ok(())
}

fn check(cfg: &RunConfig) -> Result<(), Failure> {
    let outcomes = run_checks(cfg)?;
    let mut failed = Vec::new();
    for o in &outcomes {
        println!(
            "{} {:<28} {:.3e} (tolerance {:.1e})",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.value,
            o.tolerance
        );
        if !o.passed {
            failed.push(o.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join(", ")))
    }
}
