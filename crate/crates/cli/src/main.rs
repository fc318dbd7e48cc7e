//! `galerkin-mhd` command-line driver.
//!
//! Configuration is merged from a TOML file (`--config`), then `--set
//! key=value` overrides with dotted keys, then the dedicated flags. Exit
//! status is 0 on success, 2 on configuration errors and 3 on numerical
//! blow-up; diagnostics go to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Run};
use config::{apply_override, load_table, set_path, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "galerkin-mhd", version, about = "Stochastic Galerkin MHD laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Dotted override such as `integrator.dt=0.001`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Truncation level.
    #[arg(long = "N", global = true)]
    n: Option<u32>,

    /// Forced modes, e.g. "(1,0,0),(0,1,0),(0,0,1)".
    #[arg(long, global = true, allow_hyphen_values = true)]
    forced: Option<String>,

    #[arg(long, global = true)]
    dt: Option<f64>,

    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,

    #[arg(long, global = true)]
    trajectories: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// `exponential` or `euler_maruyama`.
    #[arg(long, global = true)]
    scheme: Option<String>,

    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for ensembles (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Representative modes of the truncated lattice.
    Lattice,
    /// One trajectory, written as CSV.
    Simulate,
    /// Bracket closure of the forced modes.
    Hormander,
    /// Energy identity audit and moment bound.
    Audit,
    /// Hitting times of an energy ball.
    Hitting,
    /// Returns to an energy ball at several horizons.
    Recurrence,
    /// KS comparison of time-averaged measures from two initial conditions.
    Measure,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lattice => "lattice",
            Command::Simulate => "simulate",
            Command::Hormander => "hormander",
            Command::Audit => "audit",
            Command::Hitting => "hitting",
            Command::Recurrence => "recurrence",
            Command::Measure => "measure",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let mut table = load_table(cli.config.as_deref())?;
    for o in &cli.overrides {
        apply_override(&mut table, o)?;
    }
    let mut put = |key: &str, v: toml::Value| set_path(&mut table, key, v);
    if let Some(n) = cli.n {
        put("N", (n as i64).into())?;
    }
    if let Some(f) = &cli.forced {
        put("forced", f.clone().into())?;
    }
    if let Some(dt) = cli.dt {
        put("integrator.dt", dt.into())?;
    }
    if let Some(t) = cli.t_end {
        put("integrator.t_end", t.into())?;
    }
    if let Some(n) = cli.trajectories {
        put("trajectories", (n as i64).into())?;
    }
    if let Some(s) = cli.seed {
        let s = i64::try_from(s).map_err(|_| format!("seed {s} exceeds the config range"))?;
        put("seed", s.into())?;
    }
    if let Some(s) = &cli.scheme {
        let scheme: galerkin_mhd::integrator::Scheme = s.parse().map_err(|e: galerkin_mhd::Error| e.to_string())?;
        put("integrator.scheme", toml::Value::try_from(scheme).map_err(|e| e.to_string())?)?;
    }
    if let Some(o) = &cli.out {
        put("out", o.display().to_string().into())?;
    }
    if let Some(t) = cli.threads {
        put("threads", (t as i64).into())?;
    }
    RunConfig::from_table(table)
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    let cfg = resolve(cli)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| format!("cannot configure thread pool: {e}"))?;
    }
    let run = Run::new(cli.command.name(), cfg)?;
    match cli.command {
        Command::Lattice => commands::lattice(&run),
        Command::Simulate => commands::simulate_cmd(&run),
        Command::Hormander => commands::hormander(&run),
        Command::Audit => commands::audit(&run),
        Command::Hitting => commands::hitting(&run),
        Command::Recurrence => commands::recurrence(&run),
        Command::Measure => commands::measure(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(json) => {
            print!("{json}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("galerkin-mhd {}: {}", cli.command.name(), f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
