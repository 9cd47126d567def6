use std::error::Error as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mplhmc::bench::{cmd_aggressive_suite, cmd_run, cmd_verify};
use mplhmc::config::parse_config_with;
use mplhmc::verify::{Probe, VerifyOptions, DEFAULT_LADDER};

#[derive(Parser)]
#[command(name = "mplhmc", version, about = "MPL-HMC benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark jobs of a config and write a results CSV.
    Run(RunArgs),
    /// Run a step-size convergence study of the integrator.
    Verify(VerifyArgs),
    /// Run the aggressive suite (configurations A, B, C) of a config.
    Aggressive(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    config: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel chains.
    #[arg(long, env = "MPLHMC_THREADS")]
    threads: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set run.n_samples=1000`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of order, global-order, energy, volume, reversibility, symplectic.
    probe: Probe,
    /// Decreasing step sizes.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = DEFAULT_LADDER)]
    dt_ladder: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta2: Option<f64>,
    /// Dimension of the Gaussian probe target.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Random states averaged by the energy probe.
    #[arg(long, default_value_t = 100)]
    states: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn load(args: &RunArgs) -> mplhmc::Result<mplhmc::config::ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut overrides = args.set.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(t) = args.threads {
        overrides.push(format!("run.threads={t}"));
    }
    if let Some(p) = &args.out {
        overrides.push(format!("output.path={:?}", p.display().to_string()));
    }
    parse_config_with(&text, &overrides)
}

fn run(cli: Cli) -> mplhmc::Result<bool> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Run(args) => cmd_run(&load(&args)?, &mut out).map(|_| true),
        Command::Aggressive(args) => cmd_aggressive_suite(&load(&args)?, &mut out).map(|_| true),
        Command::Verify(args) => {
            let opts = VerifyOptions {
                dt_ladder: args.dt_ladder,
                alpha2: args.alpha2,
                beta2: args.beta2,
                dim: args.dim,
                states: args.states,
                seed: args.seed,
            };
            cmd_verify(args.probe, &opts, &mut out).map(|o| o.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprint!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprint!(": {s}");
                source = s.source();
            }
            eprintln!();
            ExitCode::from(2)
        }
    }
}
