use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phfsi_cli::commands::{self, BasisArgs, BenchArgs, SimulateArgs};
use phfsi_cli::{CliError, Workspace};
use phfsi_core::basis::BasisMethod;
use phfsi_core::ph::Formulation;
use phfsi_core::reduce::Projection;

#[derive(Parser)]
#[command(name = "phfsi", version, about = "Port-Hamiltonian plate-cavity model reduction toolkit")]
struct Cli {
    /// Workspace directory.
    #[arg(long, short = 'w', global = true, env = "PHFSI_WORKSPACE", default_value = "phfsi-ws")]
    workspace: PathBuf,
    /// More log output (repeat for debug).
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the model into the workspace and print its dimensions.
    Model {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check pH1-pH3 of the full model or of a stored reduced model.
    Check {
        /// Reduced model id under roms/.
        #[arg(long)]
        rom: Option<String>,
    },
    /// Simulate one sine excitation.
    Simulate {
        /// Excitation frequency in Hz.
        #[arg(long = "f")]
        frequency: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value = "velocity", value_parser = parse_formulation)]
        formulation: Formulation,
        /// Also dump the full states.
        #[arg(long)]
        states: bool,
    },
    /// Build and store a reduced basis.
    Basis {
        #[arg(long, value_parser = parse_method)]
        method: BasisMethod,
        #[arg(long)]
        n: usize,
        /// Snapshot trajectories for data-based methods.
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value = "velocity", value_parser = parse_formulation)]
        formulation: Formulation,
    },
    /// Project the full model onto a stored basis.
    Reduce {
        /// Basis id under bases/.
        #[arg(long)]
        basis: String,
        #[arg(long, default_value = "pH", value_parser = parse_projection)]
        projection: Projection,
    },
    /// Benchmark sweeps.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run (or resume) the sensitivity sweep and write the reports.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "PHFSI_OUT")]
        out: PathBuf,
        #[arg(long, env = "PHFSI_WORKERS")]
        workers: Option<usize>,
        /// Skip the speed-up timings.
        #[arg(long)]
        no_speedup: bool,
    },
}

fn parse_formulation(s: &str) -> Result<Formulation, String> {
    s.parse().map_err(|e: phfsi_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<BasisMethod, String> {
    s.parse().map_err(|e: phfsi_core::Error| e.to_string())
}

fn parse_projection(s: &str) -> Result<Projection, String> {
    s.parse().map_err(|e: phfsi_core::Error| e.to_string())
}

fn config_or_default(path: Option<&PathBuf>) -> Result<phfsi_cli::RunConfig, CliError> {
    match path {
        Some(p) => commands::load_config(p),
        None => Ok(phfsi_cli::RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let root = cli.workspace;
    match cli.command {
        Command::Model { config } => {
            print!("{}", commands::cmd_model(&root, config_or_default(config.as_ref())?)?);
        }
        Command::Check { rom } => {
            let ws = Workspace::open(&root)?;
            let (text, pass) = commands::cmd_check(&ws, rom.as_deref())?;
            print!("{text}");
            if !pass {
                return Err(CliError::Numerical("structural check failed".into()));
            }
        }
        Command::Simulate {
            frequency,
            dt,
            t_end,
            formulation,
            states,
        } => {
            let ws = Workspace::open(&root)?;
            let args = SimulateArgs {
                frequency,
                dt,
                t_end,
                formulation,
                states,
            };
            for p in commands::cmd_simulate(&ws, &args)? {
                println!("{}", p.display());
            }
        }
        Command::Basis {
            method,
            n,
            count,
            formulation,
        } => {
            let ws = Workspace::open(&root)?;
            let (id, meta) = commands::cmd_basis(
                &ws,
                &BasisArgs {
                    method,
                    n,
                    count,
                    formulation,
                },
            )?;
            println!(
                "{id}: n = {}, orthonormal {}, symplectic {}, complex {}",
                meta.n, meta.orthonormal, meta.symplectic, meta.complex
            );
        }
        Command::Reduce { basis, projection } => {
            let ws = Workspace::open(&root)?;
            let (id, report) = commands::cmd_reduce(&ws, &basis, projection)?;
            match report.ph_pass {
                Some(p) => println!("{id}: n = {}, pH check {}", report.n, if p { "PASS" } else { "FAIL" }),
                None => println!("{id}: n = {} (no pH structure)", report.n),
            }
        }
        Command::Bench {
            command:
                BenchCommand::Sweep {
                    config,
                    out,
                    workers,
                    no_speedup,
                },
        } => {
            let cfg = config_or_default(config.as_ref())?;
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let args = BenchArgs {
                out,
                workers,
                speedup: !no_speedup,
            };
            print!("{}", commands::cmd_bench(&cfg, &args)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
