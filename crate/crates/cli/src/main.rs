use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use simtune_core::harness::{cmd_compare, cmd_run, RunConfig};
use simtune_core::nn::gradcheck::check_all_layers;
use simtune_core::{EnvId, Error, Result};

/// Calibrates randomized simulator parameters from rendered rollouts.
#[derive(Parser)]
#[command(name = "simtune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Leave hidden-parameter columns out of every output.
        #[arg(long)]
        blind: bool,
        /// Run directory; defaults to the config's `out_dir`, then `runs/<env>-<method>-s<seed>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize final errors of completed runs per method.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "comparison.csv")]
        out: PathBuf,
    },
    /// Environment listings.
    Envs {
        #[command(subcommand)]
        what: EnvsCommand,
    },
    /// Self-checks.
    Check {
        #[command(subcommand)]
        what: CheckCommand,
    },
}

#[derive(Subcommand)]
enum EnvsCommand {
    /// Print each environment's parameters.
    List,
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Finite-difference check of every layer's gradients.
    Gradients {
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            blind,
            out,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| {
                let env = cfg.env_id.map(|e| e.as_str()).unwrap_or("run");
                PathBuf::from(format!("runs/{env}-{}-s{}", cfg.method, cfg.seed))
            });
            let s = cmd_run(&cfg, blind, &out)?;
            println!("run written to {}", out.display());
            match (s.initial_mean_percent_error, s.final_mean_percent_error) {
                (Some(a), Some(b)) => println!("mean percent error: {a:.2} -> {b:.2}"),
                _ => println!("final mean: {:?}", s.final_mean.values()),
            }
        }
        Command::Compare { dirs, out } => {
            let (_, table) = cmd_compare(&dirs, &out)?;
            print!("{table}");
            println!("written to {}", out.display());
        }
        Command::Envs {
            what: EnvsCommand::List,
        } => {
            for env in EnvId::ALL {
                println!("{env} (action dim {})", env.action_dim());
                for e in env.schema().entries() {
                    println!("  {:<14} {:<9} {}", e.name, e.kind.to_string(), e.unit);
                }
            }
        }
        Command::Check {
            what:
                CheckCommand::Gradients {
                    probes,
                    step,
                    tolerance,
                },
        } => {
            let reports = check_all_layers(probes, step, 0)?;
            let mut failed = 0;
            for r in &reports {
                let ok = r.max_rel_error <= tolerance;
                failed += usize::from(!ok);
                println!(
                    "{:<8} probes {:>4}  max rel err {:.2e}  {}",
                    r.layer,
                    r.probes(),
                    r.max_rel_error,
                    if ok { "ok" } else { "FAIL" }
                );
            }
            if failed > 0 {
                return Err(Error::NumericDivergence(format!(
                    "gradient check ({failed} layers over tolerance)"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
