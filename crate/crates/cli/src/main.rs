use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdc_cli::{validate_path, CliError, RunConfig};

/// Photon-pair source simulator.
#[derive(Parser)]
#[command(name = "pdcsim", version)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage requested by a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `rng_seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config without computing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Anneal a domain stack and write it out.
    Engineer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export the cumulative PMF along a stored stack.
    ShowStack {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Phase mismatch (rad/m); defaults to the first-order value of the seed period.
        #[arg(long, allow_hyphen_values = true)]
        delta_k: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

fn load(config: &PathBuf, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if seed.is_some() {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let m = pdc_cli::run(&load(&config, seed)?, &out)?;
            println!("wrote {} files to {}", m.outputs.len() + 1, out.display());
            for (k, v) in &m.metrics {
                println!("{k} = {v}");
            }
        }
        Command::Engineer { config, out, seed } => {
            let m = pdc_cli::engineer(&load(&config, seed)?, &out)?;
            for (k, v) in &m.metrics {
                println!("{k} = {v}");
            }
        }
        Command::Validate { config } => {
            let diags = validate_path(&config)?;
            if !diags.is_empty() {
                let text: Vec<String> = diags.iter().map(ToString::to_string).collect();
                return Err(CliError::Config(text.join("\n")));
            }
            println!("{}: ok", config.display());
        }
        Command::ShowStack {
            stack,
            out,
            delta_k,
            points,
        } => {
            let p = pdc_cli::show_stack(&stack, &out, delta_k, points)?;
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
