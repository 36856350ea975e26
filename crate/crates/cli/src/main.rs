mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "convexreg",
    version,
    about = "Convex least-squares regression toolkit"
)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Exit with status 2 when any solve fails to converge.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true, env = "CONVEXREG_THREADS")]
    threads: Option<usize>,
    /// Run single-threaded. Outputs do not depend on the thread count, this
    /// only removes scheduling as a variable.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one problem: JSON with `X`, `Y`, optional `variant` and `solver`.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build a hard instance: `--f-tilde k=27 d=3` or
    /// `--packing d=2 delta=0.25 count=8 seed=1`.
    Construct {
        #[arg(long, conflicts_with = "packing", required_unless_present = "packing")]
        f_tilde: bool,
        #[arg(long)]
        packing: bool,
        /// `key=value` parameters.
        params: Vec<String>,
    },
    /// Replicated risk simulation from an experiment config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo profile of the localized complexity and its maximiser.
    Complexity {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fitted against theoretical exponents for a list of risk curves.
    Rates {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = if cli.deterministic {
        Some(1)
    } else {
        cli.threads
    };
    if let Some(t) = threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let ctx = commands::Context {
        output_dir: cli.output_dir,
        strict: cli.strict,
    };
    let result = match cli.command {
        Command::Fit { config } => commands::fit(&ctx, &config),
        Command::Construct {
            f_tilde,
            packing: _,
            params,
        } => commands::construct(&ctx, f_tilde, &params),
        Command::Experiment { config } => commands::experiment(&ctx, &config),
        Command::Complexity { config } => commands::complexity(&ctx, &config),
        Command::Rates { config } => commands::rates(&ctx, &config),
    };
    match result {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::Unconverged(what)) => {
            eprintln!("error: {what}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
