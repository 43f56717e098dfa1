mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "brewsolve", version, about = "Espresso percolation simulator, surrogate and inverse models")]
struct Cli {
    /// Seed for every random stage of the subcommand.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for simulation campaigns.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the simulator on one recipe.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// TOML file with temperature, pressure, granulometry and fractions.
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the full-factorial grid.
    Grid(Campaign),
    /// Simulate the off-grid validation set.
    Offgrid(Campaign),
    /// Add mixture and temperature rows to a grid dataset.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 3000)]
        mix: usize,
        #[arg(long, default_value_t = 3000)]
        temp: usize,
        /// Dirichlet pool size as a multiple of `--mix`.
        #[arg(long, default_value_t = 50)]
        pool_factor: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign train/val/test labels.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "0.7,0.15,0.15")]
        ratios: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the surrogate (recipe to chemistry).
    TrainForward(Training),
    /// Train the inverse model against a frozen surrogate.
    TrainInverse {
        #[command(flatten)]
        training: Training,
        #[arg(long)]
        surrogate: PathBuf,
    },
    /// Metrics and scatter exports for a surrogate.
    EvalForward(Evaluation),
    /// Metrics, scatter, confusion and PCA exports for an inverse model.
    EvalInverse {
        #[command(flatten)]
        eval: Evaluation,
        /// Surrogate for the round-trip residuals.
        #[arg(long)]
        surrogate: Option<PathBuf>,
    },
    /// Reconstruct a recipe from one chemistry vector.
    Invert {
        #[arg(long)]
        model: PathBuf,
        /// Eight comma-separated values in canonical species order.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long)]
        surrogate: Option<PathBuf>,
    },
    /// Jacobian rank, local PCA and PCA-3 reports for a surrogate.
    Diagnose {
        #[arg(long)]
        surrogate: PathBuf,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        /// Size of the predicted chemistry cloud for LPCA and PCA-3.
        #[arg(long, default_value_t = 3000)]
        cloud: usize,
        /// LPCA neighbourhood size.
        #[arg(long, default_value_t = 40)]
        neighbors: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Campaign {
    #[arg(long)]
    config: Option<PathBuf>,
    /// TOML campaign spec; defaults to the built-in design.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Training {
    /// Dataset with split labels.
    #[arg(long)]
    data: PathBuf,
    /// TOML with optional `[policy]` and model sections.
    #[arg(long)]
    hparams: Option<PathBuf>,
    /// Overrides `policy.max_epochs`.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Evaluation {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
