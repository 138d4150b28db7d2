use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use convlab::checks;
use convlab::config::{Experiment, ExperimentConfig};
use convlab::experiments::{parse_grid, run_experiment, weights_table};
use convlab_core::strategy::Variant;
use convlab_core::Model;

#[derive(Parser)]
#[command(
    name = "convlab",
    version,
    about = "Regime-switching convergence trading experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment and write its CSV output.
    Run {
        /// fig1, fig2, fig3, fig4 or custom.
        experiment: Experiment,
        /// Config file with parameter sections and/or a [run] table.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print optimal weights over a spread grid as CSV.
    Weights {
        /// Spread grid as a:b:n.
        #[arg(long, allow_hyphen_values = true)]
        x_grid: String,
        /// Belief grid a:b:n for partial-information weights (two regimes).
        #[arg(long, allow_hyphen_values = true)]
        p_grid: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parameter set used when no config is given.
        #[arg(long, default_value = "fig1")]
        experiment: Experiment,
        #[arg(long, default_value = "unrestricted")]
        strategy: Variant,
    },
    /// Run the acceptance checks.
    Check {
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn load(experiment: Experiment, config: Option<&PathBuf>) -> convlab::Result<ExperimentConfig> {
    match config {
        Some(path) => ExperimentConfig::from_path(experiment, path),
        None => ExperimentConfig::named(experiment),
    }
}

fn execute(cli: Cli) -> convlab::Result<bool> {
    match cli.command {
        Command::Run {
            experiment,
            config,
            seed,
            out,
        } => {
            let mut cfg = load(experiment, config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let run = run_experiment(&cfg, &out)?;
            for f in &run.files {
                println!("{}", run.dir.join(f).display());
            }
            Ok(true)
        }
        Command::Weights {
            x_grid,
            p_grid,
            config,
            experiment,
            strategy,
        } => {
            let cfg = load(experiment, config.as_ref())?;
            let model = Model::new(cfg.params)?;
            let xs = parse_grid(&x_grid)?;
            let ps = p_grid.as_deref().map(parse_grid).transpose()?;
            print!("{}", weights_table(&model, strategy, &xs, ps.as_deref())?);
            Ok(true)
        }
        Command::Check { report } => {
            let r = checks::run_all(|c| println!("{}", c.line()));
            if let Some(path) = report {
                std::fs::write(&path, serde_json::to_string_pretty(&r)? + "\n")?;
            }
            let failed = r.checks.iter().filter(|c| !c.passed).count();
            println!("{} of {} checks passed", r.checks.len() - failed, r.checks.len());
            Ok(r.passed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
