//! Command-line front end: `train`, `eval` and `compare`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use behavior_select::experiment::{cmd_compare, cmd_eval, cmd_train, EvalMode, Overrides};

#[derive(Parser)]
#[command(version, about = "Learn to sequence multi-robot behaviors")]
struct Cli {
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a Q-table and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate one policy and write per-episode rewards.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Required for `--mode trained`.
        #[arg(long)]
        qtable: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Run every policy on the same episodes and write one combined CSV.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        qtable: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Trained,
    Random,
    Adhoc,
}

impl From<Mode> for EvalMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Trained => EvalMode::Trained,
            Mode::Random => EvalMode::Random,
            Mode::Adhoc => EvalMode::Adhoc,
        }
    }
}

fn run(cli: Cli) -> behavior_select::Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Train { config } => {
            let out = cmd_train(&config, &overrides)?;
            let n = out.rewards.len();
            let tail = &out.rewards[n.saturating_sub(10)..];
            println!(
                "trained {n} episodes; mean reward of the last {}: {:.4}",
                tail.len(),
                tail.iter().sum::<f64>() / tail.len().max(1) as f64
            );
            println!("wrote {}", out.run_dir.display());
        }
        Command::Eval { config, qtable, mode } => {
            let out = cmd_eval(&config, qtable.as_deref(), mode.into(), &overrides)?;
            let s = out.report.summary;
            println!("{} over {} episodes: mean {:.4}, std {:.4}", out.report.mode, s.episodes, s.mean, s.std);
            println!("wrote {}", out.csv_path.display());
        }
        Command::Compare { config, qtable } => {
            let out = cmd_compare(&config, &qtable, &overrides)?;
            let r = &out.report;
            println!("trained mean {:.4} (std {:.4})", r.trained.mean, r.trained.std);
            println!("random  mean {:.4} (std {:.4})", r.random.mean, r.random.std);
            if let Some(a) = r.adhoc {
                println!("adhoc   mean {:.4} (std {:.4})", a.mean, a.std);
            }
            println!("wrote {}", out.csv_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
