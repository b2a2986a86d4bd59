//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aris_isac::config::{load_config, ExperimentConfig};
use aris_isac::environment::SchemeId;
use aris_isac::experiment::{compare_schemes, run_eval, run_train, RunOptions};
use aris_isac::Error;

#[derive(Parser)]
#[command(name = "aris-isac", about = "Aerial-RIS ISAC simulation and training runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; omitted fields keep built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// System variant to run.
    #[arg(long, default_value = "proposed")]
    scheme: String,
    /// Master seed for all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the number of episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory for reward.csv, trace.csv, and meta.toml.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// key=value configuration overrides (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and evaluate the learned policy once.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Where to save the trained agent (default: <out>/checkpoint.json).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a frozen (optionally checkpointed) policy.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint to load; a freshly initialized agent is used if absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate every scheme across several seeds.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 3)]
        num_seeds: u64,
    },
}

fn resolve_config(common: &CommonArgs) -> aris_isac::Result<(ExperimentConfig, SchemeId)> {
    let mut cfg = load_config(common.config.as_deref(), &common.set)?;
    if let Some(e) = common.episodes {
        cfg.episodes = e;
        cfg.validate()?;
    }
    let scheme: SchemeId = common.scheme.parse()?;
    Ok((cfg, scheme))
}

fn run(cli: Cli) -> aris_isac::Result<()> {
    match cli.command {
        Command::Train { common, checkpoint } => {
            let (cfg, scheme) = resolve_config(&common)?;
            let res = run_train(
                &cfg,
                &RunOptions {
                    scheme,
                    seed: common.seed,
                    out_dir: common.out.clone(),
                    checkpoint,
                },
            )?;
            println!(
                "trained {} episodes (scheme {}, seed {}); mean reward of last 20: {:.6}",
                res.episode_rewards.len(),
                scheme.label(),
                common.seed,
                res.mean_final_reward(20)
            );
            println!("artifacts in {}", common.out.display());
        }
        Command::Eval { common, checkpoint } => {
            let (cfg, scheme) = resolve_config(&common)?;
            let res = run_eval(
                &cfg,
                &RunOptions {
                    scheme,
                    seed: common.seed,
                    out_dir: common.out.clone(),
                    checkpoint,
                },
            )?;
            let see = res
                .final_see()
                .map(|s| format!("{s:.6}"))
                .unwrap_or_else(|| "n/a".into());
            println!(
                "evaluated {} episode(s); final-slot squared estimation error: {see}",
                res.episode_rewards.len()
            );
            println!("artifacts in {}", common.out.display());
        }
        Command::Compare { common, num_seeds } => {
            let (cfg, _) = resolve_config(&common)?;
            if num_seeds == 0 {
                return Err(Error::Config("--num-seeds must be at least 1".into()));
            }
            let seeds: Vec<u64> = (0..num_seeds).map(|i| common.seed + i).collect();
            let summaries = compare_schemes(&cfg, &seeds, &common.out)?;
            println!("scheme       mean_reward   std_reward   mean_final_see");
            for s in &summaries {
                println!(
                    "{:<12} {:>12.6} {:>12.6} {:>15.6}",
                    s.scheme.label(),
                    s.mean_reward,
                    s.std_reward,
                    s.mean_final_see
                );
            }
            println!("summary in {}", common.out.join("summary.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(2)
        }
    }
}
