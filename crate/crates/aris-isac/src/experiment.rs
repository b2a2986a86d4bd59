//! Experiment harness: train/eval runs, scheme comparisons, and persisted
//! result traces.
//!
//! Every run writes three artifacts into its output directory: `reward.csv`
//! with one row per episode, `trace.csv` with one row per slot of the final
//! evaluation episode, and `meta.toml` carrying the fully resolved
//! configuration plus the linear-unit conversions of every dB field. All
//! numeric CSV fields use the shortest round-trip float formatting, so a
//! repeated run with the same master seed reproduces the files byte for
//! byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::agent::{DdpgAgent, TrainConfig};
use crate::config::ExperimentConfig;
use crate::environment::{Environment, SchemeId, StepOutcome};
use crate::{Error, Result};

/// Seed offset separating the agent's stream from the environment's.
const AGENT_SEED_SALT: u64 = 0x9E3779B97F4A7C15;
/// Seed offset for the post-training evaluation episode.
const EVAL_SEED_SALT: u64 = 0xD1B54A32D192ED03;

/// Options common to a single run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub scheme: SchemeId,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `train`: where to save the trained agent (defaults to
    /// `out_dir/checkpoint.json`). `eval`: checkpoint to load.
    pub checkpoint: Option<PathBuf>,
}

/// Outcome of one run, mirrored in the persisted files.
#[derive(Clone, Debug)]
pub struct RunResult {
    /// Accumulated reward per episode (training or evaluation).
    pub episode_rewards: Vec<f64>,
    /// Per-slot outcomes of the final evaluation episode.
    pub eval_steps: Vec<StepOutcome>,
}

impl RunResult {
    /// Mean accumulated reward over the last `n` episodes.
    pub fn mean_final_reward(&self, n: usize) -> f64 {
        let tail = &self.episode_rewards[self.episode_rewards.len().saturating_sub(n)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    /// Squared estimation error at the last evaluation slot.
    pub fn final_see(&self) -> Option<f64> {
        self.eval_steps.last().and_then(|s| s.see)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => "nan".to_string(),
    }
}

fn write_reward_csv(dir: &Path, rewards: &[f64]) -> Result<()> {
    let mut f = fs::File::create(dir.join("reward.csv"))?;
    writeln!(f, "episode,reward")?;
    for (i, r) in rewards.iter().enumerate() {
        writeln!(f, "{},{}", i + 1, r)?;
    }
    Ok(())
}

fn write_trace_csv(dir: &Path, steps: &[StepOutcome]) -> Result<()> {
    let mut f = fs::File::create(dir.join("trace.csv"))?;
    writeln!(f, "slot,aris_x,aris_y,est_x,est_y,see,crb,min_sinr,feasible")?;
    for s in steps {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            s.slot,
            s.aris.x,
            s.aris.y,
            s.state.est_target_x,
            s.state.est_target_y,
            fmt_opt(s.see),
            fmt_opt(s.crb),
            fmt_opt(s.min_sinr),
            s.feasible,
        )?;
    }
    Ok(())
}

fn write_meta(dir: &Path, cfg: &ExperimentConfig, scheme: SchemeId, seed: u64) -> Result<()> {
    let budget = cfg.link_budget();
    let chan = cfg.channel_params();
    let mut doc = toml::Table::new();
    doc.insert(
        "run".into(),
        toml::Value::try_from(toml::toml! {
            scheme = (scheme.label())
            seed = (seed as i64)
        })
        .unwrap(),
    );
    doc.insert("config".into(), toml::Table::try_from(cfg.clone()).unwrap().into());
    // Linear-unit equivalents of every dB/dBm field (powers in mW).
    doc.insert(
        "linear".into(),
        toml::Value::try_from(toml::toml! {
            ap_power_mw = (budget.total_power)
            noise_user_mw = (budget.noise_user)
            noise_ap_mw = (budget.noise_ap)
            si_power_mw = (chan.si_power)
            sinr_threshold = (budget.sinr_threshold)
            beta0 = (chan.beta0)
            beta_s = (chan.beta_s)
        })
        .unwrap(),
    );
    fs::write(dir.join("meta.toml"), toml::to_string_pretty(&doc).unwrap())?;
    Ok(())
}

fn agent_seed(seed: u64) -> u64 {
    seed.wrapping_add(AGENT_SEED_SALT)
}

/// Evaluate a frozen policy for one episode.
fn evaluate(
    cfg: &ExperimentConfig,
    scheme: SchemeId,
    seed: u64,
    agent: &DdpgAgent,
) -> Result<Vec<StepOutcome>> {
    let mut env = Environment::new(cfg, scheme, seed.wrapping_add(EVAL_SEED_SALT))?;
    let ep = env.run_episode(|s| agent.act(s))?;
    Ok(ep.steps)
}

/// Train an agent, evaluate it once, and persist all artifacts.
pub fn run_train(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunResult> {
    cfg.validate()?;
    fs::create_dir_all(&opts.out_dir)?;
    let mut env = Environment::new(cfg, opts.scheme, opts.seed)?;
    let mut agent = DdpgAgent::new(TrainConfig::from_experiment(cfg), agent_seed(opts.seed));
    let rewards = agent.train(&mut env)?;
    let ck = opts
        .checkpoint
        .clone()
        .unwrap_or_else(|| opts.out_dir.join("checkpoint.json"));
    agent.save(&ck)?;
    let eval_steps = evaluate(cfg, opts.scheme, opts.seed, &agent)?;
    write_reward_csv(&opts.out_dir, &rewards)?;
    write_trace_csv(&opts.out_dir, &eval_steps)?;
    write_meta(&opts.out_dir, cfg, opts.scheme, opts.seed)?;
    Ok(RunResult {
        episode_rewards: rewards,
        eval_steps,
    })
}

/// Evaluate a (possibly checkpointed) policy without training.
///
/// Runs `cfg.episodes` evaluation episodes on consecutive sub-seeds; the
/// trace comes from the last one.
pub fn run_eval(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunResult> {
    cfg.validate()?;
    fs::create_dir_all(&opts.out_dir)?;
    let train_cfg = TrainConfig::from_experiment(cfg);
    let agent = match &opts.checkpoint {
        Some(p) => DdpgAgent::load(train_cfg, agent_seed(opts.seed), p)?,
        None => DdpgAgent::new(train_cfg, agent_seed(opts.seed)),
    };
    let mut rewards = Vec::with_capacity(cfg.episodes);
    let mut last_steps = Vec::new();
    for e in 0..cfg.episodes {
        let mut env = Environment::new(cfg, opts.scheme, opts.seed.wrapping_add(e as u64))?;
        let ep = env.run_episode(|s| agent.act(s))?;
        rewards.push(ep.total_reward);
        last_steps = ep.steps;
    }
    write_reward_csv(&opts.out_dir, &rewards)?;
    write_trace_csv(&opts.out_dir, &last_steps)?;
    write_meta(&opts.out_dir, cfg, opts.scheme, opts.seed)?;
    Ok(RunResult {
        episode_rewards: rewards,
        eval_steps: last_steps,
    })
}

/// One row of a scheme comparison.
#[derive(Clone, Debug)]
pub struct SchemeSummary {
    pub scheme: SchemeId,
    pub seeds: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_final_see: f64,
    pub std_final_see: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Train and evaluate every scheme across the given seeds, in parallel,
/// and write `summary.csv`.
///
/// The per-scheme "reward" statistic is the mean accumulated reward over
/// the final 20 training episodes of each seed.
pub fn compare_schemes(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<SchemeSummary>> {
    if seeds.is_empty() {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let schemes = [SchemeId::Proposed, SchemeId::FixedRis, SchemeId::WithoutNsp];
    let mut jobs: Vec<(SchemeId, u64)> = Vec::new();
    for &scheme in &schemes {
        for &seed in seeds {
            jobs.push((scheme, seed));
        }
    }
    let results: Vec<Result<(SchemeId, f64, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(scheme, seed)| {
                let cfg = cfg.clone();
                let dir = out_dir.join(format!("{}-seed{}", scheme.label(), seed));
                scope.spawn(move || {
                    let opts = RunOptions {
                        scheme,
                        seed,
                        out_dir: dir,
                        checkpoint: None,
                    };
                    let res = run_train(&cfg, &opts)?;
                    Ok((
                        scheme,
                        res.mean_final_reward(20),
                        res.final_see().unwrap_or(f64::NAN),
                    ))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect()
    });

    let mut summaries = Vec::new();
    for &scheme in &schemes {
        let mut rewards = Vec::new();
        let mut sees = Vec::new();
        for r in &results {
            match r {
                Ok((s, rew, see)) if *s == scheme => {
                    rewards.push(*rew);
                    sees.push(*see);
                }
                Ok(_) => {}
                Err(e) => return Err(Error::Runtime(e.to_string())),
            }
        }
        let (mr, sr) = mean_std(&rewards);
        let (ms, ss) = mean_std(&sees);
        summaries.push(SchemeSummary {
            scheme,
            seeds: rewards.len(),
            mean_reward: mr,
            std_reward: sr,
            mean_final_see: ms,
            std_final_see: ss,
        });
    }

    let mut f = fs::File::create(out_dir.join("summary.csv"))?;
    writeln!(
        f,
        "scheme,seeds,mean_reward,std_reward,mean_final_see,std_final_see"
    )?;
    for s in &summaries {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            s.scheme.label(),
            s.seeds,
            s.mean_reward,
            s.std_reward,
            s.mean_final_see,
            s.std_final_see
        )?;
    }
    write_meta(out_dir, cfg, SchemeId::Proposed, seeds[0])?;
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.episodes = 4;
        cfg
    }

    #[test]
    fn train_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let opts = RunOptions {
            scheme: SchemeId::Proposed,
            seed: 1,
            out_dir: dir.path().to_path_buf(),
            checkpoint: None,
        };
        let res = run_train(&cfg, &opts).unwrap();
        assert_eq!(res.episode_rewards.len(), 4);
        assert_eq!(res.eval_steps.len(), cfg.slots_per_episode);
        for name in ["reward.csv", "trace.csv", "meta.toml", "checkpoint.json"] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let reward = fs::read_to_string(dir.path().join("reward.csv")).unwrap();
        assert!(reward.starts_with("episode,reward\n"));
        assert_eq!(reward.lines().count(), 5);
        assert!(reward.ends_with('\n'));
        let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert!(trace.starts_with("slot,aris_x,aris_y,est_x,est_y,see,crb,min_sinr,feasible\n"));
        assert_eq!(trace.lines().count(), cfg.slots_per_episode + 1);
        let meta = fs::read_to_string(dir.path().join("meta.toml")).unwrap();
        assert!(meta.contains("ap_power_mw = 10000.0"));
        assert!(meta.contains("seed = 1"));
    }

    #[test]
    fn same_seed_runs_are_byte_identical() {
        let cfg = tiny_config();
        let read = |dir: &Path| {
            (
                fs::read(dir.join("reward.csv")).unwrap(),
                fs::read(dir.join("trace.csv")).unwrap(),
            )
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        for d in [&d1, &d2] {
            run_train(
                &cfg,
                &RunOptions {
                    scheme: SchemeId::Proposed,
                    seed: 42,
                    out_dir: d.path().to_path_buf(),
                    checkpoint: None,
                },
            )
            .unwrap();
        }
        assert_eq!(read(d1.path()), read(d2.path()));
    }

    #[test]
    fn eval_reuses_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        let train_dir = dir.path().join("train");
        run_train(
            &cfg,
            &RunOptions {
                scheme: SchemeId::Proposed,
                seed: 3,
                out_dir: train_dir.clone(),
                checkpoint: None,
            },
        )
        .unwrap();
        cfg.episodes = 2;
        let eval_dir = dir.path().join("eval");
        let res = run_eval(
            &cfg,
            &RunOptions {
                scheme: SchemeId::Proposed,
                seed: 3,
                out_dir: eval_dir.clone(),
                checkpoint: Some(train_dir.join("checkpoint.json")),
            },
        )
        .unwrap();
        assert_eq!(res.episode_rewards.len(), 2);
        assert!(eval_dir.join("trace.csv").exists());
    }

    #[test]
    fn compare_writes_summary_with_all_schemes() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.episodes = 2;
        let summaries = compare_schemes(&cfg, &[1, 2], dir.path()).unwrap();
        assert_eq!(summaries.len(), 3);
        for s in &summaries {
            assert_eq!(s.seeds, 2);
        }
        let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(text.starts_with("scheme,seeds,"));
        for label in ["proposed", "fixed-ris", "no-nsp"] {
            assert!(text.contains(label));
            assert!(dir.path().join(format!("{label}-seed1")).join("reward.csv").exists());
        }
        // Single seed gives zero stddev.
        let dir2 = tempfile::tempdir().unwrap();
        let one = compare_schemes(&cfg, &[5], dir2.path()).unwrap();
        assert!(one.iter().all(|s| s.std_reward == 0.0));
        assert!(compare_schemes(&cfg, &[], dir.path()).is_err());
    }
}
