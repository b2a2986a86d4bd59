//! Train the DDPG agent on the desk-sized scene, save a checkpoint, and
//! replay the learned trajectory without exploration noise.
//!
//! Training is deterministic for a given seed: rerunning this example
//! reproduces the same reward curve and checkpoint byte for byte.

use aris_isac::agent::{DdpgAgent, TrainConfig};
use aris_isac::config::ExperimentConfig;
use aris_isac::environment::{Environment, SchemeId};

fn main() -> Result<(), aris_isac::Error> {
    let mut cfg = ExperimentConfig::desk();
    cfg.episodes = 60;
    let seed = 0;

    let mut env = Environment::new(&cfg, SchemeId::Proposed, seed)?;
    let mut agent = DdpgAgent::new(TrainConfig::from_experiment(&cfg), seed);
    let rewards = agent.train(&mut env)?;

    for chunk in rewards.chunks(10) {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        println!("mean reward over {:>2} episodes: {mean:>9.4}", chunk.len());
    }

    let path = std::env::temp_dir().join("aris-isac-example-checkpoint.json");
    agent.save(&path)?;
    println!(
        "checkpoint ({} episodes, noise std {:.3}) saved to {}",
        agent.episodes_trained(),
        agent.noise_std(),
        path.display()
    );

    let mut eval_env = Environment::new(&cfg, SchemeId::Proposed, seed + 1)?;
    let episode = eval_env.run_episode(|s| agent.act(s))?;
    println!("greedy evaluation reward {:.4}; trajectory:", episode.total_reward);
    for step in &episode.steps {
        println!(
            "  slot {:>2}: ({:>6.1}, {:>6.1})  reward {:>8.4}",
            step.slot, step.aris.x, step.aris.y, step.reward
        );
    }
    Ok(())
}
