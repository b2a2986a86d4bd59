//! Train and evaluate all three schemes (proposed, fixed-RIS, no-NSP)
//! over a few seeds and print the summary table that `compare` writes to
//! `summary.csv`.
//!
//! Uses a shortened desk configuration so the whole sweep finishes in
//! about a minute; runs execute in parallel, one thread per (scheme, seed).

use aris_isac::config::ExperimentConfig;
use aris_isac::experiment::compare_schemes;

fn main() -> Result<(), aris_isac::Error> {
    let mut cfg = ExperimentConfig::desk();
    cfg.episodes = 40;
    let seeds = [0, 1, 2];
    let out = std::env::temp_dir().join("aris-isac-example-compare");

    let summaries = compare_schemes(&cfg, &seeds, &out)?;
    println!("scheme     mean_reward  std_reward  mean_final_see  std_final_see");
    for s in &summaries {
        println!(
            "{:<9}  {:>11.4}  {:>10.4}  {:>14.4e}  {:>13.4e}",
            s.scheme.label(),
            s.mean_reward,
            s.std_reward,
            s.mean_final_see,
            s.std_final_see
        );
    }
    println!("per-run CSVs and summary.csv written under {}", out.display());
    Ok(())
}
