//! Compare the plain matched-filter receiver against the null-space
//! projection (NSP) receiver at the full-duplex AP.
//!
//! The matched filter maximizes echo gain but lets residual
//! self-interference and clutter through; NSP first projects the target
//! path orthogonal to the interference span, trading a little echo gain
//! for orders of magnitude less residual power and a far better echo SNR.

use aris_isac::beamforming::{
    nsp_receive_beamformer, optimize_phases_and_beamformers, pre_beamforming_interference_power,
    residual_interference_power,
};
use aris_isac::channel::realize;
use aris_isac::config::ExperimentConfig;
use aris_isac::environment::Scene;
use aris_isac::sensing::echo_snr;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), aris_isac::Error> {
    let cfg = ExperimentConfig::default();
    let scene = Scene::from_config(&cfg);
    let params = cfg.channel_params();
    let budget = cfg.link_budget();
    let sensing = cfg.sensing_params();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    println!("slot  receiver  interference_mW  echo_SNR_dB");
    for slot in 1..=5 {
        let channels = realize(
            &params,
            scene.ap,
            scene.aris_start,
            &scene.users,
            scene.target,
            &mut rng,
        )?;
        let mut sol = optimize_phases_and_beamformers(&channels, &budget)?;
        let pre = pre_beamforming_interference_power(&channels, &sol);

        let matched_res = residual_interference_power(&channels, &sol);
        let matched_snr = echo_snr(&channels, &sol, &sensing)?;
        println!(
            "{:>4}  matched   {:>15.3e}  {:>11.2}",
            slot,
            matched_res,
            10.0 * matched_snr.log10()
        );

        sol.f_rx = nsp_receive_beamformer(&channels, &sol)?;
        let nsp_res = residual_interference_power(&channels, &sol);
        let nsp_snr = echo_snr(&channels, &sol, &sensing)?;
        println!(
            "{:>4}  nsp       {:>15.3e}  {:>11.2}   (pre-combining {:.3e} mW)",
            slot,
            nsp_res,
            10.0 * nsp_snr.log10(),
            pre
        );
    }
    Ok(())
}
