//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL`
//! line (visible with `--nocapture`) and then asserts.

use std::sync::OnceLock;

use nalgebra::{DVector, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aris_isac::agent::{
    actor_objective_and_grads, critic_loss_and_grads, DdpgAgent, Network, OutputKind,
    TrainConfig, Transition,
};
use aris_isac::beamforming::{
    matched_receive, nsp_receive_beamformer, optimize_phases_and_beamformers,
    pre_beamforming_interference_power, residual_interference_power, LinkBudget,
};
use aris_isac::channel::{self, ChannelParams};
use aris_isac::config::ExperimentConfig;
use aris_isac::environment::{Environment, MdpState, SchemeId, StepOutcome};
use aris_isac::geometry::{distance, Position3, Velocity2};
use aris_isac::sensing::{
    coordinate_fim, fim_distances, measurement_variance, mle_localize, sample_measurement,
    Measurement, MeasurementSet,
};

fn report(n: usize, name: &str, ok: bool) {
    println!(
        "ACCEPTANCE {n} ({name}): {}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn default_channel_params() -> ChannelParams {
    ExperimentConfig::default().channel_params()
}

fn default_budget() -> LinkBudget {
    ExperimentConfig::default().link_budget()
}

fn random_scene_channels(
    params: &ChannelParams,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> channel::ChannelSet {
    let aris = Position3::new(
        rng.random_range(-90.0..90.0),
        rng.random_range(-90.0..90.0),
        50.0,
    );
    let mut nodes = Vec::new();
    for _ in 0..=k {
        nodes.push(Position3::ground(
            rng.random_range(-90.0..90.0),
            rng.random_range(-90.0..90.0),
        ));
    }
    let target = nodes[0];
    let users = nodes[1..].to_vec();
    channel::realize(
        params,
        Position3::ground(0.0, -120.0),
        aris,
        &users,
        target,
        rng,
    )
    .unwrap()
}

/// Criterion 1: the diagonal range FIM matches a finite-difference
/// evaluation of the Gaussian FIM under C(d) proportional to d^4.
#[test]
fn acceptance_01_fim_closed_form_oracle() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut ok = true;
    for _ in 0..100 {
        let l = rng.random_range(1..=12usize);
        let mut set = MeasurementSet::default();
        let mut kappas = Vec::new();
        for _ in 0..l {
            let d: f64 = rng.random_range(10.0..300.0);
            let sigma = rng.random_range(0.01..10.0f64);
            let var = sigma * sigma;
            kappas.push(var / d.powi(4));
            set.push(Measurement {
                hover: Position3::new(0.0, 0.0, 50.0),
                distance: d,
                variance: var,
            });
        }
        let fim = fim_distances(&set);
        for (i, m) in set.measurements.iter().enumerate() {
            // Finite-difference evaluation of the Gaussian information
            // d_mu^2/C + C'(d)^2 / (2 C^2) with mu(d) = d, C(d) = kappa d^4.
            let c = |d: f64| kappas[i] * d.powi(4);
            let h = 1e-5 * m.distance;
            let dc = (c(m.distance + h) - c(m.distance - h)) / (2.0 * h);
            let var = c(m.distance);
            let reference = 1.0 / var + dc * dc / (2.0 * var * var);
            if ((fim[i] - reference) / reference).abs() > 1e-3 {
                ok = false;
            }
        }
    }
    let in_time = start.elapsed().as_secs() < 60;
    report(1, "FIM closed-form oracle", ok && in_time);
    assert!(ok, "FIM mismatch against finite-difference oracle");
    assert!(in_time, "criterion 1 exceeded 1 minute");
}

/// Criterion 2: the NSP receive beamformer annihilates every interference
/// column and the residual interference power collapses.
#[test]
fn acceptance_02_nsp_null_property() {
    let params = default_channel_params();
    let budget = default_budget();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut ok = true;
    for i in 0..100 {
        let k = 1 + (i % 3);
        let channels = random_scene_channels(&params, k, &mut rng);
        let mut solution = optimize_phases_and_beamformers(&channels, &budget).unwrap();
        let without = {
            solution.f_rx = matched_receive(&channels, &solution.phases).unwrap();
            residual_interference_power(&channels, &solution)
        };
        solution.f_rx = nsp_receive_beamformer(&channels, &solution).unwrap();

        // Null of every interference column.
        let mut cols: Vec<DVector<Complex64>> = Vec::new();
        for w in &solution.w {
            cols.push(&channels.g_si * w);
        }
        if let Some(ws) = &solution.sensing_beam {
            cols.push(&channels.g_si * ws);
        }
        for u in 0..k {
            cols.push(aris_isac::beamforming::clutter_path(
                &channels,
                &solution.phases,
                u,
            ));
        }
        for c in &cols {
            let dot = solution
                .f_rx
                .zip_fold(c, Complex64::ZERO, |acc, a, b| acc + a * b);
            if dot.norm() > 1e-10 * c.norm() {
                ok = false;
            }
        }

        let with = residual_interference_power(&channels, &solution);
        let pre = pre_beamforming_interference_power(&channels, &solution);
        if !(with <= 1e-18 * pre) || !(without > with) {
            ok = false;
        }
    }
    report(2, "NSP null property", ok);
    assert!(ok);
}

/// Criterion 3: solver invariants over 500 random slot instances.
#[test]
fn acceptance_03_constraint_satisfaction() {
    let params = default_channel_params();
    let budget = default_budget();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut ok = true;
    for i in 0..500 {
        let k = i % 4;
        let channels = random_scene_channels(&params, k, &mut rng);
        let sol = optimize_phases_and_beamformers(&channels, &budget).unwrap();
        if sol.transmit_power() > budget.total_power + 1e-9 {
            ok = false;
        }
        if sol.phases.iter().any(|p| (p.norm() - 1.0).abs() >= 1e-12) {
            ok = false;
        }
        let min_eig = sol.r_s.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            ok = false;
        }
        if sol.feasible {
            for &g in &sol.sinr {
                if g < budget.sinr_threshold * (1.0 - 1e-6) {
                    ok = false;
                }
            }
        }
    }
    report(3, "constraint satisfaction", ok);
    assert!(ok);
}

/// Criterion 4: the MLE's empirical MSE sits in a near-efficiency band
/// around the CRB at the full-scale operating point.
#[test]
fn acceptance_04_crb_bounds_mle() {
    let start = std::time::Instant::now();
    let cfg = ExperimentConfig::default();
    let params = cfg.channel_params();
    let budget = cfg.link_budget();
    let sensing = cfg.sensing_params();
    let target = Position3::ground(cfg.target_position[0], cfg.target_position[1]);
    let users: Vec<Position3> = cfg
        .user_positions
        .iter()
        .map(|p| Position3::ground(p[0], p[1]))
        .collect();
    let ap = Position3::ground(cfg.ap_position[0], cfg.ap_position[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    // Twelve hover points on a circle of radius 60 m about the target.
    let mut set = MeasurementSet::default();
    for l in 0..12 {
        let ang = std::f64::consts::TAU * l as f64 / 12.0;
        let hover = Position3::new(
            target.x + 60.0 * ang.cos(),
            target.y + 60.0 * ang.sin(),
            cfg.altitude_m,
        );
        let channels = channel::realize(&params, ap, hover, &users, target, &mut rng).unwrap();
        let mut sol = optimize_phases_and_beamformers(&channels, &budget).unwrap();
        sol.f_rx = nsp_receive_beamformer(&channels, &sol).unwrap();
        let variance = measurement_variance(&channels, &sol, &sensing).unwrap();
        set.push(Measurement {
            hover,
            distance: distance(hover, target),
            variance,
        });
    }
    let crb = coordinate_fim(&set, target.x, target.y).unwrap().crb_xy;

    let trials = 2000;
    let mut mse = 0.0;
    for _ in 0..trials {
        let mut sampled = MeasurementSet::default();
        for m in &set.measurements {
            let true_d = distance(m.hover, target);
            sampled.push(Measurement {
                hover: m.hover,
                distance: sample_measurement(true_d, m.variance, &mut rng).unwrap(),
                variance: m.variance,
            });
        }
        let est = mle_localize(&sampled, cfg.half_width_m).unwrap();
        mse += (est.x - target.x).powi(2) + (est.y - target.y).powi(2);
    }
    mse /= trials as f64;
    let ok = mse >= 0.9 * crb && mse <= 3.0 * crb;
    let in_time = start.elapsed().as_secs() < 300;
    report(4, "CRB bounds the MLE", ok && in_time);
    assert!(ok, "MSE {mse} vs CRB {crb}");
    assert!(in_time, "criterion 4 exceeded 5 minutes");
}

/// Criterion 5: analytic gradients match central finite differences on
/// randomized [5, 4, 3] networks.
#[test]
fn acceptance_05_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut ok = true;
    let fd = |net: &Network, f: &mut dyn FnMut(&Network) -> f64| -> Vec<f64> {
        let flat = net.flatten();
        let mut grad = vec![0.0; flat.len()];
        let mut probe = net.clone();
        for i in 0..flat.len() {
            let h = 1e-6 * flat[i].abs().max(1.0);
            let mut p = flat.clone();
            p[i] += h;
            probe.set_flat(&p).unwrap();
            let fp = f(&probe);
            p[i] = flat[i] - h;
            probe.set_flat(&p).unwrap();
            grad[i] = (fp - f(&probe)) / (2.0 * h);
        }
        grad
    };
    let rv = |n: usize, rng: &mut ChaCha8Rng| {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0f64))
    };
    let check = |analytic: &[f64], numeric: &[f64]| {
        analytic
            .iter()
            .zip(numeric)
            .all(|(a, n)| (a - n).abs() / n.abs().max(1e-6) < 1e-4)
    };
    for _ in 0..50 {
        let critic = Network::new(&[6, 5, 4, 3, 1], OutputKind::Linear, &mut rng);
        let batch: Vec<(DVector<f64>, f64)> = (0..4)
            .map(|_| (rv(6, &mut rng), rng.random_range(-1.0..1.0)))
            .collect();
        let (_, g) = critic_loss_and_grads(&critic, &batch);
        let analytic = g.flatten();
        let numeric = fd(&critic, &mut |n| critic_loss_and_grads(n, &batch).0);
        if !check(&analytic, &numeric) {
            ok = false;
        }

        let actor = Network::new(
            &[4, 5, 4, 3, 2],
            OutputKind::BoundedTanh { scale: 8.0 },
            &mut rng,
        );
        let states: Vec<DVector<f64>> = (0..4).map(|_| rv(4, &mut rng)).collect();
        let (_, g) = actor_objective_and_grads(&actor, &critic, &states);
        let analytic = g.flatten();
        let numeric = fd(&actor, &mut |n| {
            -actor_objective_and_grads(n, &critic, &states).0
        });
        if !check(&analytic, &numeric) {
            ok = false;
        }
    }
    report(5, "gradient oracle", ok);
    assert!(ok);
}

/// Criterion 6: the critic converges to the bandit fixed point.
#[test]
fn acceptance_06_bandit_fixed_point() {
    let cfg = TrainConfig {
        gamma: 0.0,
        tau: 0.005,
        lr: 5e-3,
        batch: 8,
        noise_std: 0.0,
        noise_decay: 1.0,
        episodes: 1,
        buffer_capacity: 64,
        updates_per_episode: 1,
        hidden: vec![5, 4, 3],
        v_max: 8.0,
        w_max: 100.0,
    };
    let mut agent = DdpgAgent::new(cfg, 606);
    let s = MdpState {
        aris_x: 0.0,
        aris_y: 0.0,
        est_target_x: 0.0,
        est_target_y: 0.0,
    };
    for _ in 0..32 {
        agent.buffer.push(Transition {
            state: s,
            action: Velocity2::new(0.0, 0.0),
            reward: 1.0,
            next_state: s,
            done: true,
        });
    }
    for _ in 0..2000 {
        agent.update().unwrap();
    }
    let mut x = DVector::zeros(6);
    x.rows_mut(0, 4)
        .copy_from(&DVector::from_column_slice(&s.features(100.0)));
    let q = agent.critic.forward(&x)[0];
    let ok = (q - 1.0).abs() <= 1e-2;
    report(6, "bandit fixed point", ok);
    assert!(ok, "critic converged to {q}");
}

struct DeskRun {
    rewards: Vec<f64>,
    eval_steps: Vec<StepOutcome>,
}

fn train_desk(scheme: SchemeId, seed: u64, sinr_db: f64) -> DeskRun {
    let mut cfg = ExperimentConfig::desk();
    cfg.sinr_threshold_db = sinr_db;
    let mut env = Environment::new(&cfg, scheme, seed).unwrap();
    let mut agent = DdpgAgent::new(TrainConfig::from_experiment(&cfg), seed ^ 0x5DEECE66D);
    let rewards = agent.train(&mut env).unwrap();
    let mut eval_env = Environment::new(&cfg, scheme, seed.wrapping_add(1_000_003)).unwrap();
    let eval = eval_env.run_episode(|s| agent.act(s)).unwrap();
    DeskRun {
        rewards,
        eval_steps: eval.steps,
    }
}

/// Desk-scale training runs shared by criteria 7 and 8: 5 seeds for each
/// of the three schemes at the default threshold.
fn desk_runs() -> &'static Vec<(SchemeId, u64, DeskRun)> {
    static RUNS: OnceLock<Vec<(SchemeId, u64, DeskRun)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut jobs = Vec::new();
        for scheme in [SchemeId::Proposed, SchemeId::FixedRis, SchemeId::WithoutNsp] {
            for seed in 0..5u64 {
                jobs.push((scheme, seed));
            }
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|&(scheme, seed)| {
                    scope.spawn(move || (scheme, seed, train_desk(scheme, seed, 10.0)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    })
}

fn mean_tail(xs: &[f64], n: usize) -> f64 {
    let tail = &xs[xs.len().saturating_sub(n)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Criterion 7: proposed beats the matched receiver on final mean reward
/// in at least 4 of 5 seeds.
#[test]
fn acceptance_07_reward_ordering() {
    let start = std::time::Instant::now();
    let runs = desk_runs();
    let mut wins = 0;
    for seed in 0..5u64 {
        let final_mean = |scheme| {
            runs.iter()
                .find(|(s, sd, _)| *s == scheme && *sd == seed)
                .map(|(_, _, r)| mean_tail(&r.rewards, 20))
                .unwrap()
        };
        if final_mean(SchemeId::Proposed) > final_mean(SchemeId::WithoutNsp) {
            wins += 1;
        }
    }
    let ok = wins >= 4;
    let in_time = start.elapsed().as_secs() < 1800;
    report(7, "scheme reward ordering", ok && in_time);
    assert!(ok, "proposed beat without-NSP in only {wins}/5 seeds");
    assert!(in_time, "criterion 7 exceeded 30 minutes");
}

/// Criterion 8: final-slot final-slot SEE orderings across schemes.
#[test]
fn acceptance_08_see_ordering() {
    let runs = desk_runs();
    let collect_see = |scheme, slot: usize| -> Vec<f64> {
        runs.iter()
            .filter(|(s, _, _)| *s == scheme)
            .map(|(_, _, r)| {
                r.eval_steps[slot - 1]
                    .see
                    .unwrap_or(4.0 * 100.0 * 100.0)
            })
            .collect()
    };
    let proposed_final = median(collect_see(SchemeId::Proposed, 12));
    let fixed_final = median(collect_see(SchemeId::FixedRis, 12));
    let proposed_early = median(collect_see(SchemeId::Proposed, 2));
    let ok = proposed_final <= fixed_final && proposed_final < proposed_early;
    report(8, "scheme SEE ordering", ok);
    assert!(
        ok,
        "proposed final {proposed_final}, fixed final {fixed_final}, proposed slot-2 {proposed_early}"
    );
}

/// Criterion 9: the converged hover position shifts toward the users as
/// the SINR threshold rises.
#[test]
fn acceptance_09_threshold_sweep() {
    let cfg = ExperimentConfig::desk();
    let users_centroid = {
        let n = cfg.user_positions.len() as f64;
        let (sx, sy) = cfg
            .user_positions
            .iter()
            .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        Vector2::new(sx / n, sy / n)
    };
    let target = Vector2::new(cfg.target_position[0], cfg.target_position[1]);
    let axis = (users_centroid - target).normalize();

    let mut projections = Vec::new();
    for sinr_db in [6.0, 10.0, 14.0] {
        let positions: Vec<Vector2<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..3u64)
                .map(|seed| {
                    scope.spawn(move || {
                        let run = train_desk(SchemeId::Proposed, seed, sinr_db);
                        let last3 = &run.eval_steps[run.eval_steps.len() - 3..];
                        let (sx, sy) = last3
                            .iter()
                            .fold((0.0, 0.0), |(x, y), s| (x + s.aris.x, y + s.aris.y));
                        Vector2::new(sx / 3.0, sy / 3.0)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mean = positions.iter().sum::<Vector2<f64>>() / positions.len() as f64;
        projections.push((mean - target).dot(&axis));
    }
    let ok = projections[0] < projections[1] && projections[1] < projections[2];
    report(9, "SINR threshold sweep", ok);
    assert!(ok, "projections onto target->users axis: {projections:?}");
}

/// Criterion 10: identical seeds give byte-identical CSV outputs.
#[test]
fn acceptance_10_determinism() {
    let bin = env!("CARGO_BIN_EXE_aris-isac");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml");
    let run = |dir: &std::path::Path, cmd: &str| {
        let status = std::process::Command::new(bin)
            .args([
                cmd,
                "--config",
                config,
                "--seed",
                "9",
                "--episodes",
                "3",
                "--out",
                dir.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(dir.join("reward.csv")).unwrap(),
            std::fs::read(dir.join("trace.csv")).unwrap(),
        )
    };
    let mut ok = true;
    for cmd in ["train", "eval"] {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        if run(d1.path(), cmd) != run(d2.path(), cmd) {
            ok = false;
        }
    }
    report(10, "determinism", ok);
    assert!(ok);
}
