//! Episode environment: the slot-by-slot interaction an agent controls.
//!
//! Each step moves the ARIS by a clamped velocity, redraws the channels at
//! the new hover point, solves the slot's beamforming problem for the
//! selected scheme, collects a range measurement when the echo budget
//! permits, re-localizes the target from all measurements so far, and emits
//! a reward equal to the inverse position CRB minus a boundary penalty.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beamforming::{self, BeamformingSolution, LinkBudget};
use crate::channel::{self, ChannelParams};
use crate::config::ExperimentConfig;
use crate::geometry::{self, MapSpec, Position3, Velocity2};
use crate::sensing::{self, Measurement, MeasurementSet, SensingParams};
use crate::{Error, Result};

/// Static placement of every node.
#[derive(Clone, Debug)]
pub struct Scene {
    pub ap: Position3,
    pub users: Vec<Position3>,
    pub target: Position3,
    pub aris_start: Position3,
    pub map: MapSpec,
}

impl Scene {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let map = cfg.map_spec();
        Self {
            ap: Position3::ground(cfg.ap_position[0], cfg.ap_position[1]),
            users: cfg
                .user_positions
                .iter()
                .map(|p| Position3::ground(p[0], p[1]))
                .collect(),
            target: Position3::ground(cfg.target_position[0], cfg.target_position[1]),
            aris_start: Position3::new(cfg.aris_start[0], cfg.aris_start[1], map.altitude),
            map,
        }
    }
}

/// Which variant of the system a run exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeId {
    /// Per-slot phase optimization with the NSP receiver.
    Proposed,
    /// RIS phases frozen after the first slot of each episode.
    FixedRis,
    /// Per-slot phases but a plain matched-filter receiver.
    WithoutNsp,
}

impl SchemeId {
    pub fn label(self) -> &'static str {
        match self {
            SchemeId::Proposed => "proposed",
            SchemeId::FixedRis => "fixed-ris",
            SchemeId::WithoutNsp => "no-nsp",
        }
    }
}

impl std::str::FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(SchemeId::Proposed),
            "fixed-ris" => Ok(SchemeId::FixedRis),
            "no-nsp" => Ok(SchemeId::WithoutNsp),
            other => Err(Error::Config(format!(
                "unknown scheme `{other}` (expected proposed, fixed-ris, or no-nsp)"
            ))),
        }
    }
}

/// Observation handed to the agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MdpState {
    pub aris_x: f64,
    pub aris_y: f64,
    pub est_target_x: f64,
    pub est_target_y: f64,
}

impl MdpState {
    /// Feature vector normalized by the map half-width.
    pub fn features(&self, w_max: f64) -> [f64; 4] {
        [
            self.aris_x / w_max,
            self.aris_y / w_max,
            self.est_target_x / w_max,
            self.est_target_y / w_max,
        ]
    }
}

/// Everything observable about one slot.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: MdpState,
    pub reward: f64,
    pub done: bool,
    /// 1-based slot index within the episode.
    pub slot: usize,
    pub aris: Position3,
    /// Position CRB at the running estimate, when the geometry supports it.
    pub crb: Option<f64>,
    /// Squared estimation error of the running estimate.
    pub see: Option<f64>,
    /// Lowest user SINR this slot; `None` when there are no users.
    pub min_sinr: Option<f64>,
    pub feasible: bool,
    /// The action would have left the map and was cancelled.
    pub out_of_bounds: bool,
    /// A range measurement was collected this slot.
    pub measured: bool,
}

/// Reward: inverse CRB when defined, with a flat out-of-bounds penalty.
pub fn compute_reward(crb: Option<f64>, out_of_bounds: bool, penalty: f64) -> f64 {
    let base = match crb {
        Some(c) if c.is_finite() && c > 0.0 => 1.0 / c,
        _ => 0.0,
    };
    base - if out_of_bounds { penalty } else { 0.0 }
}

/// One episode's totals.
#[derive(Clone, Debug)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    pub steps: Vec<StepOutcome>,
}

/// The ARIS-ISAC episode environment.
pub struct Environment {
    scene: Scene,
    scheme: SchemeId,
    channel_params: ChannelParams,
    budget: LinkBudget,
    sensing_params: SensingParams,
    max_speed: f64,
    oob_penalty: f64,
    rng: ChaCha8Rng,
    slot: usize,
    aris: Position3,
    measurements: MeasurementSet,
    estimate: (f64, f64),
    fixed_phases: Option<DVector<Complex64>>,
}

impl Environment {
    pub fn new(cfg: &ExperimentConfig, scheme: SchemeId, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let scene = Scene::from_config(cfg);
        Ok(Self {
            scene,
            scheme,
            channel_params: cfg.channel_params(),
            budget: cfg.link_budget(),
            sensing_params: cfg.sensing_params(),
            max_speed: cfg.max_speed_mps,
            oob_penalty: cfg.oob_penalty,
            rng: ChaCha8Rng::seed_from_u64(seed),
            slot: 0,
            aris: Position3::ground(0.0, 0.0),
            measurements: MeasurementSet::default(),
            estimate: (0.0, 0.0),
            fixed_phases: None,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    /// Begin a new episode and return the initial observation.
    pub fn reset(&mut self) -> MdpState {
        self.slot = 0;
        self.aris = self.scene.aris_start;
        self.measurements = MeasurementSet::default();
        self.estimate = (0.0, 0.0);
        self.fixed_phases = None;
        self.state()
    }

    fn state(&self) -> MdpState {
        MdpState {
            aris_x: self.aris.x,
            aris_y: self.aris.y,
            est_target_x: self.estimate.0,
            est_target_y: self.estimate.1,
        }
    }

    /// Solve the slot for this environment's scheme.
    fn solve_slot(&mut self, channels: &channel::ChannelSet) -> Result<BeamformingSolution> {
        let mut solution = match self.scheme {
            SchemeId::Proposed | SchemeId::WithoutNsp => {
                beamforming::optimize_phases_and_beamformers(channels, &self.budget)?
            }
            SchemeId::FixedRis => {
                let phases = match &self.fixed_phases {
                    Some(p) => p.clone(),
                    None => {
                        let p = beamforming::target_aligned_phases(channels);
                        self.fixed_phases = Some(p.clone());
                        p
                    }
                };
                beamforming::optimize_beamformers_fixed_phases(channels, &self.budget, phases)?
            }
        };
        if self.scheme != SchemeId::WithoutNsp {
            match beamforming::nsp_receive_beamformer(channels, &solution) {
                Ok(f) => solution.f_rx = f,
                Err(Error::NspDegenerate) => {} // keep the matched filter; echo is unusable anyway
                Err(e) => return Err(e),
            }
        }
        Ok(solution)
    }

    /// Advance one slot.
    pub fn step(&mut self, action: Velocity2) -> Result<StepOutcome> {
        if self.slot >= self.scene.map.total_slots {
            return Err(Error::Runtime(
                "episode is finished; call reset() first".into(),
            ));
        }
        let v = action.clamped(self.max_speed);
        let candidate = geometry::advance(self.aris, v, self.scene.map.delta_t);
        let out_of_bounds = !geometry::in_bounds(candidate, &self.scene.map);
        if !out_of_bounds {
            self.aris = candidate;
        }

        let channels = channel::realize(
            &self.channel_params,
            self.scene.ap,
            self.aris,
            &self.scene.users,
            self.scene.target,
            &mut self.rng,
        )?;
        let solution = self.solve_slot(&channels)?;

        let mut measured = false;
        match sensing::measurement_variance(&channels, &solution, &self.sensing_params) {
            Ok(variance) => {
                let true_d = geometry::distance(self.aris, self.scene.target);
                let distance = sensing::sample_measurement(true_d, variance, &mut self.rng)?;
                self.measurements.push(Measurement {
                    hover: self.aris,
                    distance,
                    variance,
                });
                measured = true;
            }
            Err(Error::NoEcho) | Err(Error::NspDegenerate) => {}
            Err(e) => return Err(e),
        }

        let mut see = None;
        let mut crb = None;
        if !self.measurements.is_empty() {
            let est = sensing::mle_localize(&self.measurements, self.scene.map.w_max)?;
            self.estimate = (est.x, est.y);
            see = Some(
                (est.x - self.scene.target.x).powi(2) + (est.y - self.scene.target.y).powi(2),
            );
            if let Ok(fisher) = sensing::coordinate_fim(&self.measurements, est.x, est.y) {
                crb = Some(fisher.crb_xy);
            }
        }

        let reward = compute_reward(crb, out_of_bounds, self.oob_penalty);
        self.slot += 1;
        let min_sinr = solution
            .sinr
            .iter()
            .cloned()
            .fold(None, |acc: Option<f64>, g| {
                Some(acc.map_or(g, |a| a.min(g)))
            });
        Ok(StepOutcome {
            state: self.state(),
            reward,
            done: self.slot == self.scene.map.total_slots,
            slot: self.slot,
            aris: self.aris,
            crb,
            see,
            min_sinr,
            feasible: solution.feasible,
            out_of_bounds,
            measured,
        })
    }

    /// Run a full episode under a policy.
    pub fn run_episode<F>(&mut self, mut policy: F) -> Result<EpisodeSummary>
    where
        F: FnMut(&MdpState) -> Velocity2,
    {
        let mut state = self.reset();
        let mut steps = Vec::with_capacity(self.scene.map.total_slots);
        let mut total_reward = 0.0;
        loop {
            let outcome = self.step(policy(&state))?;
            total_reward += outcome.reward;
            state = outcome.state;
            let done = outcome.done;
            steps.push(outcome);
            if done {
                break;
            }
        }
        Ok(EpisodeSummary {
            total_reward,
            steps,
        })
    }
}
