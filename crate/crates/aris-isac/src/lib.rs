//! Aerial-RIS assisted integrated sensing and communication (ISAC) simulator.
//!
//! The crate models a full-duplex multi-antenna access point that serves
//! ground users and senses a point target through an aerial RIS. Per time
//! slot it realizes the radio channels, solves transmit/receive beamforming
//! with null-space clutter and self-interference suppression, accumulates
//! Fisher information about the target position, and exposes the whole chain
//! as a Markov decision process so a DDPG agent can steer the RIS trajectory
//! to minimize the Cramér-Rao bound of target localization.
//!
//! Modules follow the processing chain:
//! - [`geometry`]: positions, velocities, map bounds, angles.
//! - [`channel`]: per-slot channel realizations and steering vectors.
//! - [`beamforming`]: RIS phases, zero-forcing transmit design, NSP receiver.
//! - [`sensing`]: distance measurements, Fisher information, CRB, MLE.
//! - [`environment`]: MDP state/action/reward and the benchmark schemes.
//! - [`agent`]: actor-critic networks, replay buffer, DDPG training loop.
//! - [`config`] / [`experiment`]: experiment configuration and CSV traces.

pub mod agent;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod environment;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod sensing;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
