//! mmWave-NOMA downlink simulator with reinforcement-learning-based joint
//! power allocation and hybrid beamforming.
//!
//! The crate is organized around the pipeline:
//! [`channel`] draws sparse multipath channels, [`phy`] projects beamformers
//! onto the feasible set and scores SIC-ordered rates, [`env`] wraps both
//! into an episodic decision process with a constraint-weighted reward,
//! [`nn`] provides the dense-network substrate, [`agents`] implements the
//! soft actor-critic learner and a DDPG reference, [`baselines`] the
//! analytic comparison methods, and [`harness`] the seeded experiment
//! runner with CSV reporting.
//!
//! See the crate examples for runnable entry points into each capability,
//! or the `mmw-noma-drl` binary for the `train`/`eval`/`sweep`/`baseline`
//! commands.

pub mod agents;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod phy;

pub use error::{Error, Result};
