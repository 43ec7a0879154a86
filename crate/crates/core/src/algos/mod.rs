//! Learning algorithms: GAE, PPO, and the off-policy SAC/DDPG plugins.
//!
//! All learners consume immutable batches, own their optimizer state, and
//! bump the policy parameter version exactly once per successful update.

pub mod adam;
pub mod critic;
pub mod ddpg;
pub mod gae;
pub mod hyper;
pub mod ppo;
pub mod sac;

pub use adam::Adam;
pub use critic::CriticNet;
pub use ddpg::{ddpg_behavior_action, DdpgLearner};
pub use gae::{compute_gae, normalize_advantages, Batch, JointStepObs};
pub use hyper::Hyperparams;
pub use ppo::{ppo_update, PpoLearner, UpdateStats};
pub use sac::{ReplayBatch, SacLearner};
