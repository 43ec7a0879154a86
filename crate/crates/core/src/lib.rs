//! Multi-agent coordination at a signal-free intersection: a 2-D vehicle
//! simulator, rule-based reward shaping, MLP policies with decentralized and
//! centralized execution modes, PPO/SAC/DDPG learners, and an asynchronous
//! actor-learner runtime with version-staleness control.

pub mod algos;
pub mod config;
pub mod env;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod render;
pub mod rewards;
pub mod runtime;
pub mod sim;
pub mod trajlog;

pub use error::{Error, Result};
