use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Learner hyperparameters shared by PPO, SAC, and DDPG. Every field has a
/// conventional default; the config file can override any of them.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Hyperparams {
    /// Discount factor in [0, 1].
    pub gamma: f64,
    /// Advantage-estimation decay in [0, 1].
    pub lambda: f64,
    /// Clipped-surrogate radius, > 0.
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Passes over each batch per PPO update.
    pub ppo_epochs: usize,
    pub minibatch_size: usize,
    /// Target-network averaging rate in (0, 1].
    pub polyak_tau: f64,
    /// Fixed SAC temperature (no auto-tuning).
    pub sac_alpha: f64,
    /// Std-dev of DDPG exploration noise.
    pub ddpg_noise_std: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.99,
            lambda: 0.95,
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            ppo_epochs: 4,
            minibatch_size: 256,
            polyak_tau: 0.005,
            sac_alpha: 0.2,
            ddpg_noise_std: 0.1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.clip_epsilon > 0.0) {
            return bad("clip_epsilon must be > 0");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be a positive finite number");
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return bad("entropy_coef and value_coef must be >= 0");
        }
        if self.ppo_epochs == 0 {
            return bad("ppo_epochs must be >= 1");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size must be >= 1");
        }
        if !(self.polyak_tau > 0.0 && self.polyak_tau <= 1.0) {
            return bad("polyak_tau must lie in (0, 1]");
        }
        if self.sac_alpha < 0.0 {
            return bad("sac_alpha must be >= 0");
        }
        if self.ddpg_noise_std < 0.0 {
            return bad("ddpg_noise_std must be >= 0");
        }
        Ok(())
    }
}
