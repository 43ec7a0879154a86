//! Fixed-horizon trajectory slices shipped from actors to the learner.

use crate::algos::JointStepObs;
use crate::{Error, Result};

/// One agent's transitions over exactly `horizon` env steps, stamped with
/// the parameter version used to act (the oldest one, if a snapshot refresh
/// landed mid-segment). `final_obs` is the observation after the last
/// transition (empty when that transition ended an episode); `joint` carries
/// per-step all-agent observation contexts in centralized mode.
#[derive(Debug, Clone, Default)]
pub struct TrajectorySegment {
    pub agent: usize,
    pub env_id: usize,
    pub obs: Vec<f64>,
    pub obs_dim: usize,
    pub actions: Vec<[f64; 2]>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap_value: f64,
    pub final_obs: Vec<f64>,
    pub joint: Vec<JointStepObs>,
    pub model_version: u64,
}

impl TrajectorySegment {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let n = self.rewards.len();
        if n != horizon {
            return Err(Error::Runtime(format!(
                "segment holds {n} steps, expected horizon {horizon}"
            )));
        }
        if self.obs_dim == 0 || self.obs.len() != n * self.obs_dim {
            return Err(Error::Runtime("segment observation array is misshapen".into()));
        }
        if self.actions.len() != n
            || self.log_probs.len() != n
            || self.values.len() != n
            || self.dones.len() != n
        {
            return Err(Error::Runtime("segment arrays have mismatched lengths".into()));
        }
        if !self.joint.is_empty() && self.joint.len() != n {
            return Err(Error::Runtime(
                "segment joint contexts must cover every step or none".into(),
            ));
        }
        let finite = self.obs.iter().all(|v| v.is_finite())
            && self.log_probs.iter().all(|v| v.is_finite())
            && self.rewards.iter().all(|v| v.is_finite())
            && self.values.iter().all(|v| v.is_finite())
            && self.bootstrap_value.is_finite();
        if !finite {
            return Err(Error::Runtime("segment contains non-finite numbers".into()));
        }
        Ok(())
    }
}
