//! Advantage estimation over fixed-horizon trajectory segments.

use crate::{Error, Result};

/// All observations of one environment step, kept alongside a sample so a
/// centralized (pooled) policy can replay the joint forward pass exactly.
#[derive(Debug, Clone)]
pub struct JointStepObs {
    /// Concatenated observations of every agent active at that step.
    pub obs: Vec<f64>,
    pub n_agents: usize,
    /// Which of those agents this sample belongs to.
    pub self_index: usize,
}

impl JointStepObs {
    pub fn rows(&self, obs_dim: usize) -> Vec<Vec<f64>> {
        self.obs.chunks(obs_dim).map(|c| c.to_vec()).collect()
    }
}

/// Flattened training batch: `n_segments` segments of `horizon` steps each,
/// stored segment-major. `advantages`/`returns` stay empty until
/// [`Batch::compute_gae`] fills them. `joint` is empty for decentralized
/// policies and one entry per sample for centralized ones.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub obs: Vec<f64>,
    pub obs_dim: usize,
    pub horizon: usize,
    pub actions: Vec<[f64; 2]>,
    pub old_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// One value-function bootstrap per segment, used past the last step.
    pub bootstrap_values: Vec<f64>,
    /// Parameter version each segment was collected with.
    pub versions: Vec<u64>,
    pub joint: Vec<JointStepObs>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn n_samples(&self) -> usize {
        self.rewards.len()
    }

    pub fn n_segments(&self) -> usize {
        self.bootstrap_values.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        if self.horizon == 0 || self.obs_dim == 0 {
            return Err(Error::Runtime("batch horizon and obs_dim must be nonzero".into()));
        }
        let segs = self.bootstrap_values.len();
        if segs * self.horizon != n {
            return Err(Error::Runtime(format!(
                "batch holds {n} steps but {segs} segments of horizon {}",
                self.horizon
            )));
        }
        let aligned = self.obs.len() == n * self.obs_dim
            && self.actions.len() == n
            && self.old_log_probs.len() == n
            && self.values.len() == n
            && self.dones.len() == n
            && self.versions.len() == segs;
        if !aligned {
            return Err(Error::Runtime("batch arrays have mismatched lengths".into()));
        }
        if !self.advantages.is_empty()
            && (self.advantages.len() != n || self.returns.len() != n)
        {
            return Err(Error::Runtime("batch advantage arrays have mismatched lengths".into()));
        }
        if !self.joint.is_empty() && self.joint.len() != n {
            return Err(Error::Runtime(
                "joint observation contexts must cover every sample or none".into(),
            ));
        }
        Ok(())
    }

    pub fn obs_row(&self, sample: usize) -> &[f64] {
        &self.obs[sample * self.obs_dim..(sample + 1) * self.obs_dim]
    }

    /// Fill `advantages` and `returns` segment by segment.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        self.validate()?;
        let h = self.horizon;
        let mut adv = Vec::with_capacity(self.n_samples());
        let mut ret = Vec::with_capacity(self.n_samples());
        for s in 0..self.n_segments() {
            let lo = s * h;
            let hi = lo + h;
            let (a, r) = compute_gae(
                &self.rewards[lo..hi],
                &self.values[lo..hi],
                &self.dones[lo..hi],
                self.bootstrap_values[s],
                gamma,
                lambda,
            )?;
            adv.extend(a);
            ret.extend(r);
        }
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    /// Mean version gap of this batch relative to `current`.
    pub fn mean_version_gap(&self, current: u64) -> f64 {
        if self.versions.is_empty() {
            return 0.0;
        }
        let total: u64 = self.versions.iter().map(|v| current.saturating_sub(*v)).sum();
        total as f64 / self.versions.len() as f64
    }
}

/// Backward-recursion advantage estimator for one segment.
///
/// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t, with V past the end
/// taken from `bootstrap_value`; A_t = delta_t + gamma * lambda *
/// (1 - done_t) * A_{t+1}; returns = A + V. Done steps cut bootstrapping.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Runtime(format!(
            "advantage inputs disagree on length: {n} rewards, {} values, {} dones",
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let v_next = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * v_next * live - values[t];
        acc = delta + gamma * lambda * live * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// Standardize advantages over the whole batch: (A - mean) / (population
/// std + 1e-8). Batch-level on purpose — segments from every agent share
/// one scale.
pub fn normalize_advantages(batch: &mut Batch) -> Result<()> {
    if batch.advantages.len() != batch.n_samples() {
        return Err(Error::Runtime(
            "advantages must be computed before normalization".into(),
        ));
    }
    let n = batch.advantages.len() as f64;
    let mean = batch.advantages.iter().sum::<f64>() / n;
    let var = batch
        .advantages
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / n;
    let denom = var.sqrt() + 1e-8;
    for a in &mut batch.advantages {
        *a = (*a - mean) / denom;
    }
    Ok(())
}
