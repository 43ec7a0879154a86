//! Soft actor-critic with twin critics and a fixed temperature.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algos::{Adam, CriticNet, Hyperparams};
use crate::policy::{rsample, Mode, ModelParameters, Net, UpstreamGrad};
use crate::{Error, Result};

/// Uniformly sampled off-policy transitions.
#[derive(Debug, Clone, Default)]
pub struct ReplayBatch {
    pub obs: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub obs_dim: usize,
    pub actions: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        if n == 0 {
            return Err(Error::Runtime("update on an empty replay batch".into()));
        }
        if self.obs_dim == 0 {
            return Err(Error::Runtime("replay batch obs_dim must be nonzero".into()));
        }
        if self.obs.len() != n * self.obs_dim
            || self.next_obs.len() != n * self.obs_dim
            || self.actions.len() != n
            || self.dones.len() != n
        {
            return Err(Error::Runtime("replay batch arrays have mismatched lengths".into()));
        }
        Ok(())
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn next_obs_row(&self, i: usize) -> &[f64] {
        &self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SacStats {
    pub version: u64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub mean_q: f64,
}

pub struct SacLearner {
    actor: Net,
    q1: CriticNet,
    q2: CriticNet,
    q1_target: CriticNet,
    q2_target: CriticNet,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    hyper: Hyperparams,
    version: u64,
    rng: ChaCha8Rng,
}

impl SacLearner {
    pub fn new(params: &ModelParameters, hyper: &Hyperparams, seed: u64) -> Result<SacLearner> {
        hyper.validate()?;
        let actor = Net::from_params(params)?;
        if actor.cfg.mode != Mode::Ctde {
            return Err(Error::Config(
                "the off-policy learners support decentralized policies only".into(),
            ));
        }
        let obs_dim = actor.cfg.obs_dim;
        let hidden = actor.cfg.hidden.clone();
        let q1 = CriticNet::init(obs_dim, &hidden, seed ^ 0x5ac1)?;
        let q2 = CriticNet::init(obs_dim, &hidden, seed ^ 0x5ac2)?;
        let q1_target = q1.clone();
        let q2_target = q2.clone();
        let opt_actor = Adam::new(actor.param_count(), hyper.learning_rate);
        let opt_q1 = Adam::new(q1.param_count(), hyper.learning_rate);
        let opt_q2 = Adam::new(q2.param_count(), hyper.learning_rate);
        Ok(SacLearner {
            actor,
            q1,
            q2,
            q1_target,
            q2_target,
            opt_actor,
            opt_q1,
            opt_q2,
            hyper: hyper.clone(),
            version: params.version,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn snapshot(&self) -> ModelParameters {
        self.actor.to_params(self.version)
    }

    pub fn update(&mut self, batch: &ReplayBatch) -> Result<SacStats> {
        batch.validate()?;
        if batch.obs_dim != self.actor.cfg.obs_dim {
            return Err(Error::Runtime(format!(
                "replay batch obs_dim {} does not match network obs_dim {}",
                batch.obs_dim, self.actor.cfg.obs_dim
            )));
        }
        let n = batch.len();
        let nf = n as f64;
        let alpha = self.hyper.sac_alpha;
        let gamma = self.hyper.gamma;

        // Soft Bellman targets from the target critics and a fresh draw of
        // the current policy at s'.
        let targets = sac_targets(
            &self.actor,
            &self.q1_target,
            &self.q2_target,
            batch,
            alpha,
            gamma,
            &mut self.rng,
        )?;

        // Twin critic regression toward the shared targets.
        let mut critic_loss = 0.0;
        let mut mean_q = 0.0;
        for (critic, opt) in [
            (&mut self.q1, &mut self.opt_q1),
            (&mut self.q2, &mut self.opt_q2),
        ] {
            let mut grad = vec![0.0; critic.param_count()];
            for i in 0..n {
                let (q, tape) = critic.forward_cached(batch.obs_row(i), &batch.actions[i]);
                let err = q - targets[i];
                critic_loss += err * err / nf;
                mean_q += q / (2.0 * nf);
                let (g, _) = critic.backward(&tape, 2.0 * err / nf);
                for (acc, gi) in grad.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }
            let mut flat = critic.flatten();
            opt.step(&mut flat, &grad);
            critic.set_from_flat(&flat)?;
        }

        // Reparameterized actor step against the updated critics.
        let xis: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let d = rsample(&[0.0, 0.0], &[0.0, 0.0], &mut self.rng);
                d.xi
            })
            .collect();
        let (actor_loss, grad) =
            sac_actor_loss_grad(&self.actor, &self.q1, &self.q2, batch, &xis, alpha)?;
        let mut flat = self.actor.flatten();
        self.opt_actor.step(&mut flat, &grad);
        self.actor.set_from_flat(&flat)?;

        self.q1_target.polyak_from(&self.q1, self.hyper.polyak_tau);
        self.q2_target.polyak_from(&self.q2, self.hyper.polyak_tau);
        self.version += 1;
        Ok(SacStats {
            version: self.version,
            critic_loss: critic_loss / 2.0,
            actor_loss,
            mean_q,
        })
    }

    #[cfg(test)]
    pub(crate) fn target_networks(&self) -> (&CriticNet, &CriticNet) {
        (&self.q1_target, &self.q2_target)
    }

    #[cfg(test)]
    pub(crate) fn online_networks(&self) -> (&CriticNet, &CriticNet) {
        (&self.q1, &self.q2)
    }
}

/// y = r + gamma * (1 - done) * (min(Q1', Q2') - alpha * log pi(a'|s')).
pub(crate) fn sac_targets(
    actor: &Net,
    q1_target: &CriticNet,
    q2_target: &CriticNet,
    batch: &ReplayBatch,
    alpha: f64,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let next = batch.next_obs_row(i);
        let pol = actor.forward(next)?;
        let draw = rsample(&pol.mean, &pol.log_std, rng);
        let q1 = q1_target.forward(next, &draw.action);
        let q2 = q2_target.forward(next, &draw.action);
        let live = if batch.dones[i] { 0.0 } else { 1.0 };
        out.push(batch.rewards[i] + gamma * live * (q1.min(q2) - alpha * draw.log_prob));
    }
    Ok(out)
}

/// Actor loss mean(alpha * log pi(a~|s) - min Q(s, a~)) with a~ drawn via the
/// reparameterization a~ = tanh(mean + sigma * xi), xi held fixed, plus its
/// gradient w.r.t. the actor parameters.
pub(crate) fn sac_actor_loss_grad(
    actor: &Net,
    q1: &CriticNet,
    q2: &CriticNet,
    batch: &ReplayBatch,
    xis: &[[f64; 2]],
    alpha: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    let nf = n as f64;
    let mut loss = 0.0;
    let mut tapes = Vec::with_capacity(n);
    let mut ups = Vec::with_capacity(n);
    for i in 0..n {
        let obs = batch.obs_row(i);
        let (pol, tape) = actor.forward_cached(obs)?;
        let xi = xis[i];
        let mut action = [0.0; 2];
        let mut u = [0.0; 2];
        let mut log_prob = 0.0;
        for k in 0..2 {
            let sigma = pol.log_std[k].exp();
            u[k] = pol.mean[k] + sigma * xi[k];
            action[k] = u[k].tanh();
            log_prob += -0.5 * xi[k] * xi[k]
                - pol.log_std[k]
                - 0.5 * (2.0 * std::f64::consts::PI).ln()
                - crate::policy::dist::log_one_minus_tanh_sq(u[k]);
        }
        let (qa1, tape1) = q1.forward_cached(obs, &action);
        let (qa2, tape2) = q2.forward_cached(obs, &action);
        let (q_min, d_action) = if qa1 <= qa2 {
            let (_, d) = q1.backward(&tape1, 1.0);
            (qa1, d)
        } else {
            let (_, d) = q2.backward(&tape2, 1.0);
            (qa2, d)
        };
        loss += (alpha * log_prob - q_min) / nf;

        let mut up = UpstreamGrad::default();
        for k in 0..2 {
            let sigma = pol.log_std[k].exp();
            let t = u[k].tanh();
            let da_du = 1.0 - t * t;
            // d log pi / d mean = 2 tanh(u); d log pi / d log_std =
            // -1 + 2 tanh(u) sigma xi (xi fixed).
            up.d_mean[k] = (alpha * 2.0 * t - d_action[k] * da_du) / nf;
            up.d_log_std[k] =
                (alpha * (-1.0 + 2.0 * t * sigma * xi[k]) - d_action[k] * da_du * sigma * xi[k])
                    / nf;
        }
        tapes.push(tape);
        ups.push(up);
    }
    let grad = actor.backward(&tapes, &ups)?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{init_params, NetworkConfig};
    use rand::Rng;

    fn tiny_cfg() -> NetworkConfig {
        NetworkConfig {
            obs_dim: 4,
            action_dim: 2,
            hidden: vec![6],
            mode: Mode::Ctde,
            pooled_width: 6,
        }
    }

    fn random_batch(n: usize, obs_dim: usize, seed: u64) -> ReplayBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut batch = ReplayBatch {
            obs_dim,
            ..ReplayBatch::default()
        };
        for _ in 0..n {
            for _ in 0..obs_dim {
                batch.obs.push(rng.gen_range(-1.0..1.0));
            }
            for _ in 0..obs_dim {
                batch.next_obs.push(rng.gen_range(-1.0..1.0));
            }
            batch
                .actions
                .push([rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)]);
            batch.rewards.push(rng.gen_range(-1.0..1.0));
            batch.dones.push(rng.gen_bool(0.2));
        }
        batch
    }

    #[test]
    fn tau_one_copies_online_to_targets() {
        let params = init_params(&tiny_cfg(), 1).unwrap();
        let hyper = Hyperparams {
            polyak_tau: 1.0,
            ..Hyperparams::default()
        };
        let mut learner = SacLearner::new(&params, &hyper, 5).unwrap();
        learner.update(&random_batch(16, 4, 2)).unwrap();
        let (q1, q2) = learner.online_networks();
        let (t1, t2) = learner.target_networks();
        assert_eq!(t1.flatten(), q1.flatten());
        assert_eq!(t2.flatten(), q2.flatten());
    }

    #[test]
    fn empty_batch_is_rejected() {
        let params = init_params(&tiny_cfg(), 1).unwrap();
        let mut learner = SacLearner::new(&params, &Hyperparams::default(), 5).unwrap();
        let batch = ReplayBatch {
            obs_dim: 4,
            ..ReplayBatch::default()
        };
        assert!(learner.update(&batch).is_err());
    }

    #[test]
    fn update_bumps_version_and_moves_actor() {
        let params = init_params(&tiny_cfg(), 1).unwrap();
        let mut learner = SacLearner::new(&params, &Hyperparams::default(), 5).unwrap();
        let stats = learner.update(&random_batch(32, 4, 3)).unwrap();
        assert_eq!(stats.version, 1);
        assert_ne!(learner.snapshot().values, params.values);
    }

    #[test]
    fn done_transitions_use_reward_only_targets() {
        let params = init_params(&tiny_cfg(), 1).unwrap();
        let learner = SacLearner::new(&params, &Hyperparams::default(), 5).unwrap();
        let mut batch = random_batch(8, 4, 7);
        batch.dones = vec![true; 8];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let targets = sac_targets(
            &learner.actor,
            &learner.q1_target,
            &learner.q2_target,
            &batch,
            0.2,
            0.99,
            &mut rng,
        )
        .unwrap();
        assert_eq!(targets, batch.rewards);
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let cfg = tiny_cfg();
        let params = init_params(&cfg, 9).unwrap();
        let actor = Net::from_params(&params).unwrap();
        let q1 = CriticNet::init(4, &[6], 21).unwrap();
        let q2 = CriticNet::init(4, &[6], 22).unwrap();
        let batch = random_batch(5, 4, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let xis: Vec<[f64; 2]> = (0..5)
            .map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)])
            .collect();

        let (_, grad) = sac_actor_loss_grad(&actor, &q1, &q2, &batch, &xis, 0.2).unwrap();

        let h = 1e-4;
        let flat = actor.flatten();
        let mut worst: f64 = 0.0;
        for i in 0..flat.len() {
            let mut probe = actor.clone();
            let mut fp = flat.clone();
            fp[i] += h;
            probe.set_from_flat(&fp).unwrap();
            let (lp, _) = sac_actor_loss_grad(&probe, &q1, &q2, &batch, &xis, 0.2).unwrap();
            fp[i] -= 2.0 * h;
            probe.set_from_flat(&fp).unwrap();
            let (lm, _) = sac_actor_loss_grad(&probe, &q1, &q2, &batch, &xis, 0.2).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            worst = worst.max((fd - grad[i]).abs() / denom);
        }
        assert!(worst < 1e-4, "worst actor grad error {worst}");
    }

    #[test]
    fn centralized_actor_is_rejected() {
        let cfg = NetworkConfig {
            mode: Mode::Ctce,
            obs_dim: 4,
            action_dim: 2,
            hidden: vec![6],
            pooled_width: 6,
        };
        let params = init_params(&cfg, 1).unwrap();
        assert!(SacLearner::new(&params, &Hyperparams::default(), 0).is_err());
    }
}
