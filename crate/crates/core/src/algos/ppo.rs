//! Clipped-surrogate policy optimization over flattened segment batches.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algos::{Adam, Batch, Hyperparams};
use crate::policy::{base_entropy, logp_and_grads, ModelParameters, Net, UpstreamGrad};
use crate::sim::Action;
use crate::{Error, Result};

/// Per-update training diagnostics.
///
/// Loss terms are measured on the full batch with the parameters as they
/// were on entry (so a freshly copied policy reports kl = 0 and
/// clip_fraction = 0); `post_kl` is re-measured after all epochs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UpdateStats {
    pub version: u64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub post_kl: f64,
    pub samples: usize,
}

/// Pessimistic per-sample objective: min(rho * A, clamp(rho) * A).
pub(crate) fn surrogate(rho: f64, advantage: f64, eps: f64) -> f64 {
    (rho * advantage).min(rho.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

pub struct PpoLearner {
    net: Net,
    opt: Adam,
    hyper: Hyperparams,
    version: u64,
    rng: ChaCha8Rng,
}

/// Everything the loss needs from one sample's fresh forward pass.
struct SampleEval {
    log_prob: f64,
    d_mean: [f64; 2],
    d_log_std: [f64; 2],
    value: f64,
    entropy: f64,
}

impl PpoLearner {
    pub fn new(params: &ModelParameters, hyper: &Hyperparams, seed: u64) -> Result<PpoLearner> {
        hyper.validate()?;
        let net = Net::from_params(params)?;
        let opt = Adam::new(net.param_count(), hyper.learning_rate);
        Ok(PpoLearner {
            opt,
            hyper: hyper.clone(),
            version: params.version,
            rng: ChaCha8Rng::seed_from_u64(seed),
            net,
        })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn snapshot(&self) -> ModelParameters {
        self.net.to_params(self.version)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        batch.validate()?;
        if batch.n_samples() == 0 {
            return Err(Error::Runtime("update on an empty batch".into()));
        }
        if batch.obs_dim != self.net.cfg.obs_dim {
            return Err(Error::Runtime(format!(
                "batch obs_dim {} does not match network obs_dim {}",
                batch.obs_dim, self.net.cfg.obs_dim
            )));
        }
        if batch.advantages.len() != batch.n_samples() {
            return Err(Error::Runtime(
                "advantages must be computed before a policy update".into(),
            ));
        }
        let centralized = self.net.cfg.mode == crate::policy::Mode::Ctce;
        if centralized && batch.joint.len() != batch.n_samples() {
            return Err(Error::Runtime(
                "centralized updates need per-sample joint observations".into(),
            ));
        }
        Ok(())
    }

    /// Forward pass and log-prob gradients for one sample under the current
    /// parameters, using the joint observation context in centralized mode.
    fn eval_sample(
        &self,
        batch: &Batch,
        idx: usize,
        tapes: Option<&mut Vec<SampleTape>>,
    ) -> Result<SampleEval> {
        let action = Action {
            steer: batch.actions[idx][0],
            throttle: batch.actions[idx][1],
        };
        if self.net.cfg.mode == crate::policy::Mode::Ctce {
            let step = &batch.joint[idx];
            let obs_all = step.rows(batch.obs_dim);
            let groups: Vec<Vec<usize>> = (0..obs_all.len())
                .map(|_| (0..obs_all.len()).collect())
                .collect();
            let (outs, tape) = self.net.forward_ctce_grouped(&obs_all, &groups)?;
            let out = &outs[step.self_index];
            let (log_prob, d_mean, d_log_std) =
                logp_and_grads(&out.mean, &out.log_std, &action);
            if let Some(tapes) = tapes {
                tapes.push(SampleTape::Joint {
                    tape,
                    self_index: step.self_index,
                    n_agents: obs_all.len(),
                });
            }
            Ok(SampleEval {
                log_prob,
                d_mean,
                d_log_std,
                value: out.value,
                entropy: base_entropy(&out.log_std),
            })
        } else {
            let (out, tape) = self.net.forward_cached(batch.obs_row(idx))?;
            let (log_prob, d_mean, d_log_std) =
                logp_and_grads(&out.mean, &out.log_std, &action);
            if let Some(tapes) = tapes {
                tapes.push(SampleTape::Local(tape));
            }
            Ok(SampleEval {
                log_prob,
                d_mean,
                d_log_std,
                value: out.value,
                entropy: base_entropy(&out.log_std),
            })
        }
    }

    /// Full-batch loss diagnostics under the current parameters, no update.
    pub fn diagnostics(&self, batch: &Batch) -> Result<UpdateStats> {
        self.check_batch(batch)?;
        let n = batch.n_samples();
        let eps = self.hyper.clip_epsilon;
        let (mut policy_loss, mut value_loss, mut entropy) = (0.0, 0.0, 0.0);
        let (mut clipped, mut kl) = (0usize, 0.0);
        for i in 0..n {
            let ev = self.eval_sample(batch, i, None)?;
            let rho = (ev.log_prob - batch.old_log_probs[i]).exp();
            policy_loss -= surrogate(rho, batch.advantages[i], eps);
            if (rho - 1.0).abs() > eps {
                clipped += 1;
            }
            kl += rho - 1.0 - rho.ln();
            let verr = ev.value - batch.returns[i];
            value_loss += verr * verr;
            entropy += ev.entropy;
        }
        let nf = n as f64;
        Ok(UpdateStats {
            version: self.version,
            policy_loss: policy_loss / nf,
            value_loss: value_loss / nf,
            entropy: entropy / nf,
            clip_fraction: clipped as f64 / nf,
            approx_kl: kl / nf,
            post_kl: kl / nf,
            samples: n,
        })
    }

    /// `ppo_epochs` passes of shuffled minibatch descent; bumps the
    /// parameter version exactly once.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        self.check_batch(batch)?;
        let mut stats = self.diagnostics(batch)?;

        let n = batch.n_samples();
        let mut flat = self.net.flatten();
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..self.hyper.ppo_epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.hyper.minibatch_size) {
                let grad = self.minibatch_gradient(batch, chunk)?;
                self.opt.step(&mut flat, &grad);
                self.net.set_from_flat(&flat)?;
                // Read back so optimizer state follows the projected
                // log_std bounds.
                flat = self.net.flatten();
            }
        }

        self.version += 1;
        stats.version = self.version;

        let mut post_kl = 0.0;
        for i in 0..n {
            let ev = self.eval_sample(batch, i, None)?;
            let rho = (ev.log_prob - batch.old_log_probs[i]).exp();
            post_kl += rho - 1.0 - rho.ln();
        }
        stats.post_kl = post_kl / n as f64;
        Ok(stats)
    }

    /// Mean loss gradient over one minibatch of sample indices.
    fn minibatch_gradient(&self, batch: &Batch, chunk: &[usize]) -> Result<Vec<f64>> {
        let m = chunk.len() as f64;
        let eps = self.hyper.clip_epsilon;
        let mut tapes: Vec<SampleTape> = Vec::with_capacity(chunk.len());
        let mut upstreams: Vec<UpstreamGrad> = Vec::with_capacity(chunk.len());
        for &i in chunk {
            let ev = self.eval_sample(batch, i, Some(&mut tapes))?;
            let adv = batch.advantages[i];
            let rho = (ev.log_prob - batch.old_log_probs[i]).exp();
            // d(-surrogate)/d(log_prob): the min passes gradient only when
            // the unclipped branch is active (ties included).
            let unclipped = rho * adv;
            let clipped = rho.clamp(1.0 - eps, 1.0 + eps) * adv;
            let d_logp = if unclipped <= clipped { -rho * adv / m } else { 0.0 };
            let d_value = self.hyper.value_coef * 2.0 * (ev.value - batch.returns[i]) / m;
            let mut up = UpstreamGrad::default();
            for k in 0..2 {
                up.d_mean[k] = d_logp * ev.d_mean[k];
                // The entropy bonus only touches log_std (dH/dlog_std = 1).
                up.d_log_std[k] = d_logp * ev.d_log_std[k] - self.hyper.entropy_coef / m;
            }
            up.d_value = d_value;
            upstreams.push(up);
        }
        self.accumulate(&tapes, &upstreams)
    }

    fn accumulate(&self, tapes: &[SampleTape], upstreams: &[UpstreamGrad]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.net.param_count()];
        for (tape, up) in tapes.iter().zip(upstreams) {
            let g = match tape {
                SampleTape::Local(t) => {
                    self.net.backward(std::slice::from_ref(t), &[*up])?
                }
                SampleTape::Joint { tape, self_index, n_agents } => {
                    let mut ups = vec![UpstreamGrad::default(); *n_agents];
                    ups[*self_index] = *up;
                    self.net.backward_ctce(tape, &ups)?
                }
            };
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        Ok(grad)
    }
}

enum SampleTape {
    Local(crate::policy::Tape),
    Joint {
        tape: crate::policy::CtceTape,
        self_index: usize,
        n_agents: usize,
    },
}

/// One-shot update: fresh optimizer state, one version bump.
pub fn ppo_update(
    params: &ModelParameters,
    batch: &Batch,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<(ModelParameters, UpdateStats)> {
    let mut learner = PpoLearner::new(params, hyper, seed)?;
    let stats = learner.update(batch)?;
    Ok((learner.snapshot(), stats))
}
