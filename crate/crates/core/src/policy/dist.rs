//! tanh-squashed diagonal Gaussian over the two action components.
//!
//! u ~ Normal(mean, exp(log_std)) per component, action = tanh(u). The
//! density carries the change-of-variables term; log(1 - tanh^2(u)) is
//! evaluated in the softplus form that stays finite for large |u|.

use super::net::PolicyOutput;
use crate::sim::Action;
use rand::Rng;
use rand_distr::StandardNormal;

const ATANH_CLIP: f64 = 1.0 - 1e-6;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8; // 0.5 * ln(2*pi)

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// log(1 - tanh(u)^2), stable for any u.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Inverse squash with the inputs nudged off the asymptotes.
pub fn atanh_clipped(a: f64) -> f64 {
    a.clamp(-ATANH_CLIP, ATANH_CLIP).atanh()
}

fn logp_from_u(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    let mut lp = 0.0;
    for k in 0..mean.len() {
        let sigma = log_std[k].exp();
        let xi = (u[k] - mean[k]) / sigma;
        lp += -0.5 * xi * xi - log_std[k] - HALF_LN_TWO_PI - log_one_minus_tanh_sq(u[k]);
    }
    lp
}

/// One reparameterized draw with everything a learner needs to
/// differentiate through it.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub action: [f64; 2],
    /// Pre-squash sample u = mean + sigma * xi.
    pub u: [f64; 2],
    /// The standard-normal noise that produced u.
    pub xi: [f64; 2],
    pub log_prob: f64,
}

pub fn rsample(mean: &[f64], log_std: &[f64], rng: &mut impl Rng) -> Draw {
    let mut u = [0.0; 2];
    let mut xi = [0.0; 2];
    let mut action = [0.0; 2];
    for k in 0..2 {
        let z: f64 = rng.sample(StandardNormal);
        xi[k] = z;
        u[k] = mean[k] + log_std[k].exp() * z;
        action[k] = u[k].tanh();
    }
    Draw {
        action,
        u,
        xi,
        log_prob: logp_from_u(mean, log_std, &u),
    }
}

/// Stochastic action for rollouts.
pub fn sample_action(out: &PolicyOutput, rng: &mut impl Rng) -> (Action, f64) {
    let d = rsample(&out.mean, &out.log_std, rng);
    (
        Action {
            steer: d.action[0],
            throttle: d.action[1],
        },
        d.log_prob,
    )
}

/// Greedy action: the squashed mean.
pub fn deterministic_action(out: &PolicyOutput) -> Action {
    Action {
        steer: out.mean[0].tanh(),
        throttle: out.mean[1].tanh(),
    }
}

/// Exact density of a stored action under (mean, log_std).
pub fn log_prob(out: &PolicyOutput, action: &Action) -> f64 {
    let u = [atanh_clipped(action.steer), atanh_clipped(action.throttle)];
    logp_from_u(&out.mean, &out.log_std, &u)
}

/// log-prob of a fixed action plus its gradients w.r.t. mean and log_std
/// (the action, and hence u = atanh(a), is held constant).
pub fn logp_and_grads(
    mean: &[f64],
    log_std: &[f64],
    action: &Action,
) -> (f64, [f64; 2], [f64; 2]) {
    let u = [atanh_clipped(action.steer), atanh_clipped(action.throttle)];
    let mut d_mean = [0.0; 2];
    let mut d_log_std = [0.0; 2];
    for k in 0..2 {
        let sigma = log_std[k].exp();
        let xi = (u[k] - mean[k]) / sigma;
        d_mean[k] = xi / sigma;
        d_log_std[k] = xi * xi - 1.0;
    }
    (logp_from_u(mean, log_std, &u), d_mean, d_log_std)
}

/// Entropy of the pre-squash Gaussian: sum_k (log_std_k + 0.5 ln(2*pi*e)).
pub fn base_entropy(log_std: &[f64]) -> f64 {
    log_std
        .iter()
        .map(|s| s + HALF_LN_TWO_PI + 0.5)
        .sum()
}
