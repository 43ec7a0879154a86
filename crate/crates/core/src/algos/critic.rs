//! Q(s, a) networks for the off-policy learners.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::policy::net::Dense;
use crate::{Error, Result};

/// MLP critic: [obs, action] -> tanh hidden layers -> scalar Q value.
#[derive(Debug, Clone)]
pub struct CriticNet {
    hidden: Vec<Dense>,
    head: Dense,
    obs_dim: usize,
}

/// Layer inputs recorded during a cached forward pass.
pub struct CriticTape {
    acts: Vec<Vec<f64>>,
}

impl CriticNet {
    pub fn init(obs_dim: usize, hidden_sizes: &[usize], seed: u64) -> Result<CriticNet> {
        if obs_dim == 0 || hidden_sizes.is_empty() {
            return Err(Error::Net("critic needs obs_dim > 0 and at least one hidden layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |layer: &mut Dense| {
            let bound = (1.0 / layer.in_dim as f64).sqrt();
            for w in layer.w.iter_mut() {
                *w = rng.gen_range(-bound..=bound);
            }
        };
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut in_dim = obs_dim + 2;
        for &h in hidden_sizes {
            let mut l = Dense::zeros(in_dim, h);
            fill(&mut l);
            hidden.push(l);
            in_dim = h;
        }
        let mut head = Dense::zeros(in_dim, 1);
        fill(&mut head);
        Ok(CriticNet { hidden, head, obs_dim })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(|l| l.param_count()).sum::<usize>() + self.head.param_count()
    }

    pub fn forward(&self, obs: &[f64], action: &[f64; 2]) -> f64 {
        self.forward_cached(obs, action).0
    }

    pub fn forward_cached(&self, obs: &[f64], action: &[f64; 2]) -> (f64, CriticTape) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        let mut x = Vec::with_capacity(obs.len() + 2);
        x.extend_from_slice(obs);
        x.extend_from_slice(action);
        let mut acts = vec![x];
        for l in &self.hidden {
            let pre = l.forward(acts.last().unwrap());
            acts.push(pre.iter().map(|v| v.tanh()).collect());
        }
        let q = self.head.forward(acts.last().unwrap())[0];
        (q, CriticTape { acts })
    }

    /// Backpropagate d(loss)/dQ through the tape. Returns the parameter
    /// gradient (layer order, weights then biases) and d(loss)/d(action).
    pub fn backward(&self, tape: &CriticTape, d_q: f64) -> (Vec<f64>, [f64; 2]) {
        let mut grad = vec![0.0; self.param_count()];
        let mut offsets = Vec::with_capacity(self.hidden.len() + 1);
        let mut off = 0;
        for l in &self.hidden {
            offsets.push(off);
            off += l.param_count();
        }
        let head_off = off;

        let d_head = [d_q];
        self.head
            .accumulate(tape.acts.last().unwrap(), &d_head, &mut grad[head_off..]);
        let mut d_act = self.head.input_grad(&d_head);
        for (idx, l) in self.hidden.iter().enumerate().rev() {
            let out = &tape.acts[idx + 1];
            let d_pre: Vec<f64> = d_act
                .iter()
                .zip(out)
                .map(|(d, a)| d * (1.0 - a * a))
                .collect();
            let o = offsets[idx];
            l.accumulate(&tape.acts[idx], &d_pre, &mut grad[o..o + l.param_count()]);
            d_act = l.input_grad(&d_pre);
        }
        let d_action = [d_act[self.obs_dim], d_act[self.obs_dim + 1]];
        (grad, d_action)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for l in self.hidden.iter().chain(std::iter::once(&self.head)) {
            flat.extend_from_slice(&l.w);
            flat.extend_from_slice(&l.b);
        }
        flat
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Net(format!(
                "critic expects {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut off = 0;
        for l in self.hidden.iter_mut().chain(std::iter::once(&mut self.head)) {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Move this (target) network toward `online`:
    /// target <- tau * online + (1 - tau) * target.
    pub fn polyak_from(&mut self, online: &CriticNet, tau: f64) {
        let online_flat = online.flatten();
        let mut flat = self.flatten();
        for (t, o) in flat.iter_mut().zip(&online_flat) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        self.set_from_flat(&flat).expect("matching critic shapes");
    }
}
