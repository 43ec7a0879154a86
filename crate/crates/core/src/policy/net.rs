//! MLP policy/value networks with analytic gradients.
//!
//! Parameters are stored as a flat f32 vector plus a layout (`ModelParameters`)
//! for versioned publication and checkpoints; the compute-side `Net` holds
//! f64 copies so gradients can be validated against central finite
//! differences at tight tolerances.
//!
//! Two wirings share this code. In decentralized mode the trunk is a plain
//! MLP over one agent's observation. In centralized mode the first hidden
//! layer runs per agent, the resulting hidden vectors are mean-pooled across
//! agents, and the remaining stack consumes each agent's hidden vector
//! concatenated with the pool.

use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Ctde,
    Ctce,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub mode: Mode,
    /// Width of the pooled vector in centralized mode. Pooling is a plain
    /// mean of first-layer hidden vectors, so this must equal `hidden[0]`.
    pub pooled_width: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            obs_dim: 83,
            action_dim: 2,
            hidden: vec![256, 256],
            mode: Mode::Ctde,
            pooled_width: 256,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Net("at least one hidden layer is required".into()));
        }
        if self.obs_dim == 0 {
            return Err(Error::Net("obs_dim must be positive".into()));
        }
        if self.action_dim != 2 {
            return Err(Error::Net(format!(
                "action_dim must be 2 (steer, throttle), got {}",
                self.action_dim
            )));
        }
        if self.mode == Mode::Ctce {
            if self.pooled_width == 0 {
                return Err(Error::Net("pooled_width must be positive".into()));
            }
            if self.pooled_width != self.hidden[0] {
                return Err(Error::Net(format!(
                    "pooled_width {} must equal the first hidden width {} (the pool is a \
                     mean of first-layer outputs)",
                    self.pooled_width, self.hidden[0]
                )));
            }
        }
        Ok(())
    }

    /// Input width of the layers following the pooling point.
    fn second_stack_input(&self) -> usize {
        self.hidden[0] + self.pooled_width
    }

    /// Width feeding the policy/value heads.
    fn head_input(&self) -> usize {
        match self.mode {
            Mode::Ctde => *self.hidden.last().unwrap(),
            Mode::Ctce => {
                if self.hidden.len() == 1 {
                    self.second_stack_input()
                } else {
                    *self.hidden.last().unwrap()
                }
            }
        }
    }

    /// Ordered layer descriptors implied by this config.
    pub fn layout(&self) -> Vec<LayerDesc> {
        let mut out = Vec::new();
        let mut in_dim = self.obs_dim;
        for (k, &h) in self.hidden.iter().enumerate() {
            out.push(LayerDesc {
                in_dim,
                out_dim: h,
                role: LayerRole::Hidden,
            });
            in_dim = if self.mode == Mode::Ctce && k == 0 {
                self.second_stack_input()
            } else {
                h
            };
        }
        let head_in = self.head_input();
        out.push(LayerDesc {
            in_dim: head_in,
            out_dim: self.action_dim,
            role: LayerRole::PolicyHead,
        });
        out.push(LayerDesc {
            in_dim: 0,
            out_dim: self.action_dim,
            role: LayerRole::LogStd,
        });
        out.push(LayerDesc {
            in_dim: head_in,
            out_dim: 1,
            role: LayerRole::ValueHead,
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerRole {
    Hidden,
    PolicyHead,
    LogStd,
    ValueHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDesc {
    pub in_dim: usize,
    pub out_dim: usize,
    pub role: LayerRole,
}

impl LayerDesc {
    pub fn param_count(&self) -> usize {
        match self.role {
            LayerRole::LogStd => self.out_dim,
            _ => self.in_dim * self.out_dim + self.out_dim,
        }
    }
}

/// Versioned, flat snapshot of every network parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub values: Vec<f32>,
    pub layout: Vec<LayerDesc>,
    pub mode: Mode,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub version: u64,
}

impl ModelParameters {
    pub fn expected_len(layout: &[LayerDesc]) -> usize {
        layout.iter().map(|l| l.param_count()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let want = Self::expected_len(&self.layout);
        if self.values.len() != want {
            return Err(Error::Net(format!(
                "parameter vector has {} values but the layout implies {}",
                self.values.len(),
                want
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Net("parameter vector contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Per-agent network output. `mean` is pre-squash; `hidden` is the first
/// hidden layer's activation (the pooling feature in centralized mode).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: f64,
    pub hidden: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub(crate) w: Vec<f64>, // row-major, out_dim x in_dim
    pub(crate) b: Vec<f64>,
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
}

impl Dense {
    pub(crate) fn zeros(in_dim: usize, out_dim: usize) -> Dense {
        Dense {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = self.b.clone();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            y[o] += acc;
        }
        y
    }

    /// dL/dx given dL/d(pre-activation).
    pub(crate) fn input_grad(&self, d_pre: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let g = d_pre[o];
            if g == 0.0 {
                continue;
            }
            for (dxi, wi) in dx.iter_mut().zip(row) {
                *dxi += wi * g;
            }
        }
        dx
    }

    /// Accumulate dL/dW and dL/db into a flat slice (weights then biases).
    pub(crate) fn accumulate(&self, x: &[f64], d_pre: &[f64], grad: &mut [f64]) {
        let (gw, gb) = grad.split_at_mut(self.in_dim * self.out_dim);
        for o in 0..self.out_dim {
            let g = d_pre[o];
            gb[o] += g;
            if g == 0.0 {
                continue;
            }
            let row = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for (gwi, xi) in row.iter_mut().zip(x) {
                *gwi += g * xi;
            }
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

fn tanh_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.tanh()).collect()
}

/// Upstream loss gradients for one agent-sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpstreamGrad {
    pub d_mean: [f64; 2],
    pub d_log_std: [f64; 2],
    pub d_value: f64,
}

/// Activation tape for one decentralized forward pass: the layer inputs
/// x0..xN (observation first, each tanh output after).
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Vec<f64>>,
}

/// Activation tape for one centralized forward pass over a set of agents.
#[derive(Debug, Clone)]
pub struct CtceTape {
    /// Per-agent activation chains: obs, h (first stack), z = [h; p], then
    /// each later tanh output.
    acts: Vec<Vec<Vec<f64>>>,
    /// Pooling group per agent (indices into the agent list).
    groups: Vec<Vec<usize>>,
}

/// f64 compute network. Parameter packing order matches
/// `NetworkConfig::layout()`: hidden layers, policy head, log_std, value
/// head; each dense layer stores weights row-major followed by biases.
#[derive(Debug, Clone)]
pub struct Net {
    pub cfg: NetworkConfig,
    trunk: Vec<Dense>,
    policy: Dense,
    value: Dense,
    log_std: Vec<f64>,
}

impl Net {
    /// Zero-initialized network of the given shape.
    pub fn zeros(cfg: &NetworkConfig) -> Result<Net> {
        cfg.validate()?;
        let mut trunk = Vec::new();
        for desc in cfg.layout() {
            match desc.role {
                LayerRole::Hidden => trunk.push(Dense::zeros(desc.in_dim, desc.out_dim)),
                LayerRole::PolicyHead | LayerRole::ValueHead | LayerRole::LogStd => {}
            }
        }
        let head_in = cfg.head_input();
        Ok(Net {
            trunk,
            policy: Dense::zeros(head_in, cfg.action_dim),
            value: Dense::zeros(head_in, 1),
            log_std: vec![0.0; cfg.action_dim],
            cfg: cfg.clone(),
        })
    }

    /// Fresh parameters: weights uniform in +-sqrt(1/fan_in), biases zero,
    /// the policy head damped by 0.01, log_std at -0.5.
    pub fn init(cfg: &NetworkConfig, seed: u64) -> Result<Net> {
        let mut net = Net::zeros(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |layer: &mut Dense, scale: f64| {
            let bound = (1.0 / layer.in_dim as f64).sqrt();
            for w in layer.w.iter_mut() {
                *w = rng.gen_range(-bound..bound) * scale;
            }
        };
        for layer in net.trunk.iter_mut() {
            fill(layer, 1.0);
        }
        fill(&mut net.policy, 0.01);
        fill(&mut net.value, 1.0);
        for s in net.log_std.iter_mut() {
            *s = -0.5;
        }
        Ok(net)
    }

    pub fn from_params(params: &ModelParameters) -> Result<Net> {
        params.validate()?;
        let cfg_layout_roles: Vec<LayerRole> = params.layout.iter().map(|l| l.role).collect();
        let hidden: Vec<usize> = params
            .layout
            .iter()
            .filter(|l| l.role == LayerRole::Hidden)
            .map(|l| l.out_dim)
            .collect();
        if hidden.is_empty() || !cfg_layout_roles.contains(&LayerRole::PolicyHead) {
            return Err(Error::Net("layout is missing hidden or head layers".into()));
        }
        let cfg = NetworkConfig {
            obs_dim: params.obs_dim,
            action_dim: params.action_dim,
            pooled_width: hidden[0],
            hidden,
            mode: params.mode,
        };
        if cfg.layout() != params.layout {
            return Err(Error::Net(
                "layout does not match the shape implied by mode/obs_dim/hidden".into(),
            ));
        }
        let mut net = Net::zeros(&cfg)?;
        let mut off = 0;
        let take = |n: usize, off: &mut usize| -> Vec<f64> {
            let s: Vec<f64> = params.values[*off..*off + n].iter().map(|&v| v as f64).collect();
            *off += n;
            s
        };
        let mut trunk_idx = 0;
        for desc in &params.layout {
            match desc.role {
                LayerRole::Hidden => {
                    let l = &mut net.trunk[trunk_idx];
                    l.w = take(desc.in_dim * desc.out_dim, &mut off);
                    l.b = take(desc.out_dim, &mut off);
                    trunk_idx += 1;
                }
                LayerRole::PolicyHead => {
                    net.policy.w = take(desc.in_dim * desc.out_dim, &mut off);
                    net.policy.b = take(desc.out_dim, &mut off);
                }
                LayerRole::LogStd => {
                    net.log_std = take(desc.out_dim, &mut off)
                        .iter()
                        .map(|&v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
                        .collect();
                }
                LayerRole::ValueHead => {
                    net.value.w = take(desc.in_dim * desc.out_dim, &mut off);
                    net.value.b = take(desc.out_dim, &mut off);
                }
            }
        }
        Ok(net)
    }

    pub fn to_params(&self, version: u64) -> ModelParameters {
        let mut values = Vec::with_capacity(self.param_count());
        let flat = self.flatten();
        values.extend(flat.iter().map(|&v| v as f32));
        ModelParameters {
            values,
            layout: self.cfg.layout(),
            mode: self.cfg.mode,
            obs_dim: self.cfg.obs_dim,
            action_dim: self.cfg.action_dim,
            version,
        }
    }

    pub fn param_count(&self) -> usize {
        self.trunk.iter().map(Dense::param_count).sum::<usize>()
            + self.policy.param_count()
            + self.log_std.len()
            + self.value.param_count()
    }

    /// All parameters in layout order as f64.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.trunk {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out.extend_from_slice(&self.policy.w);
        out.extend_from_slice(&self.policy.b);
        out.extend_from_slice(&self.log_std);
        out.extend_from_slice(&self.value.w);
        out.extend_from_slice(&self.value.b);
        out
    }

    /// Overwrite all parameters from a flat layout-ordered vector. The
    /// log_std entries are projected into their legal range, keeping the
    /// forward pass a clean identity over stored values.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Net(format!(
                "flat vector has {} values, network needs {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        let take = |dst: &mut [f64], off: &mut usize| {
            dst.copy_from_slice(&flat[*off..*off + dst.len()]);
            *off += dst.len();
        };
        for l in self.trunk.iter_mut() {
            take(&mut l.w, &mut off);
            take(&mut l.b, &mut off);
        }
        take(&mut self.policy.w, &mut off);
        take(&mut self.policy.b, &mut off);
        take(&mut self.log_std, &mut off);
        for s in self.log_std.iter_mut() {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        take(&mut self.value.w, &mut off);
        take(&mut self.value.b, &mut off);
        Ok(())
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.cfg.obs_dim {
            return Err(Error::Net(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                self.cfg.obs_dim
            )));
        }
        Ok(())
    }

    fn output_from_acts(&self, acts: &[Vec<f64>]) -> PolicyOutput {
        let last = acts.last().unwrap();
        PolicyOutput {
            mean: self.policy.forward(last),
            log_std: self.log_std.clone(),
            value: self.value.forward(last)[0],
            hidden: acts[1].clone(),
        }
    }

    /// Decentralized forward pass for one agent.
    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput> {
        Ok(self.forward_cached(obs)?.0)
    }

    pub fn forward_cached(&self, obs: &[f64]) -> Result<(PolicyOutput, Tape)> {
        if self.cfg.mode != Mode::Ctde {
            return Err(Error::Net("forward() requires decentralized mode".into()));
        }
        self.check_obs(obs)?;
        let mut acts = vec![obs.to_vec()];
        for l in &self.trunk {
            let pre = l.forward(acts.last().unwrap());
            acts.push(tanh_vec(&pre));
        }
        let out = self.output_from_acts(&acts);
        Ok((out, Tape { acts }))
    }

    /// Centralized forward pass over every listed agent, pooling across all
    /// of them.
    pub fn forward_ctce(&self, obs_all: &[Vec<f64>]) -> Result<Vec<PolicyOutput>> {
        let groups: Vec<Vec<usize>> = (0..obs_all.len())
            .map(|_| (0..obs_all.len()).collect())
            .collect();
        Ok(self.forward_ctce_grouped(obs_all, &groups)?.0)
    }

    /// Centralized forward with explicit pooling groups: agent `i` pools the
    /// first-stack hidden vectors of `groups[i]` (which must include `i`).
    pub fn forward_ctce_grouped(
        &self,
        obs_all: &[Vec<f64>],
        groups: &[Vec<usize>],
    ) -> Result<(Vec<PolicyOutput>, CtceTape)> {
        if self.cfg.mode != Mode::Ctce {
            return Err(Error::Net("forward_ctce() requires centralized mode".into()));
        }
        if obs_all.is_empty() {
            return Err(Error::Net("centralized forward needs at least one agent".into()));
        }
        if groups.len() != obs_all.len() {
            return Err(Error::Net("one pooling group per agent is required".into()));
        }
        for o in obs_all {
            self.check_obs(o)?;
        }
        let hs: Vec<Vec<f64>> = obs_all
            .iter()
            .map(|o| tanh_vec(&self.trunk[0].forward(o)))
            .collect();
        let mut outs = Vec::with_capacity(obs_all.len());
        let mut acts_all = Vec::with_capacity(obs_all.len());
        for i in 0..obs_all.len() {
            let group = &groups[i];
            if group.is_empty() || !group.contains(&i) {
                return Err(Error::Net(format!(
                    "pooling group of agent {i} must contain the agent itself"
                )));
            }
            let mut pool = vec![0.0; self.cfg.pooled_width];
            for &j in group {
                for (p, h) in pool.iter_mut().zip(&hs[j]) {
                    *p += h;
                }
            }
            let inv = 1.0 / group.len() as f64;
            for p in pool.iter_mut() {
                *p *= inv;
            }
            let mut z = hs[i].clone();
            z.extend_from_slice(&pool);

            let mut acts = vec![obs_all[i].clone(), hs[i].clone(), z];
            for l in &self.trunk[1..] {
                let pre = l.forward(acts.last().unwrap());
                acts.push(tanh_vec(&pre));
            }
            outs.push(self.output_from_acts(&acts));
            acts_all.push(acts);
        }
        Ok((
            outs,
            CtceTape {
                acts: acts_all,
                groups: groups.to_vec(),
            },
        ))
    }

    /// Gradient slice boundaries in the flat vector, in layout order.
    fn grad_offsets(&self) -> (Vec<usize>, usize, usize, usize) {
        // (trunk offsets, policy offset, log_std offset, value offset)
        let mut trunk_off = Vec::with_capacity(self.trunk.len());
        let mut off = 0;
        for l in &self.trunk {
            trunk_off.push(off);
            off += l.param_count();
        }
        let policy_off = off;
        off += self.policy.param_count();
        let log_std_off = off;
        off += self.log_std.len();
        let value_off = off;
        (trunk_off, policy_off, log_std_off, value_off)
    }

    /// Accumulate the gradient of a scalar loss over a batch of
    /// decentralized samples into a flat layout-ordered vector.
    pub fn backward(&self, tapes: &[Tape], upstream: &[UpstreamGrad]) -> Result<Vec<f64>> {
        if tapes.len() != upstream.len() {
            return Err(Error::Net(format!(
                "{} tapes but {} upstream gradients",
                tapes.len(),
                upstream.len()
            )));
        }
        let mut grad = vec![0.0; self.param_count()];
        let (trunk_off, policy_off, log_std_off, value_off) = self.grad_offsets();
        for (tape, up) in tapes.iter().zip(upstream) {
            let last = tape.acts.last().unwrap();
            let d_mean = &up.d_mean[..self.cfg.action_dim];
            let d_value = [up.d_value];
            self.policy
                .accumulate(last, d_mean, &mut grad[policy_off..log_std_off]);
            self.value
                .accumulate(last, &d_value, &mut grad[value_off..]);
            for (g, d) in grad[log_std_off..value_off]
                .iter_mut()
                .zip(&up.d_log_std[..self.cfg.action_dim])
            {
                *g += d;
            }

            let mut d_act = self.policy.input_grad(d_mean);
            for (a, b) in d_act.iter_mut().zip(self.value.input_grad(&d_value)) {
                *a += b;
            }
            for l_idx in (0..self.trunk.len()).rev() {
                let layer = &self.trunk[l_idx];
                let act = &tape.acts[l_idx + 1];
                let d_pre: Vec<f64> = d_act
                    .iter()
                    .zip(act)
                    .map(|(d, a)| d * (1.0 - a * a))
                    .collect();
                let lo = trunk_off[l_idx];
                layer.accumulate(&tape.acts[l_idx], &d_pre, &mut grad[lo..lo + layer.param_count()]);
                if l_idx > 0 {
                    d_act = layer.input_grad(&d_pre);
                }
            }
        }
        Ok(grad)
    }

    /// Accumulate the gradient for one centralized forward pass (all agents
    /// of one tick).
    pub fn backward_ctce(&self, tape: &CtceTape, upstream: &[UpstreamGrad]) -> Result<Vec<f64>> {
        if tape.acts.len() != upstream.len() {
            return Err(Error::Net(format!(
                "{} agents on tape but {} upstream gradients",
                tape.acts.len(),
                upstream.len()
            )));
        }
        let n = tape.acts.len();
        let h_width = self.cfg.hidden[0];
        let mut grad = vec![0.0; self.param_count()];
        let (trunk_off, policy_off, log_std_off, value_off) = self.grad_offsets();

        // Backprop heads and the second stack per agent, collecting each
        // agent's direct dL/dh and the pooled share dL/dp.
        let mut d_h = vec![vec![0.0; h_width]; n];
        for (i, (acts, up)) in tape.acts.iter().zip(upstream).enumerate() {
            let last = acts.last().unwrap();
            let d_mean = &up.d_mean[..self.cfg.action_dim];
            let d_value = [up.d_value];
            self.policy
                .accumulate(last, d_mean, &mut grad[policy_off..log_std_off]);
            self.value
                .accumulate(last, &d_value, &mut grad[value_off..]);
            for (g, d) in grad[log_std_off..value_off]
                .iter_mut()
                .zip(&up.d_log_std[..self.cfg.action_dim])
            {
                *g += d;
            }

            let mut d_act = self.policy.input_grad(d_mean);
            for (a, b) in d_act.iter_mut().zip(self.value.input_grad(&d_value)) {
                *a += b;
            }
            // Later trunk layers: acts[2] is their first input (z).
            for l_idx in (1..self.trunk.len()).rev() {
                let layer = &self.trunk[l_idx];
                let act = &acts[l_idx + 2];
                let d_pre: Vec<f64> = d_act
                    .iter()
                    .zip(act)
                    .map(|(d, a)| d * (1.0 - a * a))
                    .collect();
                let lo = trunk_off[l_idx];
                layer.accumulate(&acts[l_idx + 1], &d_pre, &mut grad[lo..lo + layer.param_count()]);
                d_act = layer.input_grad(&d_pre);
            }
            // d_act is now dL/dz for agent i: split into the direct hidden
            // share and the pooled share spread over the group.
            let (direct, pooled) = d_act.split_at(h_width);
            for (dh, d) in d_h[i].iter_mut().zip(direct) {
                *dh += d;
            }
            let inv = 1.0 / tape.groups[i].len() as f64;
            for &j in &tape.groups[i] {
                for (dh, d) in d_h[j].iter_mut().zip(pooled) {
                    *dh += d * inv;
                }
            }
        }

        // First-stack layer over every agent.
        let layer = &self.trunk[0];
        let lo = trunk_off[0];
        for (i, acts) in tape.acts.iter().enumerate() {
            let h = &acts[1];
            let d_pre: Vec<f64> = d_h[i]
                .iter()
                .zip(h)
                .map(|(d, a)| d * (1.0 - a * a))
                .collect();
            layer.accumulate(&acts[0], &d_pre, &mut grad[lo..lo + layer.param_count()]);
        }
        Ok(grad)
    }
}

/// Deterministic fresh parameter snapshot (version 0).
pub fn init_params(cfg: &NetworkConfig, seed: u64) -> Result<ModelParameters> {
    Ok(Net::init(cfg, seed)?.to_params(0))
}
