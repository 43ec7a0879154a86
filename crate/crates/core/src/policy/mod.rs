//! Policy/value networks, the squashed-Gaussian action head, and checkpoint
//! serialization.

pub mod checkpoint;
pub mod dist;
pub mod net;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dist::{
    base_entropy, deterministic_action, log_prob, logp_and_grads, rsample, sample_action, Draw,
};
pub use net::{
    init_params, CtceTape, LayerDesc, LayerRole, Mode, ModelParameters, Net, NetworkConfig,
    PolicyOutput, Tape, UpstreamGrad, LOG_STD_MAX, LOG_STD_MIN,
};
