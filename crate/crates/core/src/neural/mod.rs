//! Dense layers, GRU cell, softmax, Adam and the checkpoint container, with
//! hand-written reverse-mode gradients.

pub mod activation;
pub mod adam;
pub mod agent_net;
pub mod checkpoint;
pub mod gru;
pub mod mlp;
pub mod params;
pub mod trainable;

pub use activation::{softmax, softmax_rows};
pub use adam::{soft_update, Adam};
pub use agent_net::{AgentNet, AgentNetCache};
pub use checkpoint::Checkpoint;
pub use gru::{GruSpec, GruState};
pub use mlp::{MlpCache, MlpSpec, OutputActivation};
pub use params::{kaiming_uniform, Gradients, Matrix, ParamSet, Tensor};
pub use trainable::Trainable;
