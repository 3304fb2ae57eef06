//! The six learners over a shared replay buffer.

pub mod coma;
pub mod config;
pub mod encoding;
pub mod iac;
pub mod idqn;
pub mod learner;
pub mod policy;
pub mod qcombo;
pub mod qmix;
pub mod replay;
pub mod vdn;

pub use config::{Algorithm, LearnerConfig, LossReport};
pub use encoding::{joint_inputs, scale_observation, Batch, IdentityEncoding, InputEncoder, ACTIONS};
pub use learner::{AuxNet, Learner, StepOutput};
pub use policy::{argmax, epsilon_greedy, epsilon_sample, sample_categorical};
pub use qmix::MixerSpec;
pub use replay::{Experience, ReplayBuffer};
