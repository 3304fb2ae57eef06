//! Observations, rewards and global signals derived from the simulator.

pub mod observation;
pub mod pagerank;
pub mod reward;

pub use observation::{global_state, observe, observe_all, GlobalState, ObservationVector, OBS_DIM};
pub use pagerank::{pagerank_weights, WeightVector, DEFAULT_DAMPING};
pub use reward::{global_reward, individual_reward, RewardFeatures, REWARD_WEIGHTS};
