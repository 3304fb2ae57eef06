use crate::error::{Error, Result};

/// Reward weights for queue, wait, delay, emergency stops, phase changes
/// and throughput.
pub const REWARD_WEIGHTS: [f64; 6] = [-0.5, -0.5, -0.5, -0.25, -1.0, 1.0];

/// Per-window reward features of one intersection, summed over its four
/// incoming lanes. Queue, wait and delay are sampled once per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardFeatures {
    pub ql: f64,
    /// Minutes.
    pub wtl: f64,
    pub dl: f64,
    pub eml: f64,
    pub fl: f64,
    pub vl: f64,
}

impl RewardFeatures {
    pub fn as_array(&self) -> [f64; 6] {
        [self.ql, self.wtl, self.dl, self.eml, self.fl, self.vl]
    }
}

pub fn individual_reward(f: &RewardFeatures) -> f64 {
    f.as_array().iter().zip(REWARD_WEIGHTS).map(|(x, c)| c * x).sum()
}

/// `sum_n k_n r_n`.
pub fn global_reward(rewards: &[f64], weights: &[f64]) -> Result<f64> {
    if rewards.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            actual: rewards.len(),
            context: "rewards vs. weights",
        });
    }
    Ok(rewards.iter().zip(weights).map(|(r, k)| r * k).sum())
}
