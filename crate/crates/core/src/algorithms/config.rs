use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::encoding::IdentityEncoding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Qcombo,
    Idqn,
    Iac,
    Vdn,
    Qmix,
    Coma,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [Self::Qcombo, Self::Idqn, Self::Iac, Self::Vdn, Self::Qmix, Self::Coma];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Qcombo => "qcombo",
            Self::Idqn => "idqn",
            Self::Iac => "iac",
            Self::Vdn => "vdn",
            Self::Qmix => "qmix",
            Self::Coma => "coma",
        }
    }

    /// Learners whose local network is a softmax policy.
    pub fn is_actor_critic(&self) -> bool {
        matches!(self, Self::Iac | Self::Coma)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    /// Weight of the consistency regularizer.
    pub lambda: f64,
    pub lr_q: f64,
    pub lr_actor: f64,
    pub tau: f64,
    pub epsilon_start: f64,
    /// Multiplied into ε once per training cycle.
    pub epsilon_decay: f64,
    pub minibatches: usize,
    pub batch_size: usize,
    pub rnn: bool,
    /// Consecutive periods per recurrent training step.
    pub rnn_periods: usize,
    pub rnn_hidden: usize,
    /// Hidden widths of local Q, V and global networks.
    pub hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    pub mixer_embed: usize,
    pub identity: IdentityEncoding,
    /// Multiplies rewards before they enter any loss. Metrics stay unscaled.
    pub reward_scale: f64,
    pub buffer_capacity: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Qcombo,
            gamma: 0.99,
            lambda: 1.0,
            lr_q: 1e-3,
            lr_actor: 1e-4,
            tau: 0.01,
            epsilon_start: 0.9,
            epsilon_decay: 0.995,
            minibatches: 100,
            batch_size: 30,
            rnn: false,
            rnn_periods: 6,
            rnn_hidden: 64,
            hidden: vec![256, 256],
            actor_hidden: vec![64, 64],
            mixer_embed: 32,
            identity: IdentityEncoding::Coordinates,
            reward_scale: 1.0,
            buffer_capacity: 1000,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda {} must be >= 0", self.lambda));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_decay", self.epsilon_decay), ("tau", self.tau)] {
            if !(0.0..=1.0).contains(&e) {
                return fail(format!("{name} {e} outside [0, 1]"));
            }
        }
        for (name, lr) in [("lr_q", self.lr_q), ("lr_actor", self.lr_actor), ("reward_scale", self.reward_scale)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return fail(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("minibatches", self.minibatches),
            ("batch_size", self.batch_size),
            ("rnn_periods", self.rnn_periods),
            ("rnn_hidden", self.rnn_hidden),
            ("mixer_embed", self.mixer_embed),
            ("buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                return fail(format!("{name} must be >= 1"));
            }
        }
        if self.hidden.contains(&0) || self.actor_hidden.contains(&0) {
            return fail("hidden widths must be >= 1".into());
        }
        let needed = if self.rnn { self.rnn_periods * self.batch_size } else { self.batch_size };
        if needed > self.buffer_capacity {
            return fail(format!("buffer capacity {} below the {needed} samples a training step needs", self.buffer_capacity));
        }
        Ok(())
    }

    /// Smallest buffer size at which a training step runs.
    pub fn min_samples(&self) -> usize {
        if self.rnn {
            self.rnn_periods * self.batch_size
        } else {
            self.batch_size
        }
    }
}

/// Losses of one update. Unused entries stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    /// Local TD loss: L(θ) for IDQN and QCOMBO, the joint TD loss for VDN
    /// and QMIX.
    pub q_loss: Option<f64>,
    /// L(w) of the global action-value network.
    pub global_loss: Option<f64>,
    pub consistency_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
}

impl LossReport {
    pub fn fields(&self) -> [Option<f64>; 5] {
        [self.q_loss, self.global_loss, self.consistency_loss, self.critic_loss, self.actor_loss]
    }

    /// Entry-wise mean over reports.
    pub fn mean(reports: &[LossReport]) -> Option<LossReport> {
        if reports.is_empty() {
            return None;
        }
        let avg = |f: fn(&LossReport) -> Option<f64>| {
            let vals: Vec<f64> = reports.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Some(LossReport {
            q_loss: avg(|r| r.q_loss),
            global_loss: avg(|r| r.global_loss),
            consistency_loss: avg(|r| r.consistency_loss),
            critic_loss: avg(|r| r.critic_loss),
            actor_loss: avg(|r| r.actor_loss),
        })
    }
}
