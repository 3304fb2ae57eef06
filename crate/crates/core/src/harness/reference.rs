//! Non-learning baselines.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::sim::Action;

/// Fixed cycle length of the static policy, seconds.
pub const STATIC_PERIOD: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferencePolicy {
    /// Every light switches at each multiple of 30 s.
    Static,
    /// Keep or switch uniformly at every decision.
    Random,
}

impl ReferencePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Random => "random",
        }
    }

    pub fn decide<R: Rng + ?Sized>(&self, time_step: u64, agents: usize, rng: &mut R) -> Vec<usize> {
        match self {
            Self::Static => {
                let a = if time_step > 0 && time_step % STATIC_PERIOD == 0 { Action::Switch } else { Action::Keep };
                vec![a.index(); agents]
            }
            Self::Random => (0..agents).map(|_| usize::from(rng.random_bool(0.5))).collect(),
        }
    }
}

impl fmt::Display for ReferencePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReferencePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "static" => Ok(Self::Static),
            "random" => Ok(Self::Random),
            other => Err(Error::Config(format!("unknown reference policy '{other}'"))),
        }
    }
}
