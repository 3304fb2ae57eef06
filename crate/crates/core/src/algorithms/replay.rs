use std::collections::VecDeque;

use rand::Rng;

use crate::agent_io::{GlobalState, ObservationVector, OBS_DIM};
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 1000;

/// One decision-interval transition of all agents. Observations are raw
/// (unscaled); actions are indices (0 keep, 1 switch).
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    /// Time step at which the decision was taken.
    pub step: u64,
    pub obs: Vec<[f64; OBS_DIM]>,
    /// Actions taken at the previous decision.
    pub prev_actions: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub global_reward: f64,
    pub next_obs: Vec<[f64; OBS_DIM]>,
}

impl Experience {
    pub fn agents(&self) -> usize {
        self.obs.len()
    }

    pub fn state(&self) -> GlobalState {
        GlobalState(self.obs.iter().flatten().copied().collect())
    }

    pub fn next_state(&self) -> GlobalState {
        GlobalState(self.next_obs.iter().flatten().copied().collect())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.agents();
        for (len, context) in [
            (self.prev_actions.len(), "previous actions"),
            (self.actions.len(), "actions"),
            (self.rewards.len(), "rewards"),
            (self.next_obs.len(), "next observations"),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len, context });
            }
        }
        if self.actions.iter().chain(&self.prev_actions).any(|&a| a >= 2) {
            return Err(Error::Config("action index out of range".into()));
        }
        let finite = self.obs.iter().chain(&self.next_obs).flatten().chain(&self.rewards).all(|x| x.is_finite());
        if !finite || !self.global_reward.is_finite() {
            return Err(Error::NonFinite("experience".into()));
        }
        Ok(())
    }

    pub fn observations(&self) -> Vec<ObservationVector> {
        self.obs.iter().map(|o| ObservationVector::from_slice(o).expect("fixed width")).collect()
    }
}

/// FIFO experience store with uniform and contiguous sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Experience {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Appends, evicting the oldest item when full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    /// `count` indices drawn uniformly with replacement, or `None` when the
    /// buffer holds fewer than `count` items.
    pub fn sample_indices<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Option<Vec<usize>> {
        if self.items.len() < count || count == 0 {
            return None;
        }
        Some((0..count).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Option<Vec<&Experience>> {
        Some(self.sample_indices(count, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }

    /// Start index of a uniformly chosen run of `len` consecutive items.
    pub fn sample_run_start<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Option<usize> {
        if self.items.len() < len || len == 0 {
            return None;
        }
        Some(rng.random_range(0..=self.items.len() - len))
    }

    /// `periods` back-to-back runs of `period_len` consecutive items, in time
    /// order.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, periods: usize, period_len: usize, rng: &mut R) -> Option<Vec<Vec<&Experience>>> {
        let start = self.sample_run_start(periods * period_len, rng)?;
        Some(
            (0..periods)
                .map(|p| (0..period_len).map(|i| &self.items[start + p * period_len + i]).collect())
                .collect(),
        )
    }
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}
