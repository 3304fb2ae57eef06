use crate::agent_io::{global_reward, individual_reward, observe_all, pagerank_weights, RewardFeatures, WeightVector, DEFAULT_DAMPING, OBS_DIM};
use crate::error::Result;
use crate::sim::{Action, FlowProgram, RoadNetwork, World};

use super::config::ExperimentConfig;

/// Outcome of one decision interval.
#[derive(Debug, Clone)]
pub struct Transition {
    pub rewards: Vec<f64>,
    pub global_reward: f64,
    pub features: Vec<RewardFeatures>,
    pub next_obs: Vec<[f64; OBS_DIM]>,
}

/// The simulator seen at decision granularity.
#[derive(Debug, Clone)]
pub struct TrafficEnv {
    pub net: RoadNetwork,
    pub program: FlowProgram,
    pub world: World,
    weights: WeightVector,
    interval: u64,
    obs: Vec<[f64; OBS_DIM]>,
}

impl TrafficEnv {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let net = RoadNetwork::build_grid(config.grid.rows, config.grid.cols, config.grid.edge_length)?;
        let weights = pagerank_weights(&net.adjacency, DEFAULT_DAMPING)?;
        let world = World::new(&net);
        let mut env = Self {
            net,
            program: config.flow.clone(),
            world,
            weights,
            interval: config.schedule.decision_interval,
            obs: Vec::new(),
        };
        env.obs = env.observe();
        Ok(env)
    }

    pub fn agents(&self) -> usize {
        self.net.agent_count()
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub fn time_step(&self) -> u64 {
        self.world.time_step()
    }

    pub fn observation(&self) -> &[[f64; OBS_DIM]] {
        &self.obs
    }

    fn observe(&self) -> Vec<[f64; OBS_DIM]> {
        observe_all(&self.world, &self.net).iter().map(|o| o.to_array()).collect()
    }

    /// Applies one action per light and simulates until the next decision.
    pub fn step(&mut self, actions: &[usize]) -> Result<Transition> {
        let actions: Vec<Action> = actions.iter().map(|&a| Action::from_index(a)).collect();
        self.world.apply_actions(&actions)?;
        self.world.advance_seconds(&self.net, &self.program, self.interval)?;
        let features = self.world.take_window_features();
        let rewards: Vec<f64> = features.iter().map(individual_reward).collect();
        let global_reward = global_reward(&rewards, self.weights.as_slice())?;
        self.obs = self.observe();
        Ok(Transition { rewards, global_reward, features, next_obs: self.obs.clone() })
    }
}
