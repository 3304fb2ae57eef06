use crate::sim::{RoadNetwork, World};

/// Components per local observation: 4 queues, 4 counts, 4 waits, 4 delays,
/// 2 phase indicators and the phase duration.
pub const OBS_DIM: usize = 19;

/// One agent's local view. Lane arrays are ordered N, E, S, W.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObservationVector {
    /// Halting vehicles per incoming lane.
    pub q: [f64; 4],
    /// Vehicles per incoming lane.
    pub v: [f64; 4],
    /// Mean waiting time per incoming lane, minutes.
    pub wt: [f64; 4],
    pub delay: [f64; 4],
    /// One-hot `[EW, NS]`.
    pub ph: [f64; 2],
    /// Seconds since the last committed phase change.
    pub d: f64,
}

impl ObservationVector {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        out[0..4].copy_from_slice(&self.q);
        out[4..8].copy_from_slice(&self.v);
        out[8..12].copy_from_slice(&self.wt);
        out[12..16].copy_from_slice(&self.delay);
        out[16..18].copy_from_slice(&self.ph);
        out[18] = self.d;
        out
    }

    pub fn from_slice(values: &[f64]) -> Option<Self> {
        if values.len() != OBS_DIM {
            return None;
        }
        let four = |o: usize| [values[o], values[o + 1], values[o + 2], values[o + 3]];
        Some(Self {
            q: four(0),
            v: four(4),
            wt: four(8),
            delay: four(12),
            ph: [values[16], values[17]],
            d: values[18],
        })
    }

    /// Checks the type invariants: `q <= v`, delay in `[0, 1]`, one-hot
    /// phase, non-negative duration.
    pub fn is_valid(&self) -> bool {
        let lanes_ok = (0..4).all(|i| {
            self.q[i] >= 0.0
                && self.q[i] <= self.v[i]
                && self.wt[i] >= 0.0
                && (0.0..=1.0).contains(&self.delay[i])
        });
        lanes_ok && (self.ph[0] + self.ph[1] - 1.0).abs() < 1e-12 && self.d >= 0.0
    }
}

/// Local observation of intersection `agent`.
pub fn observe(world: &World, net: &RoadNetwork, agent: usize) -> ObservationVector {
    let node = &net.intersections[agent];
    let mut obs = ObservationVector::default();
    for (i, &lane) in node.incoming.iter().enumerate() {
        let m = world.lane_metrics(net, lane);
        obs.q[i] = m.queue as f64;
        obs.v[i] = m.vehicle_count as f64;
        obs.wt[i] = m.mean_wait;
        obs.delay[i] = m.delay;
    }
    let light = &world.lights[agent];
    obs.ph = light.phase.one_hot();
    obs.d = light.phase_duration_secs();
    obs
}

/// Observations of every agent, in agent order.
pub fn observe_all(world: &World, net: &RoadNetwork) -> Vec<ObservationVector> {
    let metrics = world.all_lane_metrics(net);
    net.intersections
        .iter()
        .map(|node| {
            let mut obs = ObservationVector::default();
            for (i, &lane) in node.incoming.iter().enumerate() {
                let m = &metrics[lane];
                obs.q[i] = m.queue as f64;
                obs.v[i] = m.vehicle_count as f64;
                obs.wt[i] = m.mean_wait;
                obs.delay[i] = m.delay;
            }
            let light = &world.lights[node.id];
            obs.ph = light.phase.one_hot();
            obs.d = light.phase_duration_secs();
            obs
        })
        .collect()
}

/// Concatenation of all local observations in agent (row-major) order.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState(pub Vec<f64>);

impl GlobalState {
    pub fn from_observations(obs: &[ObservationVector]) -> Self {
        Self(obs.iter().flat_map(|o| o.to_array()).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn global_state(world: &World, net: &RoadNetwork) -> GlobalState {
    GlobalState::from_observations(&observe_all(world, net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::network::Approach;

    #[test]
    fn empty_network_observation() {
        let net = RoadNetwork::build_grid(2, 2, 400.0).unwrap();
        let mut world = World::new(&net);
        for _ in 0..25 {
            world.sim_tick(&net).unwrap();
        }
        let obs = observe(&world, &net, 3);
        assert_eq!(obs.q, [0.0; 4]);
        assert_eq!(obs.v, [0.0; 4]);
        assert_eq!(obs.wt, [0.0; 4]);
        assert_eq!(obs.delay, [0.0; 4]);
        assert_eq!(obs.ph, [1.0, 0.0]);
        assert!((obs.d - 2.5).abs() < 1e-12);
        assert!(obs.is_valid());
    }

    #[test]
    fn halted_vehicles_report_wait_and_full_delay() {
        let net = RoadNetwork::build_grid(1, 1, 400.0).unwrap();
        let mut world = World::new(&net);
        let node = &net.intersections[0];
        for side in [Approach::North, Approach::East, Approach::South, Approach::West] {
            let lane = &net.lanes[node.incoming[side as usize]];
            world.insert_vehicle(lane.route, 399.99, 0.0);
        }
        // Re-arming the yellow keeps both axes red for 2 minutes.
        for _ in 0..1200 {
            if !world.lights[0].in_yellow() {
                world.lights[0].set_phase(crate::sim::Action::Switch);
            }
            world.sim_tick(&net).unwrap();
        }
        let obs = observe(&world, &net, 0);
        for i in 0..4 {
            assert_eq!(obs.q[i], 1.0);
            assert!((obs.wt[i] - 2.0).abs() < 0.02, "wt {}", obs.wt[i]);
            assert_eq!(obs.delay[i], 1.0);
        }
    }

    #[test]
    fn dimensions() {
        assert_eq!(ObservationVector::default().to_array().len(), 19);
        for (rows, cols, dim) in [(2, 2, 76), (1, 1, 19), (6, 6, 684)] {
            let net = RoadNetwork::build_grid(rows, cols, 400.0).unwrap();
            let world = World::new(&net);
            assert_eq!(global_state(&world, &net).dim(), dim);
        }
    }

    #[test]
    fn single_agent_state_is_its_observation() {
        let net = RoadNetwork::build_grid(1, 1, 400.0).unwrap();
        let world = World::new(&net);
        assert_eq!(global_state(&world, &net).0, observe(&world, &net, 0).to_array().to_vec());
    }
}
