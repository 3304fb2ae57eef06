//! Mutable simulation state and the per-tick update.

use std::collections::VecDeque;

use super::flow::FlowProgram;
use super::idm::{idm_accel, Leader, DT, MAX_SPEED, MIN_GAP};
use super::light::{Action, TrafficLight};
use super::network::RoadNetwork;
use crate::agent_io::RewardFeatures;
use crate::error::{Error, Result};

/// Vehicle length, m.
pub const VEHICLE_LENGTH: f64 = 5.0;
/// Speed below which a vehicle counts as halting, m/s.
pub const HALT_SPEED: f64 = 0.1;
/// Speed loss within one second that counts as an emergency stop, m/s.
pub const EMERGENCY_DROP: f64 = 4.5;
/// A vehicle facing a non-green light stops only if it can do so within
/// this deceleration; otherwise it clears the intersection.
pub const MAX_STOP_DECEL: f64 = 4.5;
pub const TICKS_PER_SECOND: u64 = 10;
const TICKS_PER_HOUR: u64 = 3600 * TICKS_PER_SECOND;
/// Follower speed is capped so it never closes to within this distance of
/// its leader's rear in a single tick.
const SAFETY_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub route: usize,
    /// Front bumper, meters along the route.
    pub position: f64,
    pub speed: f64,
    pub speed_one_second_ago: f64,
    /// Insertion time, s.
    pub entry_time: f64,
    /// Time spent halting since the vehicle was last faster than
    /// [`HALT_SPEED`], s.
    pub waiting: f64,
    pub last_moving_time: f64,
}

impl Vehicle {
    pub fn waiting_minutes(&self) -> f64 {
        self.waiting / 60.0
    }
}

/// Instantaneous statistics of one lane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneMetrics {
    /// Halting vehicles.
    pub queue: usize,
    pub vehicle_count: usize,
    /// Average waiting time of the lane's vehicles, minutes.
    pub mean_wait: f64,
    /// `1 - mean speed / MAX_SPEED`; zero for an empty lane.
    pub delay: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    ticks: u64,
    /// Vehicles per route, ordered front (furthest along) to back.
    traffic: Vec<VecDeque<Vehicle>>,
    pub lights: Vec<TrafficLight>,
    spawn_acc: Vec<u64>,
    inserted: u64,
    route_inserted: Vec<u64>,
    exited: u64,
    next_id: u64,
    window: Vec<RewardFeatures>,
}

impl World {
    pub fn new(net: &RoadNetwork) -> Self {
        Self {
            ticks: 0,
            traffic: vec![VecDeque::new(); net.routes.len()],
            lights: (0..net.agent_count()).map(TrafficLight::new).collect(),
            spawn_acc: vec![0; net.routes.len()],
            inserted: 0,
            route_inserted: vec![0; net.routes.len()],
            exited: 0,
            next_id: 0,
            window: vec![RewardFeatures::default(); net.agent_count()],
        }
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Simulation clock, s.
    pub fn clock(&self) -> f64 {
        self.ticks as f64 * DT
    }

    /// Whole seconds elapsed; one schedule time step is one second.
    pub fn time_step(&self) -> u64 {
        self.ticks / TICKS_PER_SECOND
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.traffic.iter().flatten()
    }

    pub fn route_vehicles(&self, route: usize) -> &VecDeque<Vehicle> {
        &self.traffic[route]
    }

    pub fn vehicles_on_road(&self) -> u64 {
        self.traffic.iter().map(|q| q.len() as u64).sum()
    }

    pub fn vehicles_inserted(&self) -> u64 {
        self.inserted
    }

    pub fn vehicles_exited(&self) -> u64 {
        self.exited
    }

    /// Vehicles demanded by the flow program but still waiting for room at
    /// their boundary.
    pub fn pending_insertions(&self) -> u64 {
        (0..self.spawn_acc.len()).map(|r| self.route_pending(r)).sum()
    }

    pub fn route_pending(&self, route: usize) -> u64 {
        self.spawn_acc[route] / TICKS_PER_HOUR
    }

    pub fn route_inserted(&self, route: usize) -> u64 {
        self.route_inserted[route]
    }

    /// Applies one action per light, in agent order.
    pub fn apply_actions(&mut self, actions: &[Action]) -> Result<()> {
        if actions.len() != self.lights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lights.len(),
                actual: actions.len(),
                context: "actions per light",
            });
        }
        for (light, &a) in self.lights.iter_mut().zip(actions) {
            light.set_phase(a);
        }
        Ok(())
    }

    /// Accumulates demand and inserts at most one vehicle per route at its
    /// boundary. Blocked insertions are deferred, never dropped.
    pub fn spawn_step(&mut self, net: &RoadNetwork, program: &FlowProgram) -> Vec<u64> {
        let step = self.time_step();
        let clock = self.clock();
        let mut new_ids = Vec::new();
        for route in 0..net.routes.len() {
            self.spawn_acc[route] += u64::from(program.route_rate(net, route, step));
            if self.spawn_acc[route] < TICKS_PER_HOUR {
                continue;
            }
            let lane = &mut self.traffic[route];
            let clear = lane.back().is_none_or(|last| last.position - VEHICLE_LENGTH >= MIN_GAP);
            if !clear {
                continue;
            }
            self.spawn_acc[route] -= TICKS_PER_HOUR;
            let speed = program.entering_speed;
            lane.push_back(Vehicle {
                id: self.next_id,
                route,
                position: 0.0,
                speed,
                speed_one_second_ago: speed,
                entry_time: clock,
                waiting: 0.0,
                last_moving_time: clock,
            });
            new_ids.push(self.next_id);
            self.next_id += 1;
            self.inserted += 1;
            self.route_inserted[route] += 1;
        }
        new_ids
    }

    /// Advances vehicles and lights by one tick of [`DT`].
    pub fn sim_tick(&mut self, net: &RoadNetwork) -> Result<()> {
        let clock_after = (self.ticks + 1) as f64 * DT;
        let edge = net.edge_length;
        for (route_id, lane) in self.traffic.iter_mut().enumerate() {
            let route = &net.routes[route_id];
            let axis = route.heading.axis();
            let mut leader_old: Option<(f64, f64)> = None;
            for veh in lane.iter_mut() {
                let (x, v) = (veh.position, veh.speed);
                let vehicle_gap = leader_old.map(|(lx, _)| lx - VEHICLE_LENGTH - x);
                let mut accel = match leader_old {
                    Some((_, lv)) => {
                        let gap = vehicle_gap.unwrap_or(f64::INFINITY);
                        idm_accel(v, Some(Leader { speed: lv, gap }))
                            .map_err(|_| Error::Collision { route: route_id, time: self.ticks as f64 * DT, gap })?
                    }
                    None => idm_accel(v, None)?,
                };

                let crossing = (x / edge).floor() as usize;
                let mut stop_dist = None;
                if crossing < route.intersections.len() {
                    let node = route.intersections[crossing];
                    let dist = (crossing + 1) as f64 * edge - x;
                    if !self.lights[node].allows(axis) && v * v <= 2.0 * MAX_STOP_DECEL * dist {
                        // The stop line acts as a standing obstacle.
                        accel = accel.min(idm_accel(v, Some(Leader { speed: 0.0, gap: dist }))?);
                        stop_dist = Some(dist);
                    }
                }

                let mut v_new = (v + accel * DT).clamp(0.0, MAX_SPEED);
                for gap in vehicle_gap.into_iter().chain(stop_dist) {
                    v_new = v_new.min(((gap - SAFETY_MARGIN) / DT).max(0.0));
                }
                let x_new = x + v_new * DT;

                if crossing < route.intersections.len() && x_new >= (crossing + 1) as f64 * edge {
                    self.window[route.intersections[crossing]].vl += 1.0;
                }
                if v_new < HALT_SPEED {
                    veh.waiting += DT;
                } else {
                    veh.waiting = 0.0;
                    veh.last_moving_time = clock_after;
                }
                leader_old = Some((x, v));
                veh.position = x_new;
                veh.speed = v_new;
            }
            while lane.front().is_some_and(|v| v.position >= route.length) {
                lane.pop_front();
                self.exited += 1;
            }
        }

        for light in &mut self.lights {
            light.tick();
        }
        self.ticks += 1;

        if self.ticks % TICKS_PER_SECOND == 0 {
            self.sample_second(net);
        }
        Ok(())
    }

    /// Spawns then ticks.
    pub fn step(&mut self, net: &RoadNetwork, program: &FlowProgram) -> Result<()> {
        self.spawn_step(net, program);
        self.sim_tick(net)
    }

    /// Runs whole seconds of simulation.
    pub fn advance_seconds(&mut self, net: &RoadNetwork, program: &FlowProgram, seconds: u64) -> Result<()> {
        for _ in 0..seconds * TICKS_PER_SECOND {
            self.step(net, program)?;
        }
        Ok(())
    }

    fn sample_second(&mut self, net: &RoadNetwork) {
        for lane_vehicles in &mut self.traffic {
            for veh in lane_vehicles.iter_mut() {
                if veh.speed_one_second_ago - veh.speed > EMERGENCY_DROP {
                    if let Some(node) = net.lanes[net.lane_at(veh.route, veh.position)].to {
                        self.window[node].eml += 1.0;
                    }
                }
                veh.speed_one_second_ago = veh.speed;
            }
        }
        let metrics = self.all_lane_metrics(net);
        for node in &net.intersections {
            let acc = &mut self.window[node.id];
            for &lane in &node.incoming {
                let m = &metrics[lane];
                acc.ql += m.queue as f64;
                acc.wtl += m.mean_wait;
                acc.dl += m.delay;
            }
        }
    }

    /// Drains the reward-window accumulators, one entry per intersection.
    pub fn take_window_features(&mut self) -> Vec<RewardFeatures> {
        for (acc, light) in self.window.iter_mut().zip(self.lights.iter_mut()) {
            acc.fl = f64::from(light.phase_change_count_window);
            light.phase_change_count_window = 0;
        }
        std::mem::replace(&mut self.window, vec![RewardFeatures::default(); self.lights.len()])
    }

    /// Metrics for every lane, indexed by lane id.
    pub fn all_lane_metrics(&self, net: &RoadNetwork) -> Vec<LaneMetrics> {
        let mut sums = vec![(0usize, 0usize, 0.0f64, 0.0f64); net.lanes.len()];
        for veh in self.vehicles() {
            let s = &mut sums[net.lane_at(veh.route, veh.position)];
            s.0 += usize::from(veh.speed < HALT_SPEED);
            s.1 += 1;
            s.2 += veh.waiting_minutes();
            s.3 += veh.speed;
        }
        sums.into_iter().map(|(q, n, w, v)| finish_metrics(q, n, w, v)).collect()
    }

    pub fn lane_metrics(&self, net: &RoadNetwork, lane: usize) -> LaneMetrics {
        let l = &net.lanes[lane];
        let lo = l.edge as f64 * net.edge_length;
        let hi = lo + net.edge_length;
        let (mut q, mut n, mut w, mut v) = (0, 0, 0.0, 0.0);
        for veh in &self.traffic[l.route] {
            let inside = veh.position >= lo && (veh.position < hi || l.to.is_none());
            if inside {
                q += usize::from(veh.speed < HALT_SPEED);
                n += 1;
                w += veh.waiting_minutes();
                v += veh.speed;
            }
        }
        finish_metrics(q, n, w, v)
    }

    /// Minimum bumper-to-bumper gap over all consecutive vehicle pairs.
    pub fn min_gap(&self) -> Option<f64> {
        self.traffic
            .iter()
            .flat_map(|lane| {
                lane.iter()
                    .zip(lane.iter().skip(1))
                    .map(|(lead, follow)| lead.position - VEHICLE_LENGTH - follow.position)
            })
            .min_by(f64::total_cmp)
    }

    /// Places a vehicle directly, bypassing the demand accumulator. Vehicles
    /// must be added back to front along a route.
    pub fn insert_vehicle(&mut self, route: usize, position: f64, speed: f64) -> u64 {
        let clock = self.clock();
        let id = self.next_id;
        self.traffic[route].push_back(Vehicle {
            id,
            route,
            position,
            speed,
            speed_one_second_ago: speed,
            entry_time: clock,
            waiting: 0.0,
            last_moving_time: clock,
        });
        self.next_id += 1;
        self.inserted += 1;
        self.route_inserted[route] += 1;
        id
    }

    #[cfg(test)]
    pub(crate) fn traffic_mut(&mut self) -> &mut Vec<VecDeque<Vehicle>> {
        &mut self.traffic
    }
}

fn finish_metrics(queue: usize, count: usize, wait_sum: f64, speed_sum: f64) -> LaneMetrics {
    if count == 0 {
        return LaneMetrics::default();
    }
    let n = count as f64;
    LaneMetrics {
        queue,
        vehicle_count: count,
        mean_wait: wait_sum / n,
        delay: 1.0 - (speed_sum / n) / MAX_SPEED,
    }
}
