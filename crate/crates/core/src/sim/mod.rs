//! Deterministic microsimulator of straight-through traffic on a grid of
//! signalized intersections. Physics advance in ticks of 0.1 s; vehicles
//! follow the Intelligent Driver Model and treat non-green stop lines as
//! standing obstacles.

pub mod flow;
pub mod idm;
pub mod light;
pub mod network;
pub mod world;

pub use flow::{FlowPeriod, FlowProgram};
pub use idm::{idm_accel, Leader};
pub use light::{Action, Phase, TrafficLight};
pub use network::{Approach, Axis, Heading, RoadNetwork};
pub use world::{LaneMetrics, Vehicle, World};
