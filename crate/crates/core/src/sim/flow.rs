use serde::{Deserialize, Serialize};

use super::network::{Axis, RoadNetwork};
use crate::error::{Error, Result};

/// Default speed of newly inserted vehicles, m/s.
pub const DEFAULT_ENTERING_SPEED: f64 = 10.0;

/// One interval of constant demand. Rates are vehicles per hour and apply to
/// each travel direction of the road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowPeriod {
    /// First time step (second) of the interval, inclusive.
    pub start: u64,
    /// Last time step of the interval, exclusive.
    pub end: u64,
    /// Per horizontal road, listed bottom (row 0) to top.
    pub horizontal: Vec<u32>,
    /// Per vertical road, listed left (column 0) to right.
    pub vertical: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowProgram {
    #[serde(default = "default_entering_speed")]
    pub entering_speed: f64,
    #[serde(rename = "period")]
    pub periods: Vec<FlowPeriod>,
}

fn default_entering_speed() -> f64 {
    DEFAULT_ENTERING_SPEED
}

impl FlowProgram {
    /// A single constant-demand interval `[0, end)`.
    pub fn constant(end: u64, horizontal: Vec<u32>, vertical: Vec<u32>) -> Self {
        Self {
            entering_speed: DEFAULT_ENTERING_SPEED,
            periods: vec![FlowPeriod { start: 0, end, horizontal, vertical }],
        }
    }

    /// Checks ordering, overlap and that rate vectors fit `rows x cols`.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if !(self.entering_speed >= 0.0 && self.entering_speed <= super::idm::MAX_SPEED) {
            return Err(Error::InvalidFlow(format!(
                "entering speed {} outside [0, {}]",
                self.entering_speed,
                super::idm::MAX_SPEED
            )));
        }
        let mut prev_end = 0;
        for (i, p) in self.periods.iter().enumerate() {
            if p.start >= p.end {
                return Err(Error::InvalidFlow(format!("period {i} is empty: [{}, {})", p.start, p.end)));
            }
            if p.start < prev_end {
                return Err(Error::InvalidFlow(format!("period {i} overlaps or is out of order")));
            }
            if p.horizontal.len() != rows {
                return Err(Error::InvalidFlow(format!(
                    "period {i}: {} horizontal rates for {rows} rows",
                    p.horizontal.len()
                )));
            }
            if p.vertical.len() != cols {
                return Err(Error::InvalidFlow(format!(
                    "period {i}: {} vertical rates for {cols} columns",
                    p.vertical.len()
                )));
            }
            prev_end = p.end;
        }
        Ok(())
    }

    /// Index of the period covering time step `step`, if any.
    pub fn period_index(&self, step: u64) -> Option<usize> {
        self.periods.iter().position(|p| p.start <= step && step < p.end)
    }

    /// Vehicles/hour on `route` at time step `step`; zero outside all periods.
    pub fn route_rate(&self, net: &RoadNetwork, route: usize, step: u64) -> u32 {
        let Some(period) = self.period_index(step).map(|i| &self.periods[i]) else {
            return 0;
        };
        let r = &net.routes[route];
        match r.heading.axis() {
            Axis::Horizontal => period.horizontal[r.line],
            Axis::Vertical => period.vertical[r.line],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_lookup_follows_axis_and_line() {
        let net = RoadNetwork::build_grid(1, 2, 400.0).unwrap();
        let prog = FlowProgram::constant(12_000, vec![700], vec![10, 620]);
        prog.validate(1, 2).unwrap();
        let rates: Vec<u32> = (0..net.routes.len()).map(|r| prog.route_rate(&net, r, 0)).collect();
        assert_eq!(rates, vec![700, 700, 10, 10, 620, 620]);
        assert_eq!(prog.route_rate(&net, 0, 12_000), 0);
    }

    #[test]
    fn overlapping_periods_rejected() {
        let mut prog = FlowProgram::constant(100, vec![1], vec![1]);
        prog.periods.push(FlowPeriod { start: 50, end: 200, horizontal: vec![1], vertical: vec![1] });
        assert!(prog.validate(1, 1).is_err());
    }

    #[test]
    fn wrong_rate_count_rejected() {
        let prog = FlowProgram::constant(100, vec![1, 2], vec![1]);
        assert!(prog.validate(1, 1).is_err());
    }
}
