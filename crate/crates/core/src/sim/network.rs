//! Grid road topology: straight-through routes, directed lanes and the
//! intersection adjacency graph.

use crate::error::{Error, Result};

/// Default distance between adjacent intersections, in meters.
pub const DEFAULT_EDGE_LENGTH: f64 = 400.0;

/// Road axis a route travels along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// East-west roads (grid rows).
    Horizontal,
    /// North-south roads (grid columns).
    Vertical,
}

/// Direction of travel of a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    East,
    West,
    North,
    South,
}

impl Heading {
    pub fn axis(self) -> Axis {
        match self {
            Heading::East | Heading::West => Axis::Horizontal,
            Heading::North | Heading::South => Axis::Vertical,
        }
    }
}

/// Approach side of an intersection. Incoming lanes are always ordered
/// `[North, East, South, West]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

/// A maximal straight path across the grid. Vehicles never turn.
#[derive(Debug, Clone)]
pub struct Route {
    pub id: usize,
    pub heading: Heading,
    /// Row index for horizontal routes, column index for vertical ones.
    pub line: usize,
    /// Intersections crossed, in travel order.
    pub intersections: Vec<usize>,
    /// Id of the first lane of this route; lanes are contiguous.
    pub first_lane: usize,
    pub length: f64,
}

impl Route {
    pub fn lane_count(&self) -> usize {
        self.intersections.len() + 1
    }
}

/// One directed edge of a route.
#[derive(Debug, Clone)]
pub struct Lane {
    pub id: usize,
    pub route: usize,
    /// Position of the edge along its route (0 = boundary entry stub).
    pub edge: usize,
    /// Intersection at the downstream end, if any.
    pub to: Option<usize>,
    /// Intersection at the upstream end, if any.
    pub from: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Intersection {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    /// Incoming lane ids indexed by [`Approach`].
    pub incoming: [usize; 4],
    /// Outgoing lane ids, towards N, E, S, W.
    pub outgoing: [usize; 4],
}

/// An `rows x cols` grid of signalized intersections.
///
/// Row 0 is the southernmost road and column 0 the westernmost; agents are
/// numbered row-major, `id = row * cols + col`.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    pub rows: usize,
    pub cols: usize,
    pub edge_length: f64,
    pub lanes: Vec<Lane>,
    pub intersections: Vec<Intersection>,
    pub routes: Vec<Route>,
    pub adjacency: Vec<Vec<usize>>,
}

impl RoadNetwork {
    /// Builds the grid. Route ids are ordered: for each row (south to north)
    /// eastbound then westbound, then for each column (west to east)
    /// northbound then southbound.
    pub fn build_grid(rows: usize, cols: usize, edge_length: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidNetwork(format!(
                "grid dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if !(edge_length > 0.0 && edge_length.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "edge length must be positive, got {edge_length}"
            )));
        }
        let id = |r: usize, c: usize| r * cols + c;

        let mut specs: Vec<(Heading, usize, Vec<usize>)> = Vec::with_capacity(2 * (rows + cols));
        for r in 0..rows {
            specs.push((Heading::East, r, (0..cols).map(|c| id(r, c)).collect()));
            specs.push((Heading::West, r, (0..cols).rev().map(|c| id(r, c)).collect()));
        }
        for c in 0..cols {
            specs.push((Heading::North, c, (0..rows).map(|r| id(r, c)).collect()));
            specs.push((Heading::South, c, (0..rows).rev().map(|r| id(r, c)).collect()));
        }

        let mut routes = Vec::with_capacity(specs.len());
        let mut lanes = Vec::new();
        for (route_id, (heading, line, crossed)) in specs.into_iter().enumerate() {
            let first_lane = lanes.len();
            for edge in 0..=crossed.len() {
                lanes.push(Lane {
                    id: lanes.len(),
                    route: route_id,
                    edge,
                    to: crossed.get(edge).copied(),
                    from: edge.checked_sub(1).map(|e| crossed[e]),
                });
            }
            routes.push(Route {
                id: route_id,
                heading,
                line,
                length: (crossed.len() + 1) as f64 * edge_length,
                intersections: crossed,
                first_lane,
            });
        }

        let east = |r: usize| 2 * r;
        let west = |r: usize| 2 * r + 1;
        let north = |c: usize| 2 * rows + 2 * c;
        let south = |c: usize| 2 * rows + 2 * c + 1;
        let lane_of = |route: usize, edge: usize| routes[route].first_lane + edge;

        let mut intersections = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                // Edge j of a route arrives at the j-th crossed intersection.
                let incoming = [
                    lane_of(south(c), rows - 1 - r),
                    lane_of(west(r), cols - 1 - c),
                    lane_of(north(c), r),
                    lane_of(east(r), c),
                ];
                let outgoing = [
                    lane_of(north(c), r + 1),
                    lane_of(east(r), c + 1),
                    lane_of(south(c), rows - r),
                    lane_of(west(r), cols - c),
                ];
                intersections.push(Intersection { id: id(r, c), row: r, col: c, incoming, outgoing });
            }
        }

        let mut adjacency = vec![Vec::new(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let n = &mut adjacency[id(r, c)];
                if r > 0 {
                    n.push(id(r - 1, c));
                }
                if c > 0 {
                    n.push(id(r, c - 1));
                }
                if c + 1 < cols {
                    n.push(id(r, c + 1));
                }
                if r + 1 < rows {
                    n.push(id(r + 1, c));
                }
            }
        }

        Ok(Self { rows, cols, edge_length, lanes, intersections, routes, adjacency })
    }

    /// Number of agents (one per intersection).
    pub fn agent_count(&self) -> usize {
        self.intersections.len()
    }

    /// Lane id occupied by a vehicle at `position` on `route`.
    pub fn lane_at(&self, route: usize, position: f64) -> usize {
        let r = &self.routes[route];
        let edge = ((position / self.edge_length).floor().max(0.0) as usize).min(r.lane_count() - 1);
        r.first_lane + edge
    }
}
