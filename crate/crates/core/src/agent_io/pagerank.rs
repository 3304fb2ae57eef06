//! Topology weights for the global reward.

use crate::error::{Error, Result};

pub const DEFAULT_DAMPING: f64 = 0.85;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 1000;

/// Non-negative agent weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// PageRank by power iteration over an undirected adjacency list, with
/// uniform teleport. Nodes without neighbours spread their mass uniformly.
pub fn pagerank_weights(adjacency: &[Vec<usize>], damping: f64) -> Result<WeightVector> {
    let n = adjacency.len();
    if n == 0 {
        return Err(Error::InvalidNetwork("PageRank of an empty graph".into()));
    }
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidNetwork(format!("damping {damping} outside (0, 1)")));
    }
    for (u, nbrs) in adjacency.iter().enumerate() {
        if let Some(&v) = nbrs.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidNetwork(format!("edge {u}->{v} leaves the graph")));
        }
    }
    if !is_connected(adjacency) {
        log::warn!("PageRank on a disconnected graph; weights rely on teleport only across components");
    }

    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        let dangling: f64 = adjacency.iter().zip(&rank).filter(|(a, _)| a.is_empty()).map(|(_, r)| r).sum();
        next.fill((1.0 - damping) / nf + damping * dangling / nf);
        for (u, nbrs) in adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let share = damping * rank[u] / nbrs.len() as f64;
            for &v in nbrs {
                next[v] += share;
            }
        }
        let change: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if change < TOLERANCE {
            break;
        }
    }
    let total: f64 = rank.iter().sum();
    Ok(WeightVector(rank.into_iter().map(|r| r / total).collect()))
}

fn is_connected(adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RoadNetwork;

    fn grid(rows: usize, cols: usize) -> WeightVector {
        let net = RoadNetwork::build_grid(rows, cols, 400.0).unwrap();
        pagerank_weights(&net.adjacency, DEFAULT_DAMPING).unwrap()
    }

    #[test]
    fn symmetric_grids_are_uniform() {
        for w in grid(2, 2).as_slice() {
            assert!((w - 0.25).abs() < 1e-9);
        }
        for w in grid(1, 2).as_slice() {
            assert!((w - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn six_by_six_centre_outweighs_corners() {
        let w = grid(6, 6);
        let s = w.as_slice();
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let corners = [0, 5, 30, 35];
        let corner_max = corners.iter().map(|&i| s[i]).fold(f64::MIN, f64::max);
        for r in 1..5 {
            for c in 1..5 {
                assert!(s[r * 6 + c] > corner_max);
            }
        }
    }

    #[test]
    fn disconnected_graph_still_normalized() {
        let adj = vec![vec![1], vec![0], vec![]];
        let w = pagerank_weights(&adj, 0.85).unwrap();
        assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(w.as_slice().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn bad_damping_rejected() {
        assert!(pagerank_weights(&[vec![]], 1.0).is_err());
        assert!(pagerank_weights(&[vec![]], 0.0).is_err());
    }
}
