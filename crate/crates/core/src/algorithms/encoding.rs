//! Network input encoding and minibatch assembly.

use serde::{Deserialize, Serialize};

use super::replay::Experience;
use crate::agent_io::OBS_DIM;
use crate::error::{Error, Result};
use crate::neural::Matrix;

pub const ACTIONS: usize = 2;

/// How an agent's identity enters the shared local network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityEncoding {
    /// Normalized `(row, col)` grid coordinates; independent of grid size.
    #[default]
    Coordinates,
    /// One-hot agent label; ties the network to one agent count.
    OneHot,
}

impl IdentityEncoding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Coordinates => "coordinates",
            Self::OneHot => "one-hot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coordinates" => Some(Self::Coordinates),
            "one-hot" => Some(Self::OneHot),
            _ => None,
        }
    }
}

/// Scales raw observation features to comparable magnitudes.
pub fn scale_observation(obs: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
    let mut out = *obs;
    for x in &mut out[0..8] {
        *x /= 10.0;
    }
    out[18] = obs[18].min(600.0) / 60.0;
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputEncoder {
    identity: IdentityEncoding,
    rows: usize,
    cols: usize,
    ids: Vec<Vec<f64>>,
}

impl InputEncoder {
    /// Agents are numbered row-major over a `rows x cols` grid.
    pub fn for_grid(rows: usize, cols: usize, identity: IdentityEncoding) -> Self {
        let n = rows * cols;
        let coord = |i: usize, m: usize| if m > 1 { i as f64 / (m - 1) as f64 } else { 0.5 };
        let ids = (0..n)
            .map(|a| match identity {
                IdentityEncoding::Coordinates => vec![coord(a / cols, rows), coord(a % cols, cols)],
                IdentityEncoding::OneHot => {
                    let mut v = vec![0.0; n];
                    v[a] = 1.0;
                    v
                }
            })
            .collect();
        Self { identity, rows, cols, ids }
    }

    pub fn identity(&self) -> IdentityEncoding {
        self.identity
    }

    /// Grid dimensions `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn agents(&self) -> usize {
        self.ids.len()
    }

    pub fn id_dim(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    /// Scaled observation, last action one-hot, identity.
    pub fn local_dim(&self) -> usize {
        OBS_DIM + ACTIONS + self.id_dim()
    }

    pub fn state_dim(&self) -> usize {
        OBS_DIM * self.agents()
    }

    fn write_local(&self, agent: usize, obs: &[f64; OBS_DIM], last_action: usize, out: &mut [f64]) {
        out[..OBS_DIM].copy_from_slice(&scale_observation(obs));
        out[OBS_DIM..OBS_DIM + ACTIONS].fill(0.0);
        out[OBS_DIM + last_action] = 1.0;
        out[OBS_DIM + ACTIONS..].copy_from_slice(&self.ids[agent]);
    }

    /// One row per agent.
    pub fn local_inputs(&self, obs: &[[f64; OBS_DIM]], last_actions: &[usize]) -> Result<Matrix> {
        self.check_agents(obs.len(), "observations")?;
        self.check_agents(last_actions.len(), "last actions")?;
        let mut m = Matrix::zeros((obs.len(), self.local_dim()));
        for (a, (o, &l)) in obs.iter().zip(last_actions).enumerate() {
            self.write_local(a, o, l, m.row_mut(a).into_slice().expect("standard layout"));
        }
        Ok(m)
    }

    fn check_agents(&self, n: usize, context: &'static str) -> Result<()> {
        if n != self.agents() {
            return Err(Error::DimensionMismatch { expected: self.agents(), actual: n, context });
        }
        Ok(())
    }

    /// Assembles a minibatch. Rows of per-agent matrices are ordered
    /// sample-major: row `b * N + n` is agent `n` of sample `b`.
    pub fn batch(&self, samples: &[&Experience], reward_scale: f64) -> Result<Batch> {
        let n = self.agents();
        let b = samples.len();
        let d = self.local_dim();
        let mut batch = Batch {
            agents: n,
            local_in: Matrix::zeros((b * n, d)),
            next_local_in: Matrix::zeros((b * n, d)),
            actions: Vec::with_capacity(b * n),
            rewards: Vec::with_capacity(b * n),
            global_rewards: Vec::with_capacity(b),
            state: Matrix::zeros((b, self.state_dim())),
            next_state: Matrix::zeros((b, self.state_dim())),
            h0: None,
        };
        for (s, e) in samples.iter().enumerate() {
            self.check_agents(e.agents(), "experience agents")?;
            for a in 0..n {
                let r = s * n + a;
                self.write_local(a, &e.obs[a], e.prev_actions[a], batch.local_in.row_mut(r).into_slice().expect("layout"));
                self.write_local(a, &e.next_obs[a], e.actions[a], batch.next_local_in.row_mut(r).into_slice().expect("layout"));
                let so = scale_observation(&e.obs[a]);
                let sn = scale_observation(&e.next_obs[a]);
                for k in 0..OBS_DIM {
                    batch.state[[s, a * OBS_DIM + k]] = so[k];
                    batch.next_state[[s, a * OBS_DIM + k]] = sn[k];
                }
            }
            batch.actions.extend_from_slice(&e.actions);
            batch.rewards.extend(e.rewards.iter().map(|r| r * reward_scale));
            batch.global_rewards.push(e.global_reward * reward_scale);
        }
        Ok(batch)
    }
}

/// Encoded minibatch. For recurrent learners the samples are consecutive
/// in time and `h0` holds the initial hidden state, one row per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub agents: usize,
    pub local_in: Matrix,
    pub next_local_in: Matrix,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub global_rewards: Vec<f64>,
    pub state: Matrix,
    pub next_state: Matrix,
    pub h0: Option<Matrix>,
}

impl Batch {
    pub fn samples(&self) -> usize {
        self.global_rewards.len()
    }
}

/// `[state, one-hot joint action]` rows for a global action-value network.
pub fn joint_inputs(state: &Matrix, actions: &[usize], agents: usize) -> Matrix {
    let b = state.nrows();
    let sd = state.ncols();
    let mut m = Matrix::zeros((b, sd + ACTIONS * agents));
    for s in 0..b {
        m.row_mut(s).slice_mut(ndarray::s![..sd]).assign(&state.row(s));
        for a in 0..agents {
            m[[s, sd + a * ACTIONS + actions[s * agents + a]]] = 1.0;
        }
    }
    m
}
