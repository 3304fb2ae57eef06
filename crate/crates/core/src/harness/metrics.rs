use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agent_io::OBS_DIM;
use crate::algorithms::LossReport;
use crate::error::{Error, Result};

/// One decision step, with network-wide means over incoming lanes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    /// Train/eval cycle, or flow period for whole-program runs.
    pub segment: usize,
    /// Time step at the end of the decision interval.
    pub step: u64,
    pub global_reward: f64,
    pub mean_reward: f64,
    pub mean_queue: f64,
    /// Minutes.
    pub mean_wait: f64,
    pub mean_delay: f64,
    pub epsilon: f64,
    pub q_loss: Option<f64>,
    pub global_loss: Option<f64>,
    pub consistency_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    /// Per-agent rewards, `;`-separated.
    pub rewards: String,
    /// Green axis per light (0 = E-W, 1 = N-S), `;`-separated.
    pub phases: String,
}

/// Number of CSV columns of [`MetricRecord`].
pub const METRIC_COLUMNS: usize = 15;

impl MetricRecord {
    pub fn new(segment: usize, step: u64, rewards: &[f64], global_reward: f64, obs: &[[f64; OBS_DIM]], epsilon: f64) -> Self {
        let lanes = (4 * obs.len()) as f64;
        let sum = |range: std::ops::Range<usize>| obs.iter().flat_map(|o| o[range.clone()].iter()).sum::<f64>() / lanes;
        Self {
            segment,
            step,
            global_reward,
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            mean_queue: sum(0..4),
            mean_wait: sum(8..12),
            mean_delay: sum(12..16),
            epsilon,
            q_loss: None,
            global_loss: None,
            consistency_loss: None,
            critic_loss: None,
            actor_loss: None,
            rewards: join(rewards.iter()),
            phases: join(obs.iter().map(|o| usize::from(o[17] > 0.5))),
        }
    }

    pub fn with_losses(mut self, losses: Option<&LossReport>) -> Self {
        if let Some(l) = losses {
            self.q_loss = l.q_loss;
            self.global_loss = l.global_loss;
            self.consistency_loss = l.consistency_loss;
            self.critic_loss = l.critic_loss;
            self.actor_loss = l.actor_loss;
        }
        self
    }

    /// Green axis per light, parsed back from [`MetricRecord::phases`].
    pub fn phase_list(&self) -> Vec<usize> {
        self.phases.split(';').filter(|s| !s.is_empty()).map(|s| s.parse().expect("phase index")).collect()
    }
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Losses of one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub cycle: usize,
    pub step: u64,
    pub q_loss: Option<f64>,
    pub global_loss: Option<f64>,
    pub consistency_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
}

impl LossRecord {
    pub fn new(cycle: usize, step: u64, r: &LossReport) -> Self {
        Self {
            cycle,
            step,
            q_loss: r.q_loss,
            global_loss: r.global_loss,
            consistency_loss: r.consistency_loss,
            critic_loss: r.critic_loss,
            actor_loss: r.actor_loss,
        }
    }
}

/// Header plus one row per record. An empty slice still gets the header.
pub fn write_csv<T: Serialize + Default>(records: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        // serde-driven headers need a row; emit them from a default value.
        let mut probe = csv::Writer::from_writer(Vec::new());
        probe.serialize(T::default())?;
        let bytes = probe.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        let header = String::from_utf8_lossy(&bytes).lines().next().unwrap_or_default().to_string();
        w.write_record(header.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean of `f` over the records, or NaN when empty.
pub fn mean_of(records: &[MetricRecord], f: impl Fn(&MetricRecord) -> f64) -> f64 {
    records.iter().map(f).sum::<f64>() / records.len() as f64
}

impl Default for MetricRecord {
    fn default() -> Self {
        Self::new(0, 0, &[0.0], 0.0, &[[0.0; OBS_DIM]], 0.0)
    }
}

impl Default for LossRecord {
    fn default() -> Self {
        Self::new(0, 0, &LossReport::default())
    }
}

/// Provenance written next to the CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub git_describe: String,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
    pub config: String,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `git describe --always --dirty`, or `unknown` outside a repository.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}
