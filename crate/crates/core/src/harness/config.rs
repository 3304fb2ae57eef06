use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::LearnerConfig;
use crate::error::{Error, Result};
use crate::sim::network::DEFAULT_EDGE_LENGTH;
use crate::sim::FlowProgram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    /// Meters between adjacent intersections.
    pub edge_length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { rows: 1, cols: 1, edge_length: DEFAULT_EDGE_LENGTH }
    }
}

/// Run schedule in time steps (simulated seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub horizon: u64,
    /// Random-policy steps that fill the network before learning starts.
    pub warmup: u64,
    pub train_steps: u64,
    pub eval_steps: u64,
    /// Evaluation records are kept only for the tail of each window.
    pub record_last: u64,
    pub decision_interval: u64,
    /// Reward accumulation window; must equal the decision interval.
    pub reward_window: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            horizon: 12_000,
            warmup: 1000,
            train_steps: 400,
            eval_steps: 400,
            record_last: 200,
            decision_interval: 5,
            reward_window: 5,
        }
    }
}

impl ScheduleConfig {
    /// Complete train/eval cycles that fit after warmup; the remainder is
    /// dropped.
    pub fn cycles(&self) -> usize {
        ((self.horizon - self.warmup) / (self.train_steps + self.eval_steps)) as usize
    }

    pub fn decisions(&self, steps: u64) -> usize {
        (steps / self.decision_interval) as usize
    }

    /// First time step of cycle `c`'s training window.
    pub fn cycle_start(&self, c: usize) -> u64 {
        self.warmup + c as u64 * (self.train_steps + self.eval_steps)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.decision_interval == 0 {
            return fail("decision_interval must be positive".into());
        }
        if self.reward_window != self.decision_interval {
            return fail(format!(
                "reward_window ({}) must equal decision_interval ({})",
                self.reward_window, self.decision_interval
            ));
        }
        for (name, v) in [
            ("warmup", self.warmup),
            ("train_steps", self.train_steps),
            ("eval_steps", self.eval_steps),
            ("record_last", self.record_last),
            ("horizon", self.horizon),
        ] {
            if v % self.decision_interval != 0 {
                return fail(format!("{name} ({v}) is not a multiple of decision_interval"));
            }
        }
        if self.train_steps == 0 || self.eval_steps == 0 || self.record_last == 0 {
            return fail("train_steps, eval_steps and record_last must be positive".into());
        }
        if self.record_last > self.eval_steps {
            return fail(format!("record_last {} exceeds eval_steps {}", self.record_last, self.eval_steps));
        }
        if self.horizon < self.warmup + self.train_steps + self.eval_steps {
            return fail(format!("horizon {} shorter than warmup plus one train/eval cycle", self.horizon));
        }
        Ok(())
    }
}

/// Exploration used while evaluating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalEpsilon {
    /// Greedy value learners; actors sample their policy.
    #[default]
    Zero,
    /// Keep the ε of the preceding training window.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub eval_epsilon: EvalEpsilon,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, output_dir: PathBuf::from("runs/default"), eval_epsilon: EvalEpsilon::Zero }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridConfig,
    pub flow: FlowProgram,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Default schedule and learner on a grid with a single flow period
    /// covering the horizon.
    pub fn new(rows: usize, cols: usize, horizontal: Vec<u32>, vertical: Vec<u32>) -> Self {
        let schedule = ScheduleConfig::default();
        Self {
            grid: GridConfig { rows, cols, ..Default::default() },
            flow: FlowProgram::constant(schedule.horizon, horizontal, vertical),
            learner: LearnerConfig::default(),
            schedule,
            run: RunConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return Err(Error::Config("grid dimensions must be >= 1".into()));
        }
        if !(self.grid.edge_length > 0.0) {
            return Err(Error::Config("edge_length must be positive".into()));
        }
        self.flow.validate(self.grid.rows, self.grid.cols)?;
        self.learner.validate()?;
        self.schedule.validate()
    }

    /// Canonical TOML with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml().as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }
}
