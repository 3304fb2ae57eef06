use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EvalEpsilon, ExperimentConfig};
use super::env::{TrafficEnv, Transition};
use super::metrics::{git_describe, write_csv, LossRecord, Manifest, MetricRecord};
use super::reference::ReferencePolicy;
use crate::algorithms::{Experience, IdentityEncoding, InputEncoder, Learner, LossReport, ReplayBuffer};
use crate::error::{Error, Result};
use crate::neural::Checkpoint;

/// Independent random streams derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_ACT: u64 = 1;
const STREAM_REPLAY: u64 = 2;
const STREAM_EVAL: u64 = 3;

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Whatever picks the actions.
#[derive(Debug, Clone)]
pub enum Controller {
    Learner(Box<Learner>),
    Reference(ReferencePolicy),
}

impl Controller {
    pub fn name(&self) -> String {
        match self {
            Self::Learner(l) => l.algorithm().name().to_string(),
            Self::Reference(p) => p.name().to_string(),
        }
    }
}

/// One simulated run: environment, controller, replay and random streams.
/// Vehicles persist across train and evaluation windows.
pub struct Session {
    pub config: ExperimentConfig,
    pub env: TrafficEnv,
    controller: Controller,
    training: bool,
    buffer: ReplayBuffer,
    act_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    epsilon: f64,
    last_actions: Vec<usize>,
    losses: Vec<LossRecord>,
    window_losses: Vec<LossReport>,
}

impl Session {
    /// With `training` set, a learner controller stores transitions and
    /// updates its parameters during training windows.
    pub fn new(config: ExperimentConfig, controller: Controller, training: bool) -> Result<Self> {
        config.validate()?;
        let env = TrafficEnv::new(&config)?;
        if let Controller::Learner(l) = &controller {
            if l.agents() != env.agents() {
                return Err(Error::DimensionMismatch { expected: env.agents(), actual: l.agents(), context: "learner agents vs grid" });
            }
        }
        let seed = config.run.seed;
        let n = env.agents();
        Ok(Self {
            buffer: ReplayBuffer::new(config.learner.buffer_capacity),
            epsilon: config.learner.epsilon_start,
            training,
            controller,
            env,
            act_rng: seeded(seed, STREAM_ACT),
            replay_rng: seeded(seed, STREAM_REPLAY),
            eval_rng: seeded(seed, STREAM_EVAL),
            last_actions: vec![0; n],
            losses: Vec::new(),
            window_losses: Vec::new(),
            config,
        })
    }

    pub fn learner(&self) -> Option<&Learner> {
        match &self.controller {
            Controller::Learner(l) => Some(l),
            Controller::Reference(_) => None,
        }
    }

    pub fn into_controller(self) -> Controller {
        self.controller
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn losses(&self) -> &[LossRecord] {
        &self.losses
    }

    fn decide(&mut self, epsilon: f64, evaluating: bool) -> Result<Vec<usize>> {
        let t = self.env.time_step();
        let n = self.env.agents();
        let rng = if evaluating { &mut self.eval_rng } else { &mut self.act_rng };
        match &mut self.controller {
            Controller::Learner(l) => l.act(self.env.observation(), &self.last_actions, epsilon, rng),
            Controller::Reference(p) => Ok(p.decide(t, n, rng)),
        }
    }

    fn advance(&mut self, actions: Vec<usize>, store: bool) -> Result<Transition> {
        let step = self.env.time_step();
        let obs = self.env.observation().to_vec();
        let tr = self.env.step(&actions)?;
        let prev = std::mem::replace(&mut self.last_actions, actions.clone());
        if store && self.training {
            self.buffer.push(Experience {
                step,
                obs,
                prev_actions: prev,
                actions,
                rewards: tr.rewards.clone(),
                global_reward: tr.global_reward,
                next_obs: tr.next_obs.clone(),
            });
        }
        Ok(tr)
    }

    /// Random-policy steps up to the configured warmup.
    pub fn warmup(&mut self) -> Result<()> {
        let n = self.env.agents();
        while self.env.time_step() < self.config.schedule.warmup {
            let actions = ReferencePolicy::Random.decide(self.env.time_step(), n, &mut self.act_rng);
            self.advance(actions, true)?;
        }
        if let Controller::Learner(l) = &mut self.controller {
            l.reset_hidden();
        }
        Ok(())
    }

    /// One training window. Each decision stores its transition and runs a
    /// training step; ε is fixed for the window.
    pub fn train_window(&mut self, cycle: usize) -> Result<()> {
        self.window_losses.clear();
        for _ in 0..self.config.schedule.decisions(self.config.schedule.train_steps) {
            let actions = self.decide(self.epsilon, false)?;
            self.advance(actions, true)?;
            if !self.training {
                continue;
            }
            let Controller::Learner(l) = &mut self.controller else { continue };
            if let Some(report) = l.train_step(&self.buffer, &mut self.replay_rng)? {
                self.losses.push(LossRecord::new(cycle, self.env.time_step(), &report));
                self.window_losses.push(report);
            }
        }
        Ok(())
    }

    fn eval_epsilon(&self) -> f64 {
        match self.config.run.eval_epsilon {
            EvalEpsilon::Zero => 0.0,
            EvalEpsilon::Frozen => self.epsilon,
        }
    }

    /// One evaluation window; returns the records of its final
    /// `record_last` steps. Parameters are not touched.
    pub fn eval_window(&mut self, cycle: usize) -> Result<Vec<MetricRecord>> {
        let sched = &self.config.schedule;
        let total = sched.decisions(sched.eval_steps);
        let skip = total - sched.decisions(sched.record_last);
        let eps = self.eval_epsilon();
        let losses = LossReport::mean(&self.window_losses);
        let mut records = Vec::with_capacity(total - skip);
        for i in 0..total {
            let actions = self.decide(eps, true)?;
            let tr = self.advance(actions, false)?;
            if i >= skip {
                let rec = MetricRecord::new(cycle, self.env.time_step(), &tr.rewards, tr.global_reward, &tr.next_obs, eps);
                records.push(rec.with_losses(losses.as_ref()));
            }
        }
        Ok(records)
    }

    /// Warmup followed by every train/eval cycle. `on_cycle` sees each
    /// cycle's evaluation records.
    pub fn run_schedule(&mut self, mut on_cycle: impl FnMut(usize, &Session, &[MetricRecord]) -> Result<()>) -> Result<Vec<MetricRecord>> {
        self.warmup()?;
        let mut all = Vec::new();
        for cycle in 0..self.config.schedule.cycles() {
            debug_assert_eq!(self.env.time_step(), self.config.schedule.cycle_start(cycle));
            self.train_window(cycle)?;
            let records = self.eval_window(cycle)?;
            on_cycle(cycle, self, &records)?;
            all.extend(records);
            self.epsilon *= self.config.learner.epsilon_decay;
        }
        Ok(all)
    }

    /// Executes the frozen controller from time zero to the horizon,
    /// recording every decision tagged with its flow period.
    pub fn run_program(&mut self) -> Result<Vec<MetricRecord>> {
        let mut records = Vec::new();
        while self.env.time_step() < self.config.schedule.horizon {
            let start = self.env.time_step();
            let segment = self.env.program.period_index(start).unwrap_or(usize::MAX);
            let actions = self.decide(0.0, true)?;
            let tr = self.advance(actions, false)?;
            records.push(MetricRecord::new(segment, self.env.time_step(), &tr.rewards, tr.global_reward, &tr.next_obs, 0.0));
        }
        Ok(records)
    }
}

/// Result of a training run.
pub struct TrainingOutcome {
    pub records: Vec<MetricRecord>,
    pub losses: Vec<LossRecord>,
    pub learner: Learner,
}

impl TrainingOutcome {
    /// Evaluation records of the last cycle.
    pub fn final_cycle(&self) -> Vec<MetricRecord> {
        final_cycle(&self.records)
    }
}

pub fn final_cycle(records: &[MetricRecord]) -> Vec<MetricRecord> {
    let last = records.iter().map(|r| r.segment).max();
    records.iter().filter(|r| Some(r.segment) == last).cloned().collect()
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Fresh learner for the config's grid and algorithm.
pub fn build_learner(config: &ExperimentConfig) -> Result<Learner> {
    let env = TrafficEnv::new(config)?;
    let encoder = InputEncoder::for_grid(config.grid.rows, config.grid.cols, config.learner.identity);
    Learner::new(config.learner.clone(), encoder, env.weights(), &mut seeded(config.run.seed, STREAM_INIT))
}

fn write_cycle(out: &Path, cycle: usize, records: &[MetricRecord]) -> Result<()> {
    write_csv(records, &out.join("metrics").join(format!("cycle_{cycle:02}.csv")))
}

/// Trains a learner over the full schedule. With `out`, writes per-cycle
/// metrics and checkpoints, the combined metrics, the losses and a
/// manifest.
pub fn run_training(config: &ExperimentConfig, out: Option<&Path>) -> Result<TrainingOutcome> {
    let started = Instant::now();
    log::info!("effective config:\n{}", config.to_toml());
    let learner = build_learner(config)?;
    let mut session = Session::new(config.clone(), Controller::Learner(Box::new(learner)), true)?;
    if let Some(out) = out {
        create_dir(&out.join("metrics"))?;
        create_dir(&out.join("checkpoints"))?;
    }
    let seed = config.run.seed;
    let hash = config.hash();
    let records = session.run_schedule(|cycle, s, recs| {
        let learner = s.learner().expect("learner session");
        let mean: f64 = recs.iter().map(|r| r.global_reward).sum::<f64>() / recs.len() as f64;
        log::info!("cycle {cycle:2} t={} eps={:.4} global reward {mean:.3}", s.env.time_step(), s.epsilon());
        if let Some(out) = out {
            write_cycle(out, cycle, recs)?;
            learner.to_checkpoint(seed, hash)?.save(&out.join("checkpoints").join(format!("cycle_{cycle:02}.qckp")))?;
        }
        Ok(())
    })?;
    let losses = session.losses().to_vec();
    let Controller::Learner(learner) = session.into_controller() else { unreachable!("learner session") };
    if let Some(out) = out {
        write_csv(&records, &out.join("metrics.csv"))?;
        write_csv(&losses, &out.join("losses.csv"))?;
        learner.to_checkpoint(seed, hash)?.save(&out.join("checkpoint.qckp"))?;
        write_manifest(out, &format!("train --algo {}", config.learner.algorithm), config, started, &["metrics.csv", "losses.csv", "metrics/", "checkpoints/", "checkpoint.qckp"])?;
    }
    Ok(TrainingOutcome { records, losses, learner: *learner })
}

/// A reference policy over the training schedule, for comparison with
/// learned policies cycle by cycle.
pub fn run_reference(config: &ExperimentConfig, policy: ReferencePolicy, out: Option<&Path>) -> Result<Vec<MetricRecord>> {
    let started = Instant::now();
    let mut session = Session::new(config.clone(), Controller::Reference(policy), false)?;
    let records = session.run_schedule(|_, _, _| Ok(()))?;
    if let Some(out) = out {
        create_dir(out)?;
        write_csv(&records, &out.join("metrics.csv"))?;
        write_manifest(out, &format!("reference --policy {policy}"), config, started, &["metrics.csv"])?;
    }
    Ok(records)
}

/// Checks the checkpoint's grid against the config's.
fn checkpoint_grid(ck: &Checkpoint) -> Result<(usize, usize)> {
    let grid = ck.meta("grid")?;
    let parsed = grid.split_once('x').and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)));
    parsed.ok_or_else(|| Error::Checkpoint(format!("malformed grid '{grid}'")))
}

/// Restores a checkpoint for the config's own grid.
pub fn load_learner(ck: &Checkpoint, config: &ExperimentConfig) -> Result<Learner> {
    let (rows, cols) = checkpoint_grid(ck)?;
    if (rows, cols) != (config.grid.rows, config.grid.cols) {
        return Err(Error::Config(format!(
            "checkpoint trained on {rows}x{cols}, config describes {}x{}",
            config.grid.rows, config.grid.cols
        )));
    }
    let identity = IdentityEncoding::parse(ck.meta("identity")?)
        .ok_or_else(|| Error::Checkpoint("unknown identity encoding".into()))?;
    let env = TrafficEnv::new(config)?;
    Learner::from_checkpoint(ck, InputEncoder::for_grid(rows, cols, identity), env.weights())
}

/// The frozen policy of a checkpoint over the evaluation schedule: warmup,
/// then train-length and evaluation windows, both acting greedily.
pub fn run_evaluation(config: &ExperimentConfig, ck: &Checkpoint, out: Option<&Path>) -> Result<Vec<MetricRecord>> {
    let started = Instant::now();
    let learner = load_learner(ck, config)?;
    let mut config = config.clone();
    config.learner.epsilon_start = 0.0;
    let mut session = Session::new(config.clone(), Controller::Learner(Box::new(learner)), false)?;
    let records = session.run_schedule(|_, _, _| Ok(()))?;
    if let Some(out) = out {
        create_dir(out)?;
        write_csv(&records, &out.join("metrics.csv"))?;
        write_manifest(out, "eval", &config, started, &["metrics.csv"])?;
    }
    Ok(records)
}

/// The frozen controller over the whole flow program, records segmented
/// by flow period.
pub fn run_program(config: &ExperimentConfig, controller: Controller, out: Option<&Path>, command: &str) -> Result<Vec<MetricRecord>> {
    let started = Instant::now();
    let mut session = Session::new(config.clone(), controller, false)?;
    let records = session.run_program()?;
    if let Some(out) = out {
        create_dir(out)?;
        write_csv(&records, &out.join("metrics.csv"))?;
        for p in 0..config.flow.periods.len() {
            let seg: Vec<MetricRecord> = records.iter().filter(|r| r.segment == p).cloned().collect();
            write_csv(&seg, &out.join(format!("period_{p}.csv")))?;
        }
        write_manifest(out, command, config, started, &["metrics.csv", "period_*.csv"])?;
    }
    Ok(records)
}

/// A checkpoint on a multi-period test program of the same grid.
pub fn run_generalization(config: &ExperimentConfig, ck: &Checkpoint, out: Option<&Path>) -> Result<Vec<MetricRecord>> {
    let learner = load_learner(ck, config)?;
    run_program(config, Controller::Learner(Box::new(learner)), out, "generalize")
}

/// Decentralized execution of a checkpoint's local network on another
/// grid. Requires the coordinate identity encoding.
pub fn transfer_learner(ck: &Checkpoint, target: &ExperimentConfig) -> Result<Learner> {
    let identity = ck.meta("identity")?;
    if identity != IdentityEncoding::Coordinates.as_str() {
        return Err(Error::Config(format!(
            "checkpoint uses '{identity}' agent identity; its input width is tied to the training grid, \
             so it cannot run on another topology (train with identity = \"coordinates\")"
        )));
    }
    let env = TrafficEnv::new(target)?;
    let encoder = InputEncoder::for_grid(target.grid.rows, target.grid.cols, IdentityEncoding::Coordinates);
    Learner::from_checkpoint(ck, encoder, env.weights())
}

pub fn run_transfer(target: &ExperimentConfig, ck: &Checkpoint, out: Option<&Path>) -> Result<Vec<MetricRecord>> {
    let learner = transfer_learner(ck, target)?;
    run_program(target, Controller::Learner(Box::new(learner)), out, "transfer")
}

fn write_manifest(out: &Path, command: &str, config: &ExperimentConfig, started: Instant, outputs: &[&str]) -> Result<()> {
    Manifest {
        command: command.to_string(),
        seed: config.run.seed,
        config_hash: config.hash_hex(),
        git_describe: git_describe(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        config: config.to_toml(),
    }
    .write(&out.join("manifest.toml"))
}

/// Output directory of one value of a λ sweep.
pub fn sweep_dir(base: &Path, lambda: f64) -> PathBuf {
    base.join(format!("lambda_{lambda}"))
}
