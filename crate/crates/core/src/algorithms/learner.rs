//! Shared learner state: the parameter-shared local network, an optional
//! auxiliary network (global Q, mixer or critic), replay-driven training and
//! action selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, LearnerConfig, LossReport};
use super::encoding::{Batch, InputEncoder, ACTIONS};
use super::policy::{epsilon_greedy, epsilon_sample};
use super::qmix::MixerSpec;
use super::replay::ReplayBuffer;
use super::{coma, iac, idqn, qcombo, qmix, vdn};
use crate::agent_io::OBS_DIM;
use crate::error::{Error, Result};
use crate::neural::{softmax_rows, AgentNet, AgentNetCache, Checkpoint, Gradients, GruSpec, Matrix, MlpSpec, ParamSet, Trainable};

/// Auxiliary network next to the local one.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxNet {
    Mlp(MlpSpec),
    Mixer(MixerSpec),
}

impl AuxNet {
    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet {
        match self {
            Self::Mlp(m) => m.init("aux", rng),
            Self::Mixer(m) => m.init("mixer", rng),
        }
    }

    pub fn mlp(&self) -> &MlpSpec {
        match self {
            Self::Mlp(m) => m,
            Self::Mixer(_) => panic!("auxiliary network is a mixer"),
        }
    }

    pub fn mixer(&self) -> &MixerSpec {
        match self {
            Self::Mixer(m) => m,
            Self::Mlp(_) => panic!("auxiliary network is an MLP"),
        }
    }
}

/// Result of one loss/gradient evaluation.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub report: LossReport,
    /// One entry per parameter group: local first, auxiliary second.
    pub grads: Vec<Gradients>,
    /// The scalar each entry of `grads` is the gradient of.
    pub objectives: Vec<f64>,
    /// Hidden state after the batch, for recurrent local networks.
    pub final_hidden: Option<Matrix>,
    /// Per-row advantages of actor-critic learners. The actor gradient
    /// treats them as constants.
    pub advantages: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub(crate) config: LearnerConfig,
    pub(crate) encoder: InputEncoder,
    pub(crate) weights: Vec<f64>,
    pub(crate) local_net: AgentNet,
    pub(crate) local: Trainable,
    pub(crate) aux_net: Option<AuxNet>,
    pub(crate) aux: Option<Trainable>,
    acting_hidden: Option<Matrix>,
}

impl Learner {
    /// `weights` are the per-agent global-reward weights.
    pub fn new<R: Rng + ?Sized>(config: LearnerConfig, encoder: InputEncoder, weights: &[f64], rng: &mut R) -> Result<Self> {
        config.validate()?;
        let n = encoder.agents();
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: weights.len(), context: "agent weights" });
        }
        let d = encoder.local_dim();
        let s = encoder.state_dim();
        let algo = config.algorithm;
        let local_net = if config.rnn {
            AgentNet::Recurrent(GruSpec::new(d, config.rnn_hidden, ACTIONS))
        } else {
            let hidden = if algo.is_actor_critic() { &config.actor_hidden } else { &config.hidden };
            AgentNet::Feedforward(MlpSpec::new(d, hidden.clone(), ACTIONS))
        };
        let aux_net = match algo {
            Algorithm::Idqn | Algorithm::Vdn => None,
            Algorithm::Qcombo => Some(AuxNet::Mlp(MlpSpec::new(s + ACTIONS * n, config.hidden.clone(), 1))),
            Algorithm::Qmix => Some(AuxNet::Mixer(MixerSpec::new(s, n, config.mixer_embed))),
            Algorithm::Iac => Some(AuxNet::Mlp(MlpSpec::new(d, config.hidden.clone(), 1))),
            Algorithm::Coma => Some(AuxNet::Mlp(MlpSpec::new(s + ACTIONS * n + d, config.hidden.clone(), ACTIONS))),
        };
        let local_lr = if algo.is_actor_critic() { config.lr_actor } else { config.lr_q };
        let local = Trainable::new(local_net.init("local", rng), local_lr);
        let aux = aux_net.as_ref().map(|a| Trainable::new(a.init(rng), config.lr_q));
        Ok(Self { config, encoder, weights: weights.to_vec(), local_net, local, aux_net, aux, acting_hidden: None })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn encoder(&self) -> &InputEncoder {
        &self.encoder
    }

    pub fn agents(&self) -> usize {
        self.encoder.agents()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn local_net(&self) -> &AgentNet {
        &self.local_net
    }

    pub fn aux_net(&self) -> Option<&AuxNet> {
        self.aux_net.as_ref()
    }

    /// Number of trainable parameter groups.
    pub fn groups(&self) -> usize {
        1 + usize::from(self.aux.is_some())
    }

    fn group(&self, g: usize) -> &Trainable {
        match g {
            0 => &self.local,
            1 => self.aux.as_ref().expect("auxiliary group"),
            _ => panic!("no parameter group {g}"),
        }
    }

    fn group_mut(&mut self, g: usize) -> &mut Trainable {
        match g {
            0 => &mut self.local,
            1 => self.aux.as_mut().expect("auxiliary group"),
            _ => panic!("no parameter group {g}"),
        }
    }

    pub fn params(&self, group: usize) -> &ParamSet {
        &self.group(group).online
    }

    pub fn params_mut(&mut self, group: usize) -> &mut ParamSet {
        &mut self.group_mut(group).online
    }

    pub fn target_params(&self, group: usize) -> &ParamSet {
        &self.group(group).target
    }

    pub fn target_params_mut(&mut self, group: usize) -> &mut ParamSet {
        &mut self.group_mut(group).target
    }

    pub(crate) fn aux_online(&self) -> &ParamSet {
        &self.aux.as_ref().expect("auxiliary network").online
    }

    pub(crate) fn aux_target(&self) -> &ParamSet {
        &self.aux.as_ref().expect("auxiliary network").target
    }

    fn zero_hidden(&self) -> Option<Matrix> {
        self.local_net.hidden_dim().map(|h| Matrix::zeros((self.agents(), h)))
    }

    /// Local network over batch rows, starting from the batch's initial
    /// hidden state (zeros when absent).
    pub(crate) fn local_forward(&self, params: &ParamSet, input: &Matrix, batch: &Batch) -> Result<(Matrix, AgentNetCache)> {
        let h0 = batch.h0.clone().or_else(|| self.zero_hidden());
        self.local_net.forward(params, input, h0.as_ref())
    }

    /// Losses and gradients on one batch; parameters are untouched.
    pub fn compute(&self, batch: &Batch) -> Result<StepOutput> {
        self.compute_with(batch, None)
    }

    /// As [`Learner::compute`], but actor-critic learners use the given
    /// advantages instead of deriving them from the critic.
    pub fn compute_with(&self, batch: &Batch, advantages: Option<&[f64]>) -> Result<StepOutput> {
        if self.aux_net.is_some() && self.aux.is_none() {
            return Err(Error::Config("learner was loaded for execution only".into()));
        }
        if batch.agents != self.agents() {
            return Err(Error::DimensionMismatch { expected: self.agents(), actual: batch.agents, context: "batch agents" });
        }
        let out = match self.algorithm() {
            Algorithm::Idqn => idqn::compute(self, batch),
            Algorithm::Qcombo => qcombo::compute(self, batch),
            Algorithm::Vdn => vdn::compute(self, batch),
            Algorithm::Qmix => qmix::compute(self, batch),
            Algorithm::Iac => iac::compute(self, batch, advantages),
            Algorithm::Coma => coma::compute(self, batch, advantages),
        }?;
        if out.objectives.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{} loss; step aborted", self.algorithm())));
        }
        Ok(out)
    }

    /// One Adam step per parameter group.
    pub fn apply(&mut self, grads: &[Gradients]) -> Result<()> {
        if grads.len() != self.groups() {
            return Err(Error::DimensionMismatch { expected: self.groups(), actual: grads.len(), context: "gradient groups" });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient; optimizer step rejected".into()));
        }
        for (g, grad) in grads.iter().enumerate() {
            self.group_mut(g).apply(grad)?;
        }
        Ok(())
    }

    /// Adam step on a single parameter group.
    pub fn apply_group(&mut self, group: usize, grads: &Gradients) -> Result<()> {
        self.group_mut(group).apply(grads)
    }

    pub fn soft_update(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.local.soft_update(tau)?;
        if let Some(aux) = &mut self.aux {
            aux.soft_update(tau)?;
        }
        Ok(())
    }

    /// One training step: the configured number of minibatch updates, then
    /// a soft target update. Returns `None` when the buffer is too small.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<Option<LossReport>> {
        if buffer.len() < self.config.min_samples() {
            return Ok(None);
        }
        let scale = self.config.reward_scale;
        let mut reports = Vec::with_capacity(self.config.minibatches);
        if self.config.rnn {
            let sequences = (self.config.minibatches / self.config.rnn_periods).max(1);
            for _ in 0..sequences {
                let periods = buffer
                    .sample_sequence(self.config.rnn_periods, self.config.batch_size, rng)
                    .expect("size checked");
                let mut h = self.zero_hidden();
                for period in periods {
                    let mut batch = self.encoder.batch(&period, scale)?;
                    batch.h0 = h;
                    let out = self.compute(&batch)?;
                    self.apply(&out.grads)?;
                    h = out.final_hidden;
                    reports.push(out.report);
                }
            }
        } else {
            for _ in 0..self.config.minibatches {
                let samples = buffer.sample(self.config.batch_size, rng).expect("size checked");
                let batch = self.encoder.batch(&samples, scale)?;
                let out = self.compute(&batch)?;
                self.apply(&out.grads)?;
                reports.push(out.report);
            }
        }
        self.soft_update()?;
        Ok(LossReport::mean(&reports))
    }

    /// Clears the recurrent acting state.
    pub fn reset_hidden(&mut self) {
        self.acting_hidden = None;
    }

    /// Raw local outputs (Q-values or action probabilities), one row per
    /// agent, without advancing the recurrent acting state.
    pub fn local_outputs(&self, obs: &[[f64; OBS_DIM]], last_actions: &[usize]) -> Result<Matrix> {
        Ok(self.evaluate_local(obs, last_actions)?.0)
    }

    fn evaluate_local(&self, obs: &[[f64; OBS_DIM]], last_actions: &[usize]) -> Result<(Matrix, Option<Matrix>)> {
        let input = self.encoder.local_inputs(obs, last_actions)?;
        let h0 = self.acting_hidden.clone().or_else(|| self.zero_hidden());
        let (out, cache) = self.local_net.forward(&self.local.online, &input, h0.as_ref())?;
        let out = if self.algorithm().is_actor_critic() { softmax_rows(&out) } else { out };
        Ok((out, cache.final_hidden().cloned()))
    }

    /// Decentralized action selection from local observations only.
    /// Value learners act ε-greedily; actors sample from their policy, mixed
    /// with ε uniform exploration.
    pub fn act<R: Rng + ?Sized>(&mut self, obs: &[[f64; OBS_DIM]], last_actions: &[usize], epsilon: f64, rng: &mut R) -> Result<Vec<usize>> {
        let (out, hidden) = self.evaluate_local(obs, last_actions)?;
        if hidden.is_some() {
            self.acting_hidden = hidden;
        }
        let actor = self.algorithm().is_actor_critic();
        Ok(out
            .rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                if actor {
                    epsilon_sample(&row, epsilon, rng)
                } else {
                    epsilon_greedy(&row, epsilon, rng)
                }
            })
            .collect())
    }

    pub fn to_checkpoint(&self, seed: u64, config_hash: [u8; 32]) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(seed, config_hash);
        let (rows, cols) = self.encoder.grid();
        let learner = toml::to_string(&self.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.meta.insert("algorithm".into(), self.algorithm().name().into());
        ck.meta.insert("identity".into(), self.encoder.identity().as_str().into());
        ck.meta.insert("grid".into(), format!("{rows}x{cols}"));
        ck.meta.insert("learner_config".into(), learner);
        ck.add_params("local", &self.local.online);
        ck.add_params("local_target", &self.local.target);
        if let Some(aux) = &self.aux {
            ck.add_params("aux", &aux.online);
            ck.add_params("aux_target", &aux.target);
        }
        Ok(ck)
    }

    /// Restores a learner for `encoder`. When the encoder's agent count
    /// differs from the checkpoint's, only the local network is loaded and
    /// the learner can act but not train.
    pub fn from_checkpoint(ck: &Checkpoint, encoder: InputEncoder, weights: &[f64]) -> Result<Self> {
        let config: LearnerConfig =
            toml::from_str(ck.meta("learner_config")?).map_err(|e| Error::Checkpoint(format!("learner config: {e}")))?;
        if encoder.identity() != config.identity {
            return Err(Error::Checkpoint(format!(
                "checkpoint uses {} identity encoding, encoder uses {}",
                config.identity.as_str(),
                encoder.identity().as_str()
            )));
        }
        let mut learner = Self::new(config, encoder, weights, &mut ChaCha8Rng::seed_from_u64(0))?;
        let local = ck.params("local")?;
        let local_target = ck.params("local_target")?;
        learner.local.online.check_same_layout(&local, "checkpoint local network")?;
        learner.local.online.check_same_layout(&local_target, "checkpoint local target")?;
        learner.local.online = local;
        learner.local.target = local_target;
        learner.local.optimizer = crate::neural::Adam::new(&learner.local.online, learner.local.optimizer.lr);
        if let Some(aux) = &mut learner.aux {
            let online = ck.params("aux")?;
            let target = ck.params("aux_target")?;
            if aux.online.check_same_layout(&online, "aux").is_ok() {
                *aux = Trainable::new(online, aux.optimizer.lr);
                aux.target = target;
            } else {
                learner.aux = None;
            }
        }
        Ok(learner)
    }
}

/// `max_a Q(row, a)` per row.
pub(crate) fn row_max(q: &Matrix) -> Vec<f64> {
    q.rows().into_iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
}

/// Greedy index per row, ties to "keep".
pub(crate) fn row_argmax(q: &Matrix) -> Vec<usize> {
    q.rows().into_iter().map(|r| super::policy::argmax(r.as_slice().expect("layout"))).collect()
}

/// `Q(row, a_row)` per row.
pub(crate) fn select(q: &Matrix, actions: &[usize]) -> Vec<f64> {
    actions.iter().enumerate().map(|(r, &a)| q[[r, a]]).collect()
}
