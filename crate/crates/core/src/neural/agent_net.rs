//! Per-agent network that is either feed-forward or recurrent.
//!
//! Inputs are 2-D with one row per (step, stream). For recurrent nets the
//! rows are step-major: rows `t * S .. (t + 1) * S` hold step `t` of all `S`
//! streams, where `S` is the row count of the initial hidden state.

use ndarray::{concatenate, s, Axis};
use rand::Rng;

use super::gru::{GruSeqCache, GruSpec};
use super::mlp::{MlpCache, MlpSpec};
use super::params::{Gradients, Matrix, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentNet {
    Feedforward(MlpSpec),
    Recurrent(GruSpec),
}

#[derive(Debug, Clone)]
pub enum AgentNetCache {
    Feedforward(MlpCache),
    Recurrent { seq: GruSeqCache, streams: usize },
}

impl AgentNetCache {
    /// Final hidden state of a recurrent pass.
    pub fn final_hidden(&self) -> Option<&Matrix> {
        match self {
            Self::Feedforward(_) => None,
            Self::Recurrent { seq, .. } => seq.final_hidden(),
        }
    }
}

impl AgentNet {
    pub fn input_dim(&self) -> usize {
        match self {
            Self::Feedforward(m) => m.input_dim,
            Self::Recurrent(g) => g.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Self::Feedforward(m) => m.output_dim,
            Self::Recurrent(g) => g.output_dim,
        }
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        match self {
            Self::Feedforward(_) => None,
            Self::Recurrent(g) => Some(g.hidden_dim),
        }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self, Self::Recurrent(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Feedforward(m) => m.validate(),
            Self::Recurrent(g) => g.validate(),
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, prefix: &str, rng: &mut R) -> ParamSet {
        match self {
            Self::Feedforward(m) => m.init(prefix, rng),
            Self::Recurrent(g) => g.init(prefix, rng),
        }
    }

    /// `h0` is required for recurrent nets and ignored otherwise.
    pub fn forward(&self, p: &ParamSet, input: &Matrix, h0: Option<&Matrix>) -> Result<(Matrix, AgentNetCache)> {
        match self {
            Self::Feedforward(m) => {
                let cache = m.forward(p, input)?;
                Ok((cache.output().clone(), AgentNetCache::Feedforward(cache)))
            }
            Self::Recurrent(g) => {
                let h0 = h0.ok_or_else(|| Error::Config("recurrent forward needs an initial hidden state".into()))?;
                let streams = h0.nrows();
                if streams == 0 || input.nrows() % streams != 0 {
                    return Err(Error::ShapeMismatch {
                        context: "recurrent input rows must be a multiple of the stream count".into(),
                        expected: vec![streams],
                        actual: vec![input.nrows()],
                    });
                }
                let xs: Vec<Matrix> = (0..input.nrows() / streams)
                    .map(|t| input.slice(s![t * streams..(t + 1) * streams, ..]).to_owned())
                    .collect();
                let seq = g.forward_sequence(p, &xs, h0)?;
                let views: Vec<_> = seq.outputs.iter().map(|o| o.view()).collect();
                let out = if views.is_empty() {
                    Matrix::zeros((0, g.output_dim))
                } else {
                    concatenate(Axis(0), &views).expect("equal widths")
                };
                Ok((out, AgentNetCache::Recurrent { seq, streams }))
            }
        }
    }

    pub fn predict(&self, p: &ParamSet, input: &Matrix, h0: Option<&Matrix>) -> Result<Matrix> {
        Ok(self.forward(p, input, h0)?.0)
    }

    /// Parameter gradients for an output gradient shaped like the forward
    /// output.
    pub fn backward(&self, p: &ParamSet, cache: &AgentNetCache, grad: &Matrix) -> Result<Gradients> {
        match (self, cache) {
            (Self::Feedforward(m), AgentNetCache::Feedforward(c)) => Ok(m.backward(p, c, grad)?.0),
            (Self::Recurrent(g), AgentNetCache::Recurrent { seq, streams }) => {
                let steps = seq.outputs.len();
                if grad.nrows() != steps * streams {
                    return Err(Error::ShapeMismatch {
                        context: "recurrent output gradient rows".into(),
                        expected: vec![steps * streams],
                        actual: vec![grad.nrows()],
                    });
                }
                let grads: Vec<Matrix> =
                    (0..steps).map(|t| grad.slice(s![t * streams..(t + 1) * streams, ..]).to_owned()).collect();
                Ok(g.backward_sequence(p, seq, &grads)?.0)
            }
            _ => Err(Error::Config("cache does not belong to this network kind".into())),
        }
    }
}
