use super::adam::{soft_update, Adam};
use super::params::{Gradients, ParamSet};
use crate::error::Result;

/// Online parameters with their target copy and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainable {
    pub online: ParamSet,
    pub target: ParamSet,
    pub optimizer: Adam,
}

impl Trainable {
    /// Target starts as an exact copy of the online parameters.
    pub fn new(online: ParamSet, lr: f64) -> Self {
        let optimizer = Adam::new(&online, lr);
        Self { target: online.clone(), online, optimizer }
    }

    pub fn apply(&mut self, grads: &Gradients) -> Result<()> {
        self.optimizer.update(&mut self.online, grads)
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        soft_update(&mut self.target, &self.online, tau)
    }
}
