//! Independent actor-critic: softmax actor and state-value critic per
//! agent, both parameter-shared. The critic's TD error is the advantage.

use super::config::LossReport;
use super::encoding::Batch;
use super::learner::{Learner, StepOutput};
use crate::error::Result;
use crate::neural::{softmax_rows, Matrix};

pub(crate) fn compute(l: &Learner, b: &Batch, fixed: Option<&[f64]>) -> Result<StepOutput> {
    let critic = l.aux_net.as_ref().expect("critic").mlp();
    let (logits, actor_cache) = l.local_forward(&l.local.online, &b.local_in, b)?;
    let pi = softmax_rows(&logits);
    let v_cache = critic.forward(l.aux_online(), &b.local_in)?;
    let v_next = critic.predict(l.aux_target(), &b.next_local_in)?;
    let v = v_cache.output();

    let rows = b.actions.len();
    let rf = rows as f64;
    let mut dv = Matrix::zeros((rows, 1));
    let mut dlogits = Matrix::zeros(logits.dim());
    let (mut critic_loss, mut actor_loss) = (0.0, 0.0);
    let mut advantages = Vec::with_capacity(rows);
    for r in 0..rows {
        let td = b.rewards[r] + l.config.gamma * v_next[[r, 0]] - v[[r, 0]];
        critic_loss += 0.5 * td * td;
        dv[[r, 0]] = -td / rf;
        let delta = fixed.map_or(td, |f| f[r]);
        advantages.push(delta);
        let a = b.actions[r];
        actor_loss -= pi[[r, a]].ln() * delta;
        for k in 0..pi.ncols() {
            let indicator = if k == a { 1.0 } else { 0.0 };
            dlogits[[r, k]] = -(delta / rf) * (indicator - pi[[r, k]]);
        }
    }
    critic_loss /= rf;
    actor_loss /= rf;
    let grad_actor = l.local_net.backward(&l.local.online, &actor_cache, &dlogits)?;
    let (grad_critic, _) = critic.backward(l.aux_online(), &v_cache, &dv)?;
    Ok(StepOutput {
        report: LossReport { critic_loss: Some(critic_loss), actor_loss: Some(actor_loss), ..Default::default() },
        grads: vec![grad_actor, grad_critic],
        objectives: vec![actor_loss, critic_loss],
        final_hidden: actor_cache.final_hidden().cloned(),
        advantages: Some(advantages),
    })
}
