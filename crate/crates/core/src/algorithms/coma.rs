//! Counterfactual multi-agent policy gradient: a centralized critic
//! `Q(s, a⁻ⁿ, n, oⁿ) -> |A|` values and a counterfactual baseline
//! `b = Σ_â π(â|oⁿ) Q(s, (a⁻ⁿ, â))`.

use ndarray::s;

use super::config::LossReport;
use super::encoding::{Batch, ACTIONS};
use super::learner::{row_argmax, Learner, StepOutput};
use crate::error::Result;
use crate::neural::{softmax_rows, Matrix};

/// Critic rows `[s, one-hot a⁻ⁿ (own slot zero), local input of n]`.
pub fn critic_inputs(state: &Matrix, actions: &[usize], local_in: &Matrix, agents: usize) -> Matrix {
    let samples = state.nrows();
    let sd = state.ncols();
    let ld = local_in.ncols();
    let mut m = Matrix::zeros((samples * agents, sd + ACTIONS * agents + ld));
    for b in 0..samples {
        for n in 0..agents {
            let r = b * agents + n;
            m.slice_mut(s![r, ..sd]).assign(&state.row(b));
            for other in (0..agents).filter(|&o| o != n) {
                m[[r, sd + other * ACTIONS + actions[b * agents + other]]] = 1.0;
            }
            m.slice_mut(s![r, sd + ACTIONS * agents..]).assign(&local_in.row(r));
        }
    }
    m
}

/// `Σ_â π(â) Q(â)`.
pub fn baseline(pi: &[f64], q: &[f64]) -> f64 {
    pi.iter().zip(q).map(|(p, q)| p * q).sum()
}

/// `Q(a) - b`.
pub fn advantage(pi: &[f64], q: &[f64], action: usize) -> f64 {
    q[action] - baseline(pi, q)
}

fn log_softmax(logits: &[f64], a: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits[a] - lse
}

pub(crate) fn compute(l: &Learner, b: &Batch, fixed: Option<&[f64]>) -> Result<StepOutput> {
    let n = b.agents;
    let critic = l.aux_net.as_ref().expect("critic").mlp();
    let (logits, actor_cache) = l.local_forward(&l.local.online, &b.local_in, b)?;
    let pi = softmax_rows(&logits);
    let (next_logits, _) = l.local_forward(&l.local.online, &b.next_local_in, b)?;
    let pi_next = softmax_rows(&next_logits);
    let next_mode = row_argmax(&pi_next);

    let q_cache = critic.forward(l.aux_online(), &critic_inputs(&b.state, &b.actions, &b.local_in, n))?;
    let q_next = critic.predict(l.aux_target(), &critic_inputs(&b.next_state, &next_mode, &b.next_local_in, n))?;
    let q = q_cache.output();

    let rows = b.actions.len();
    let rf = rows as f64;
    let bf = b.samples() as f64;
    let mut dq = Matrix::zeros(q.dim());
    let mut dlogits = Matrix::zeros(logits.dim());
    let (mut critic_loss, mut actor_loss) = (0.0, 0.0);
    let mut advantages = Vec::with_capacity(rows);
    for r in 0..rows {
        let a = b.actions[r];
        let expected_next = baseline(pi_next.row(r).as_slice().expect("layout"), q_next.row(r).as_slice().expect("layout"));
        let e = b.global_rewards[r / n] + l.config.gamma * expected_next - q[[r, a]];
        critic_loss += 0.5 * e * e;
        dq[[r, a]] = -e / rf;

        let pr = pi.row(r);
        let adv = fixed.map_or_else(|| advantage(pr.as_slice().expect("layout"), q.row(r).as_slice().expect("layout"), a), |f| f[r]);
        advantages.push(adv);
        actor_loss -= log_softmax(logits.row(r).as_slice().expect("layout"), a) * adv;
        for k in 0..ACTIONS {
            let indicator = if k == a { 1.0 } else { 0.0 };
            dlogits[[r, k]] = -(adv / bf) * (indicator - pr[k]);
        }
    }
    critic_loss /= rf;
    actor_loss /= bf;
    let grad_actor = l.local_net.backward(&l.local.online, &actor_cache, &dlogits)?;
    let (grad_critic, _) = critic.backward(l.aux_online(), &q_cache, &dq)?;
    Ok(StepOutput {
        report: LossReport { critic_loss: Some(critic_loss), actor_loss: Some(actor_loss), ..Default::default() },
        grads: vec![grad_actor, grad_critic],
        objectives: vec![actor_loss, critic_loss],
        final_hidden: actor_cache.final_hidden().cloned(),
        advantages: Some(advantages),
    })
}
