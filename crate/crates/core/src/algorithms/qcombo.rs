//! Local Q-learning, a global action-value network and the consistency
//! regularizer tying them together.
//!
//! With `k` the agent weights, `S = Σ_n k_n Q_n(o_n, a_n)` and
//! `Δ = Q_w(s, a) - S`:
//!
//! ```text
//! L(θ)  = 1/(BN) Σ ½ (y_n - Q_n)²,   y_n = r_n + γ max_a Q_θ̂(o'_n, a)
//! L(w)  = 1/B Σ ½ (y - Q_w)²,        y   = R + γ Q_ŵ(s', a'),  a'_n = argmax Q_θ̂(o'_n, ·)
//! L_reg = 1/B Σ ½ Δ²
//! L_tot = L(w) + L(θ) + λ L_reg
//! ```
//!
//! Both gradients come from one forward pass; the two Adam steps follow.

use super::config::LossReport;
use super::encoding::{joint_inputs, Batch};
use super::idqn::{local_loss, local_td};
use super::learner::{Learner, StepOutput};
use crate::error::Result;
use crate::neural::Matrix;

/// `½ (q_global - Σ_n k_n q_n)²`.
pub fn consistency_term(q_global: f64, weights: &[f64], q_local: &[f64]) -> f64 {
    let s: f64 = weights.iter().zip(q_local).map(|(k, q)| k * q).sum();
    0.5 * (q_global - s).powi(2)
}

pub(crate) fn compute(l: &Learner, b: &Batch) -> Result<StepOutput> {
    let n = b.agents;
    let samples = b.samples();
    let bf = samples as f64;
    let lambda = l.config.lambda;
    let global = l.aux_net.as_ref().expect("global network").mlp();

    let td = local_td(l, b)?;
    let (l_theta, mut dq) = local_loss(&td, &b.actions);

    let g_cache = global.forward(l.aux_online(), &joint_inputs(&b.state, &b.actions, n))?;
    let g_next = global.predict(l.aux_target(), &joint_inputs(&b.next_state, &td.next_greedy, n))?;
    let q_w = g_cache.output();

    let mut dg = Matrix::zeros((samples, 1));
    let (mut l_w, mut l_reg) = (0.0, 0.0);
    for s in 0..samples {
        let y = b.global_rewards[s] + l.config.gamma * g_next[[s, 0]];
        let qw = q_w[[s, 0]];
        let weighted: f64 = (0..n).map(|a| l.weights[a] * td.q_sel[s * n + a]).sum();
        let e = y - qw;
        let delta = qw - weighted;
        l_w += 0.5 * e * e;
        l_reg += 0.5 * delta * delta;
        dg[[s, 0]] = (-e + lambda * delta) / bf;
        if lambda != 0.0 {
            for a in 0..n {
                let r = s * n + a;
                dq[[r, b.actions[r]]] -= lambda * l.weights[a] * delta / bf;
            }
        }
    }
    l_w /= bf;
    l_reg /= bf;
    let total = l_w + l_theta + lambda * l_reg;

    let grad_theta = l.local_net.backward(&l.local.online, &td.cache, &dq)?;
    let (grad_w, _) = global.backward(l.aux_online(), &g_cache, &dg)?;
    Ok(StepOutput {
        report: LossReport {
            q_loss: Some(l_theta),
            global_loss: Some(l_w),
            consistency_loss: Some(l_reg),
            ..Default::default()
        },
        grads: vec![grad_theta, grad_w],
        objectives: vec![total, total],
        final_hidden: td.cache.final_hidden().cloned(),
        advantages: None,
    })
}
