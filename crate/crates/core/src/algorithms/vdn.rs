//! Value decomposition: `Q_tot = Σ_n Q_n(o_n, a_n)`.

use super::config::LossReport;
use super::encoding::Batch;
use super::learner::{row_max, select, Learner, StepOutput};
use crate::error::Result;
use crate::neural::Matrix;

/// Sum of per-agent values at the per-agent greedy actions.
pub fn greedy_sum(per_agent_q: &[[f64; 2]]) -> f64 {
    per_agent_q.iter().map(|q| q[0].max(q[1])).sum()
}

pub(crate) fn compute(l: &Learner, b: &Batch) -> Result<StepOutput> {
    let n = b.agents;
    let (q, cache) = l.local_forward(&l.local.online, &b.local_in, b)?;
    let (q_next, _) = l.local_forward(&l.local.target, &b.next_local_in, b)?;
    let q_sel = select(&q, &b.actions);
    let next_max = row_max(&q_next);
    let samples = b.samples() as f64;
    let mut dq = Matrix::zeros(q.dim());
    let mut loss = 0.0;
    for s in 0..b.samples() {
        let rows = s * n..(s + 1) * n;
        let q_tot: f64 = q_sel[rows.clone()].iter().sum();
        let y = b.global_rewards[s] + l.config.gamma * next_max[rows.clone()].iter().sum::<f64>();
        let e = y - q_tot;
        loss += 0.5 * e * e;
        for r in rows {
            dq[[r, b.actions[r]]] = -e / samples;
        }
    }
    loss /= samples;
    let grads = l.local_net.backward(&l.local.online, &cache, &dq)?;
    Ok(StepOutput {
        report: LossReport { q_loss: Some(loss), ..Default::default() },
        grads: vec![grads],
        objectives: vec![loss],
        final_hidden: cache.final_hidden().cloned(),
        advantages: None,
    })
}
