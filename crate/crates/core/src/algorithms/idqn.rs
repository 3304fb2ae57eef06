//! Independent Q-learning with a parameter-shared local network.

use super::config::LossReport;
use super::encoding::Batch;
use super::learner::{row_argmax, row_max, select, Learner, StepOutput};
use crate::error::Result;
use crate::neural::{AgentNetCache, Matrix};

/// Forward pieces of the per-agent TD loss shared with QCOMBO.
pub(crate) struct LocalTd {
    pub q: Matrix,
    pub cache: AgentNetCache,
    /// `Q(o, a)` per row.
    pub q_sel: Vec<f64>,
    /// `r + γ max_a Q_target(o', a)` per row.
    pub target: Vec<f64>,
    /// Greedy next actions of the target local network.
    pub next_greedy: Vec<usize>,
}

pub(crate) fn local_td(l: &Learner, b: &Batch) -> Result<LocalTd> {
    let (q, cache) = l.local_forward(&l.local.online, &b.local_in, b)?;
    let (q_next, _) = l.local_forward(&l.local.target, &b.next_local_in, b)?;
    let gamma = l.config.gamma;
    let target = row_max(&q_next).iter().zip(&b.rewards).map(|(m, r)| r + gamma * m).collect();
    Ok(LocalTd { q_sel: select(&q, &b.actions), next_greedy: row_argmax(&q_next), q, cache, target })
}

/// `1/(BN) Σ ½(y - q)²` and its gradient with respect to the Q outputs.
pub(crate) fn local_loss(td: &LocalTd, actions: &[usize]) -> (f64, Matrix) {
    let rows = td.q_sel.len() as f64;
    let mut dq = Matrix::zeros(td.q.dim());
    let mut loss = 0.0;
    for (r, (&y, &q)) in td.target.iter().zip(&td.q_sel).enumerate() {
        let e = y - q;
        loss += 0.5 * e * e;
        dq[[r, actions[r]]] = -e / rows;
    }
    (loss / rows, dq)
}

pub(crate) fn compute(l: &Learner, b: &Batch) -> Result<StepOutput> {
    let td = local_td(l, b)?;
    let (loss, dq) = local_loss(&td, &b.actions);
    let grads = l.local_net.backward(&l.local.online, &td.cache, &dq)?;
    Ok(StepOutput {
        report: LossReport { q_loss: Some(loss), ..Default::default() },
        grads: vec![grads],
        objectives: vec![loss],
        final_hidden: td.cache.final_hidden().cloned(),
        advantages: None,
    })
}
