//! Monotonic mixing of per-agent values through state-conditioned
//! hypernetworks.
//!
//! ```text
//! W1 = |s H_w1 + b_w1|  (N x E)     b1 = s H_b1 + b_b1
//! h  = elu(q W1 + b1)
//! W2 = |s H_w2 + b_w2|  (E)         b2 = s H_b2 + b_b2
//! Q_tot = h · W2 + b2
//! ```

use ndarray::Axis;
use rand::Rng;

use super::config::LossReport;
use super::encoding::Batch;
use super::learner::{row_max, select, Learner, StepOutput};
use crate::error::{Error, Result};
use crate::neural::params::expect_shape;
use crate::neural::{kaiming_uniform, Gradients, Matrix, ParamSet};

const HW1: usize = 0;
const BW1: usize = 1;
const HB1: usize = 2;
const BB1: usize = 3;
const HW2: usize = 4;
const BW2: usize = 5;
const HB2: usize = 6;
const BB2: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixerSpec {
    pub state_dim: usize,
    pub agents: usize,
    pub embed: usize,
}

#[derive(Debug, Clone)]
pub struct MixerCache {
    state: Matrix,
    q: Matrix,
    a1: Matrix,
    a2: Matrix,
    pre: Matrix,
    h: Matrix,
    pub out: Matrix,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn col_sum(m: &Matrix) -> Matrix {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

impl MixerSpec {
    pub fn new(state_dim: usize, agents: usize, embed: usize) -> Self {
        Self { state_dim, agents, embed }
    }

    pub fn init<R: Rng + ?Sized>(&self, prefix: &str, rng: &mut R) -> ParamSet {
        let (s, n, e) = (self.state_dim, self.agents, self.embed);
        let mut p = ParamSet::new();
        p.push(format!("{prefix}.hyper_w1.weight"), kaiming_uniform(rng, s, n * e, 1.0));
        p.push(format!("{prefix}.hyper_w1.bias"), Matrix::zeros((1, n * e)));
        p.push(format!("{prefix}.hyper_b1.weight"), kaiming_uniform(rng, s, e, 1.0));
        p.push(format!("{prefix}.hyper_b1.bias"), Matrix::zeros((1, e)));
        p.push(format!("{prefix}.hyper_w2.weight"), kaiming_uniform(rng, s, e, 1.0));
        p.push(format!("{prefix}.hyper_w2.bias"), Matrix::zeros((1, e)));
        p.push(format!("{prefix}.hyper_b2.weight"), kaiming_uniform(rng, s, 1, 1.0));
        p.push(format!("{prefix}.hyper_b2.bias"), Matrix::zeros((1, 1)));
        p
    }

    pub fn check_params(&self, p: &ParamSet) -> Result<()> {
        let (s, n, e) = (self.state_dim, self.agents, self.embed);
        if p.len() != 8 {
            return Err(Error::ShapeMismatch { context: "mixer tensor count".into(), expected: vec![8], actual: vec![p.len()] });
        }
        for (i, rows, cols) in [(HW1, s, n * e), (BW1, 1, n * e), (HB1, s, e), (BB1, 1, e), (HW2, s, e), (BW2, 1, e), (HB2, s, 1), (BB2, 1, 1)] {
            expect_shape(p.get(i), rows, cols, "mixer tensor")?;
        }
        Ok(())
    }

    /// `state` is `B x S`, `q` is `B x N`; returns `B x 1` in the cache.
    pub fn forward(&self, p: &ParamSet, state: &Matrix, q: &Matrix) -> Result<MixerCache> {
        self.check_params(p)?;
        let b = state.nrows();
        expect_shape(state, b, self.state_dim, "mixer state")?;
        expect_shape(q, b, self.agents, "mixer agent values")?;
        let e = self.embed;
        let a1 = state.dot(p.get(HW1)) + p.get(BW1);
        let mut pre = state.dot(p.get(HB1)) + p.get(BB1);
        for s in 0..b {
            for n in 0..self.agents {
                let qn = q[[s, n]];
                for k in 0..e {
                    pre[[s, k]] += qn * a1[[s, n * e + k]].abs();
                }
            }
        }
        let h = pre.mapv(elu);
        let a2 = state.dot(p.get(HW2)) + p.get(BW2);
        let mut out = state.dot(p.get(HB2)) + p.get(BB2);
        for s in 0..b {
            out[[s, 0]] += (0..e).map(|k| h[[s, k]] * a2[[s, k]].abs()).sum::<f64>();
        }
        Ok(MixerCache { state: state.clone(), q: q.clone(), a1, a2, pre, h, out })
    }

    /// Gradients of the hypernetwork parameters and of the agent values.
    pub fn backward(&self, p: &ParamSet, c: &MixerCache, d_out: &Matrix) -> Result<(Gradients, Matrix)> {
        expect_shape(d_out, c.out.nrows(), 1, "mixer output gradient")?;
        let (b, n, e) = (c.out.nrows(), self.agents, self.embed);
        let mut da1 = Matrix::zeros(c.a1.dim());
        let mut da2 = Matrix::zeros(c.a2.dim());
        let mut dpre = Matrix::zeros(c.pre.dim());
        let mut dq = Matrix::zeros((b, n));
        for s in 0..b {
            let g = d_out[[s, 0]];
            for k in 0..e {
                let a2 = c.a2[[s, k]];
                if a2 != 0.0 {
                    da2[[s, k]] = g * c.h[[s, k]] * a2.signum();
                }
                dpre[[s, k]] = g * a2.abs() * elu_grad(c.pre[[s, k]]);
            }
            for a in 0..n {
                let qa = c.q[[s, a]];
                let mut acc = 0.0;
                for k in 0..e {
                    let a1 = c.a1[[s, a * e + k]];
                    acc += a1.abs() * dpre[[s, k]];
                    if a1 != 0.0 {
                        da1[[s, a * e + k]] = qa * dpre[[s, k]] * a1.signum();
                    }
                }
                dq[[s, a]] = acc;
            }
        }
        let st = c.state.t();
        let grads = Gradients(vec![
            st.dot(&da1),
            col_sum(&da1),
            st.dot(&dpre),
            col_sum(&dpre),
            st.dot(&da2),
            col_sum(&da2),
            st.dot(d_out),
            col_sum(d_out),
        ]);
        debug_assert_eq!(grads.0.len(), p.len());
        Ok((grads, dq))
    }

    /// Mixed value of a single sample.
    pub fn mix(&self, p: &ParamSet, state: &[f64], q: &[f64]) -> Result<f64> {
        let s = Matrix::from_shape_vec((1, state.len()), state.to_vec()).expect("row");
        let q = Matrix::from_shape_vec((1, q.len()), q.to_vec()).expect("row");
        Ok(self.forward(p, &s, &q)?.out[[0, 0]])
    }
}

pub(crate) fn compute(l: &Learner, b: &Batch) -> Result<StepOutput> {
    let n = b.agents;
    let samples = b.samples();
    let mixer = l.aux_net.as_ref().expect("mixer").mixer();
    let (q, cache) = l.local_forward(&l.local.online, &b.local_in, b)?;
    let (q_next, _) = l.local_forward(&l.local.target, &b.next_local_in, b)?;
    let q_sel = Matrix::from_shape_vec((samples, n), select(&q, &b.actions)).expect("B x N");
    let next_max = Matrix::from_shape_vec((samples, n), row_max(&q_next)).expect("B x N");

    let m_cache = mixer.forward(l.aux_online(), &b.state, &q_sel)?;
    let m_next = mixer.forward(l.aux_target(), &b.next_state, &next_max)?;
    let bf = samples as f64;
    let mut d_out = Matrix::zeros((samples, 1));
    let mut loss = 0.0;
    for s in 0..samples {
        let e = b.global_rewards[s] + l.config.gamma * m_next.out[[s, 0]] - m_cache.out[[s, 0]];
        loss += 0.5 * e * e;
        d_out[[s, 0]] = -e / bf;
    }
    loss /= bf;
    let (grad_mixer, dq_sel) = mixer.backward(l.aux_online(), &m_cache, &d_out)?;
    let mut dq = Matrix::zeros(q.dim());
    for s in 0..samples {
        for a in 0..n {
            let r = s * n + a;
            dq[[r, b.actions[r]]] = dq_sel[[s, a]];
        }
    }
    let grad_local = l.local_net.backward(&l.local.online, &cache, &dq)?;
    Ok(StepOutput {
        report: LossReport { q_loss: Some(loss), ..Default::default() },
        grads: vec![grad_local, grad_mixer],
        objectives: vec![loss, loss],
        final_hidden: cache.final_hidden().cloned(),
        advantages: None,
    })
}
