use super::params::{Gradients, Matrix, ParamSet};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam optimizer state for one [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = Gradients::zeros_like(params).0;
        Self { lr, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Matrix] {
        &self.m
    }

    /// One bias-corrected Adam step. A non-finite gradient leaves both the
    /// parameters and the moments untouched and returns an error.
    pub fn update(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        if grads.0.len() != params.len() || grads.0.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                context: "Adam gradient count".into(),
                expected: vec![params.len()],
                actual: vec![grads.0.len()],
            });
        }
        for (g, t) in grads.0.iter().zip(params.tensors()) {
            if g.dim() != t.value.dim() {
                return Err(Error::ShapeMismatch {
                    context: format!("Adam gradient for {}", t.name),
                    expected: t.value.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient; optimizer step rejected".into()));
        }
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        let lr = self.lr;
        for (i, g) in grads.0.iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            m.zip_mut_with(g, |m, &g| *m = BETA1 * *m + (1.0 - BETA1) * g);
            v.zip_mut_with(g, |v, &g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
            let p = params.get_mut(i);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / bc1) / ((v / bc2).sqrt() + EPSILON);
            });
        }
        Ok(())
    }
}

/// `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut ParamSet, online: &ParamSet, tau: f64) -> Result<()> {
    target.check_same_layout(online, "soft update")?;
    for i in 0..online.len() {
        target.get_mut(i).zip_mut_with(online.get(i), |t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
    Ok(())
}
