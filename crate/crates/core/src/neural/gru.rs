//! Single-layer GRU agent network: ReLU input embedding, GRU cell, linear
//! readout.

use ndarray::Axis;
use rand::Rng;

use super::activation::sigmoid;
use super::params::{expect_shape, kaiming_uniform, Gradients, Matrix, ParamSet};
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 64;

// Tensor order inside the ParamSet.
const W_IN: usize = 0;
const B_IN: usize = 1;
const W_Z: usize = 2;
const U_Z: usize = 3;
const B_Z: usize = 4;
const W_R: usize = 5;
const U_R: usize = 6;
const B_R: usize = 7;
const W_N: usize = 8;
const U_N: usize = 9;
const B_N: usize = 10;
const W_OUT: usize = 11;
const B_OUT: usize = 12;
const TENSORS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

/// Hidden state of a batch of streams, one row per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct GruState {
    pub hidden: Matrix,
}

impl GruState {
    pub fn zeros(streams: usize, hidden_dim: usize) -> Self {
        Self { hidden: Matrix::zeros((streams, hidden_dim)) }
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct GruStepCache {
    x: Matrix,
    e_pre: Matrix,
    e: Matrix,
    h_prev: Matrix,
    z: Matrix,
    r: Matrix,
    n: Matrix,
    rh: Matrix,
    h: Matrix,
}

/// Unrolled forward pass over a sequence.
#[derive(Debug, Clone)]
pub struct GruSeqCache {
    steps: Vec<GruStepCache>,
    pub outputs: Vec<Matrix>,
}

impl GruSeqCache {
    pub fn final_hidden(&self) -> Option<&Matrix> {
        self.steps.last().map(|s| &s.h)
    }

    /// Hidden state after each step.
    pub fn hidden_states(&self) -> impl Iterator<Item = &Matrix> {
        self.steps.iter().map(|s| &s.h)
    }
}

fn row_sum(m: &Matrix) -> Matrix {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

impl GruSpec {
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self { input_dim, hidden_dim, output_dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config(format!("GRU dimensions must be >= 1: {self:?}")));
        }
        Ok(())
    }

    pub fn init<R: Rng + ?Sized>(&self, prefix: &str, rng: &mut R) -> ParamSet {
        let (i, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let mut p = ParamSet::new();
        p.push(format!("{prefix}.in.weight"), kaiming_uniform(rng, i, h, 2f64.sqrt()));
        p.push(format!("{prefix}.in.bias"), Matrix::zeros((1, h)));
        for gate in ["z", "r", "n"] {
            p.push(format!("{prefix}.{gate}.w"), kaiming_uniform(rng, h, h, 1.0));
            p.push(format!("{prefix}.{gate}.u"), kaiming_uniform(rng, h, h, 1.0));
            p.push(format!("{prefix}.{gate}.bias"), Matrix::zeros((1, h)));
        }
        p.push(format!("{prefix}.out.weight"), kaiming_uniform(rng, h, o, 1.0));
        p.push(format!("{prefix}.out.bias"), Matrix::zeros((1, o)));
        p
    }

    pub fn check_params(&self, p: &ParamSet) -> Result<()> {
        let (i, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        if p.len() != TENSORS {
            return Err(Error::ShapeMismatch {
                context: "GRU tensor count".into(),
                expected: vec![TENSORS],
                actual: vec![p.len()],
            });
        }
        expect_shape(p.get(W_IN), i, h, "GRU input weight")?;
        expect_shape(p.get(B_IN), 1, h, "GRU input bias")?;
        for (w, u, b) in [(W_Z, U_Z, B_Z), (W_R, U_R, B_R), (W_N, U_N, B_N)] {
            expect_shape(p.get(w), h, h, "GRU gate weight")?;
            expect_shape(p.get(u), h, h, "GRU recurrent weight")?;
            expect_shape(p.get(b), 1, h, "GRU gate bias")?;
        }
        expect_shape(p.get(W_OUT), h, o, "GRU output weight")?;
        expect_shape(p.get(B_OUT), 1, o, "GRU output bias")
    }

    fn step_cached(&self, p: &ParamSet, x: &Matrix, h_prev: &Matrix) -> Result<(Matrix, GruStepCache)> {
        if x.ncols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                context: "GRU input".into(),
                expected: vec![x.nrows(), self.input_dim],
                actual: x.shape().to_vec(),
            });
        }
        expect_shape(h_prev, x.nrows(), self.hidden_dim, "GRU hidden state")?;
        let e_pre = x.dot(p.get(W_IN)) + p.get(B_IN);
        let e = e_pre.mapv(|v| v.max(0.0));
        let z = (e.dot(p.get(W_Z)) + h_prev.dot(p.get(U_Z)) + p.get(B_Z)).mapv(sigmoid);
        let r = (e.dot(p.get(W_R)) + h_prev.dot(p.get(U_R)) + p.get(B_R)).mapv(sigmoid);
        let rh = &r * h_prev;
        let n = (e.dot(p.get(W_N)) + rh.dot(p.get(U_N)) + p.get(B_N)).mapv(f64::tanh);
        let h = (1.0 - &z) * &n + &z * h_prev;
        let out = h.dot(p.get(W_OUT)) + p.get(B_OUT);
        let cache = GruStepCache { x: x.clone(), e_pre, e, h_prev: h_prev.clone(), z, r, n, rh, h };
        Ok((out, cache))
    }

    /// One recurrent step for a batch of streams.
    pub fn step(&self, p: &ParamSet, x: &Matrix, state: &GruState) -> Result<(Matrix, GruState)> {
        self.check_params(p)?;
        let (out, cache) = self.step_cached(p, x, &state.hidden)?;
        Ok((out, GruState { hidden: cache.h }))
    }

    pub fn forward_sequence(&self, p: &ParamSet, xs: &[Matrix], h0: &Matrix) -> Result<GruSeqCache> {
        self.check_params(p)?;
        let mut steps = Vec::with_capacity(xs.len());
        let mut outputs = Vec::with_capacity(xs.len());
        let mut h = h0.clone();
        for x in xs {
            let (out, cache) = self.step_cached(p, x, &h)?;
            h = cache.h.clone();
            steps.push(cache);
            outputs.push(out);
        }
        Ok(GruSeqCache { steps, outputs })
    }

    /// Backpropagation through time. Returns parameter gradients and the
    /// gradient with respect to the initial hidden state.
    pub fn backward_sequence(&self, p: &ParamSet, cache: &GruSeqCache, output_grads: &[Matrix]) -> Result<(Gradients, Matrix)> {
        if output_grads.len() != cache.steps.len() {
            return Err(Error::ShapeMismatch {
                context: "GRU sequence gradient length".into(),
                expected: vec![cache.steps.len()],
                actual: vec![output_grads.len()],
            });
        }
        let mut g = Gradients::zeros_like(p);
        let Some(first) = cache.steps.first() else {
            return Ok((g, Matrix::zeros((0, self.hidden_dim))));
        };
        let mut dh_next = Matrix::zeros(first.h_prev.dim());
        for (s, dout) in cache.steps.iter().zip(output_grads).rev() {
            expect_shape(dout, s.h.nrows(), self.output_dim, "GRU output gradient")?;
            g.0[W_OUT] += &s.h.t().dot(dout);
            g.0[B_OUT] += &row_sum(dout);
            let dh = dh_next + dout.dot(&p.get(W_OUT).t());

            let dn = &dh * &(1.0 - &s.z);
            let dz = &dh * &(&s.h_prev - &s.n);
            let mut dh_prev = &dh * &s.z;

            let dn_pre = dn * &s.n.mapv(|v| 1.0 - v * v);
            g.0[W_N] += &s.e.t().dot(&dn_pre);
            g.0[U_N] += &s.rh.t().dot(&dn_pre);
            g.0[B_N] += &row_sum(&dn_pre);
            let drh = dn_pre.dot(&p.get(U_N).t());
            let dr = &drh * &s.h_prev;
            dh_prev += &(&drh * &s.r);
            let mut de = dn_pre.dot(&p.get(W_N).t());

            let dz_pre = dz * &s.z.mapv(|v| v * (1.0 - v));
            g.0[W_Z] += &s.e.t().dot(&dz_pre);
            g.0[U_Z] += &s.h_prev.t().dot(&dz_pre);
            g.0[B_Z] += &row_sum(&dz_pre);
            dh_prev += &dz_pre.dot(&p.get(U_Z).t());
            de += &dz_pre.dot(&p.get(W_Z).t());

            let dr_pre = dr * &s.r.mapv(|v| v * (1.0 - v));
            g.0[W_R] += &s.e.t().dot(&dr_pre);
            g.0[U_R] += &s.h_prev.t().dot(&dr_pre);
            g.0[B_R] += &row_sum(&dr_pre);
            dh_prev += &dr_pre.dot(&p.get(U_R).t());
            de += &dr_pre.dot(&p.get(W_R).t());

            de.zip_mut_with(&s.e_pre, |d, &v| {
                if v <= 0.0 {
                    *d = 0.0
                }
            });
            g.0[W_IN] += &s.x.t().dot(&de);
            g.0[B_IN] += &row_sum(&de);
            dh_next = dh_prev;
        }
        Ok((g, dh_next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_halve_hidden_state() {
        let spec = GruSpec::new(2, 3, 2);
        let mut p = spec.init("g", &mut ChaCha8Rng::seed_from_u64(0));
        for i in 0..p.len() {
            p.get_mut(i).fill(0.0);
        }
        // z = r = 1/2 and n = 0, so h' = h / 2 and the readout is zero.
        let state = GruState { hidden: array![[1.0, -2.0, 0.5]] };
        let (out, next) = spec.step(&p, &array![[0.3, 0.7]], &state).unwrap();
        assert_eq!(next.hidden, array![[0.5, -1.0, 0.25]]);
        assert_eq!(out, array![[0.0, 0.0]]);
    }

    #[test]
    fn output_depends_on_carried_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = GruSpec::new(4, 8, 2);
        let p = spec.init("g", &mut rng);
        let x = Matrix::from_shape_fn((1, 4), |_| rng.random_range(-1.0..1.0));
        let a = spec.step(&p, &x, &GruState::zeros(1, 8)).unwrap().0;
        let h = GruState { hidden: Matrix::from_elem((1, 8), 0.7) };
        let b = spec.step(&p, &x, &h).unwrap().0;
        assert_ne!(a, b);
    }

    #[test]
    fn sequence_matches_repeated_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = GruSpec::new(3, 5, 2);
        let p = spec.init("g", &mut rng);
        let xs: Vec<Matrix> = (0..4).map(|_| Matrix::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0))).collect();
        let cache = spec.forward_sequence(&p, &xs, &Matrix::zeros((2, 5))).unwrap();
        let mut state = GruState::zeros(2, 5);
        for (x, out) in xs.iter().zip(&cache.outputs) {
            let (o, s) = spec.step(&p, x, &state).unwrap();
            assert_eq!(&o, out);
            state = s;
        }
        assert_eq!(cache.final_hidden().unwrap(), &state.hidden);
    }

    #[test]
    fn hidden_state_shape_checked() {
        let spec = GruSpec::new(3, 5, 2);
        let p = spec.init("g", &mut ChaCha8Rng::seed_from_u64(0));
        assert!(spec.step(&p, &Matrix::zeros((2, 3)), &GruState::zeros(1, 5)).is_err());
    }
}
