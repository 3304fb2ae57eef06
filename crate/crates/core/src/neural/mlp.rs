//! Fully connected networks with ReLU hidden layers.

use ndarray::Axis;
use rand::Rng;

use super::activation::softmax_rows;
use super::params::{expect_shape, kaiming_uniform, Gradients, Matrix, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub output: OutputActivation,
}

/// Activations retained by [`MlpSpec::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `activations[0]` is the input, the last entry the network output.
    activations: Vec<Matrix>,
    /// Pre-activation of every layer.
    pre: Vec<Matrix>,
}

impl MlpCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("non-empty cache")
    }

    pub fn into_output(mut self) -> Matrix {
        self.activations.pop().expect("non-empty cache")
    }
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        Self { input_dim, hidden, output_dim, output: OutputActivation::Identity }
    }

    pub fn with_output(mut self, output: OutputActivation) -> Self {
        self.output = output;
        self
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden);
        w.push(self.output_dim);
        w
    }

    pub fn layer_count(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths().contains(&0) {
            return Err(Error::Config(format!("MLP dimensions must be >= 1: {:?}", self.widths())));
        }
        Ok(())
    }

    /// Kaiming-uniform weights (ReLU gain on hidden layers), zero biases.
    pub fn init<R: Rng + ?Sized>(&self, prefix: &str, rng: &mut R) -> ParamSet {
        let widths = self.widths();
        let mut params = ParamSet::new();
        for l in 0..self.layer_count() {
            let gain = if l + 1 < self.layer_count() { 2f64.sqrt() } else { 1.0 };
            params.push(format!("{prefix}.l{l}.weight"), kaiming_uniform(rng, widths[l], widths[l + 1], gain));
            params.push(format!("{prefix}.l{l}.bias"), Matrix::zeros((1, widths[l + 1])));
        }
        params
    }

    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        let widths = self.widths();
        if params.len() != 2 * self.layer_count() {
            return Err(Error::ShapeMismatch {
                context: "MLP tensor count".into(),
                expected: vec![2 * self.layer_count()],
                actual: vec![params.len()],
            });
        }
        for l in 0..self.layer_count() {
            expect_shape(params.get(2 * l), widths[l], widths[l + 1], "MLP weight")?;
            expect_shape(params.get(2 * l + 1), 1, widths[l + 1], "MLP bias")?;
        }
        Ok(())
    }

    /// Batched forward pass; `input` has one sample per row.
    pub fn forward(&self, params: &ParamSet, input: &Matrix) -> Result<MlpCache> {
        self.check_params(params)?;
        if input.ncols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                context: "MLP input".into(),
                expected: vec![input.nrows(), self.input_dim],
                actual: input.shape().to_vec(),
            });
        }
        let layers = self.layer_count();
        let mut activations = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        activations.push(input.clone());
        for l in 0..layers {
            let z = activations[l].dot(params.get(2 * l)) + params.get(2 * l + 1);
            let a = if l + 1 < layers {
                z.mapv(|x| x.max(0.0))
            } else {
                match self.output {
                    OutputActivation::Identity => z.clone(),
                    OutputActivation::Softmax => softmax_rows(&z),
                }
            };
            pre.push(z);
            activations.push(a);
        }
        Ok(MlpCache { activations, pre })
    }

    /// Output only.
    pub fn predict(&self, params: &ParamSet, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward(params, input)?.into_output())
    }

    /// Reverse pass. Returns parameter gradients and the input gradient.
    pub fn backward(&self, params: &ParamSet, cache: &MlpCache, output_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        let out = cache.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::ShapeMismatch {
                context: "MLP output gradient".into(),
                expected: out.shape().to_vec(),
                actual: output_grad.shape().to_vec(),
            });
        }
        let mut delta = match self.output {
            OutputActivation::Identity => output_grad.clone(),
            OutputActivation::Softmax => {
                let dot = (output_grad * out).sum_axis(Axis(1)).insert_axis(Axis(1));
                out * &(output_grad - &dot)
            }
        };
        let mut grads = Gradients::zeros_like(params);
        for l in (0..self.layer_count()).rev() {
            grads.0[2 * l] = cache.activations[l].t().dot(&delta);
            grads.0[2 * l + 1] = delta.sum_axis(Axis(0)).insert_axis(Axis(0));
            let back = delta.dot(&params.get(2 * l).t());
            delta = if l > 0 {
                let mut d = back;
                d.zip_mut_with(&cache.pre[l - 1], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
                d
            } else {
                back
            };
        }
        Ok((grads, delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line single-sample evaluation, independent of the batched path.
    fn reference_forward(spec: &MlpSpec, params: &ParamSet, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..spec.layer_count() {
            let w = params.get(2 * l);
            let b = params.get(2 * l + 1);
            let mut z = vec![0.0; w.ncols()];
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = b[[0, j]];
                for (i, ai) in a.iter().enumerate() {
                    *zj += ai * w[[i, j]];
                }
            }
            a = if l + 1 < spec.layer_count() { z.iter().map(|v| v.max(0.0)).collect() } else { z };
        }
        a
    }

    #[test]
    fn zero_params_zero_output() {
        let spec = MlpSpec::new(3, vec![4], 2);
        let mut params = spec.init("m", &mut ChaCha8Rng::seed_from_u64(0));
        for i in 0..params.len() {
            params.get_mut(i).fill(0.0);
        }
        let out = spec.predict(&params, &array![[1.0, -2.0, 3.0]]).unwrap();
        assert_eq!(out, array![[0.0, 0.0]]);
    }

    #[test]
    fn identity_like_relu() {
        let spec = MlpSpec::new(1, vec![1], 1);
        let mut params = ParamSet::new();
        params.push("w0", array![[1.0]]);
        params.push("b0", array![[0.0]]);
        params.push("w1", array![[1.0]]);
        params.push("b1", array![[0.0]]);
        let out = spec.predict(&params, &array![[-2.0], [0.5], [3.0]]).unwrap();
        assert_eq!(out, array![[0.0], [0.5], [3.0]]);
    }

    #[test]
    fn batched_forward_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = MlpSpec::new(5, vec![8, 6], 3);
        let params = spec.init("m", &mut rng);
        let x = Matrix::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        let out = spec.predict(&params, &x).unwrap();
        for r in 0..4 {
            let expected = reference_forward(&spec, &params, x.row(r).as_slice().unwrap());
            for (c, e) in expected.iter().enumerate() {
                assert!((out[[r, c]] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec::new(3, vec![4], 2);
        let params = spec.init("m", &mut rng);
        let x = Matrix::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let cache = spec.forward(&params, &x).unwrap();
        let (g, dx) = spec.backward(&params, &cache, &Matrix::zeros((2, 2))).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_least_squares_gradient() {
        // No hidden layer: y = x w + b, L = 1/2 sum (y - t)^2.
        let spec = MlpSpec::new(2, vec![], 1);
        let mut params = ParamSet::new();
        params.push("w", array![[0.5], [-1.0]]);
        params.push("b", array![[0.25]]);
        let x = array![[1.0, 2.0], [3.0, -1.0]];
        let t = array![[1.0], [0.0]];
        let cache = spec.forward(&params, &x).unwrap();
        let resid = cache.output() - &t;
        let (g, _) = spec.backward(&params, &cache, &resid).unwrap();
        let expected_w = x.t().dot(&resid);
        assert_eq!(g.0[0], expected_w);
        assert_eq!(g.0[1][[0, 0]], resid.sum());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let spec = MlpSpec::new(3, vec![4], 2);
        let params = spec.init("m", &mut ChaCha8Rng::seed_from_u64(0));
        assert!(spec.forward(&params, &Matrix::zeros((1, 2))).is_err());
        let other = MlpSpec::new(3, vec![5], 2);
        assert!(other.forward(&params, &Matrix::zeros((1, 3))).is_err());
    }
}
