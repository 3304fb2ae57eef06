use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// A named 2-D parameter tensor. Biases are stored as `1 x n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub value: Matrix,
}

/// Ordered collection of parameter tensors belonging to one network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix) {
        self.tensors.push(Tensor { name: name.into(), value });
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, i: usize) -> &Matrix {
        &self.tensors[i].value
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.tensors[i].value
    }

    pub fn shapes(&self) -> Vec<[usize; 2]> {
        self.tensors.iter().map(|t| [t.value.nrows(), t.value.ncols()]).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.iter().all(|x| x.is_finite()))
    }

    /// Scalar at flat index `idx`, counting tensors in order and entries
    /// row-major.
    pub fn scalar(&self, idx: usize) -> f64 {
        let (t, off) = self.locate(idx);
        let m = &self.tensors[t].value;
        m[[off / m.ncols(), off % m.ncols()]]
    }

    pub fn set_scalar(&mut self, idx: usize, value: f64) {
        let (t, off) = self.locate(idx);
        let m = &mut self.tensors[t].value;
        let cols = m.ncols();
        m[[off / cols, off % cols]] = value;
    }

    fn locate(&self, mut idx: usize) -> (usize, usize) {
        for (i, t) in self.tensors.iter().enumerate() {
            if idx < t.value.len() {
                return (i, idx);
            }
            idx -= t.value.len();
        }
        panic!("scalar index out of range");
    }

    /// Errors unless `other` has identical tensor names and shapes.
    pub fn check_same_layout(&self, other: &ParamSet, context: &str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch {
                context: format!("{context}: tensor count"),
                expected: vec![self.len()],
                actual: vec![other.len()],
            });
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.value.dim() != b.value.dim() || a.name != b.name {
                return Err(Error::ShapeMismatch {
                    context: format!("{context}: {} vs {}", a.name, b.name),
                    expected: a.value.shape().to_vec(),
                    actual: b.value.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

/// Gradients laid out like the [`ParamSet`] they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Matrix>);

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Self(params.tensors.iter().map(|t| Matrix::zeros(t.value.dim())).collect())
    }

    pub fn scalar(&self, mut idx: usize) -> f64 {
        for g in &self.0 {
            if idx < g.len() {
                return g[[idx / g.ncols(), idx % g.ncols()]];
            }
            idx -= g.len();
        }
        panic!("scalar index out of range");
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flat_map(|g| g.iter().copied()).collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.0 {
            g.mapv_inplace(|x| x * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.iter().all(|x| x.is_finite()))
    }
}

/// Uniform initialization in `[-b, b]` with `b = gain * sqrt(3 / fan_in)`.
pub fn kaiming_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize, gain: f64) -> Matrix {
    let bound = gain * (3.0 / fan_in as f64).sqrt();
    Matrix::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..=bound))
}

/// Entry-wise check that `m` has shape `(rows, cols)`.
pub(crate) fn expect_shape(m: &Matrix, rows: usize, cols: usize, context: &str) -> Result<()> {
    if m.dim() != (rows, cols) {
        return Err(Error::ShapeMismatch {
            context: context.to_string(),
            expected: vec![rows, cols],
            actual: m.shape().to_vec(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn flat_indexing_spans_tensors() {
        let mut p = ParamSet::new();
        p.push("a", array![[1.0, 2.0], [3.0, 4.0]]);
        p.push("b", array![[5.0, 6.0]]);
        assert_eq!(p.num_scalars(), 6);
        assert_eq!(p.scalar(4), 5.0);
        p.set_scalar(5, -1.0);
        assert_eq!(p.get(1)[[0, 1]], -1.0);
    }

    #[test]
    fn layout_check() {
        let mut a = ParamSet::new();
        a.push("w", Matrix::zeros((2, 3)));
        let mut b = ParamSet::new();
        b.push("w", Matrix::zeros((3, 2)));
        assert!(a.check_same_layout(&a.clone(), "t").is_ok());
        assert!(a.check_same_layout(&b, "t").is_err());
    }
}
