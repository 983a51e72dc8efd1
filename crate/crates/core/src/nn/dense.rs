use rand::Rng;

use super::tensor::{matvec, matvec_backward, Param, Parameterized, Real, Tensor};
use super::NnError;

/// Fully connected layer `y = W x + b`, `W` of shape `[out, in]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Real> Dense<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::glorot(&[outputs, inputs], inputs, outputs, rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[outputs])),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    fn check(&self, op: &'static str, x: &[T]) -> Result<(), NnError> {
        if x.len() == self.inputs() {
            Ok(())
        } else {
            Err(NnError::Shape {
                op,
                expected: vec![self.inputs()],
                found: vec![x.len()],
            })
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        self.check("dense_forward", x)?;
        let mut y = self.bias.value.data().to_vec();
        matvec(self.weight.value.data(), x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[T], dy: &[T]) -> Result<Vec<T>, NnError> {
        self.check("dense_backward", x)?;
        if dy.len() != self.outputs() {
            return Err(NnError::Shape {
                op: "dense_backward",
                expected: vec![self.outputs()],
                found: vec![dy.len()],
            });
        }
        let mut dx = vec![T::zero(); x.len()];
        matvec_backward(self.weight.value.data(), self.weight.grad.data_mut(), x, dy, &mut dx);
        for (b, &g) in self.bias.grad.data_mut().iter_mut().zip(dy) {
            *b += g;
        }
        Ok(dx)
    }
}

impl<T: Real> Parameterized<T> for Dense<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub fn tanh_forward<T: Real>(x: &mut [T]) {
    x.iter_mut().for_each(|v| *v = v.tanh());
}

/// Gradient through `tanh` given its output `y`.
pub fn tanh_backward<T: Real>(y: &[T], dy: &mut [T]) {
    for (g, &v) in dy.iter_mut().zip(y) {
        *g *= T::one() - v * v;
    }
}

pub fn relu_forward<T: Real>(x: &mut [T]) {
    x.iter_mut().for_each(|v| {
        if *v < T::zero() {
            *v = T::zero()
        }
    });
}

/// Gradient through ReLU given its output `y`.
pub fn relu_backward<T: Real>(y: &[T], dy: &mut [T]) {
    for (g, &v) in dy.iter_mut().zip(y) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Learned lookup table, one row per token id.
#[derive(Debug, Clone)]
pub struct Embedding<T> {
    pub table: Param<T>,
}

impl<T: Real> Embedding<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            table: Param::new(format!("{name}.table"), Tensor::glorot(&[vocab, dim], vocab, dim, rng)),
        }
    }

    pub fn vocab(&self) -> usize {
        self.table.value.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.value.shape()[1]
    }

    pub fn lookup(&self, id: usize) -> Result<&[T], NnError> {
        if id >= self.vocab() {
            return Err(NnError::OutOfVocabulary { id, vocab: self.vocab() });
        }
        let d = self.dim();
        Ok(&self.table.value.data()[id * d..(id + 1) * d])
    }

    pub fn backward(&mut self, id: usize, dy: &[T]) {
        let d = self.dim();
        for (g, &v) in self.table.grad.data_mut()[id * d..(id + 1) * d].iter_mut().zip(dy) {
            *g += v;
        }
    }
}

impl<T: Real> Parameterized<T> for Embedding<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.table]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.table]
    }
}
