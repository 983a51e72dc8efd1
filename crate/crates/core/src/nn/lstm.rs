use rand::Rng;

use super::tensor::{matvec, matvec_backward, Param, Parameterized, Real, Tensor};
use super::NnError;

/// Standard LSTM cell with input, forget, cell and output gates (stacked in
/// that order in the weight rows).
#[derive(Debug, Clone)]
pub struct LstmCell<T> {
    pub w_input: Param<T>,
    pub w_hidden: Param<T>,
    pub bias: Param<T>,
}

/// Everything one step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct LstmStep<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<T>,
    tanh_c: Vec<T>,
    pub h: Vec<T>,
    pub c: Vec<T>,
}

#[inline]
fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Real> LstmCell<T> {
    /// Glorot weights, zero biases except the forget gate which starts at 1.
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(T::one());
        Self {
            w_input: Param::new(
                format!("{name}.w_input"),
                Tensor::glorot(&[4 * hidden, inputs], inputs, hidden, rng),
            ),
            w_hidden: Param::new(
                format!("{name}.w_hidden"),
                Tensor::glorot(&[4 * hidden, hidden], hidden, hidden, rng),
            ),
            bias: Param::new(format!("{name}.bias"), bias),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w_input.value.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.value.shape()[1]
    }

    pub fn zero_state(&self) -> (Vec<T>, Vec<T>) {
        (vec![T::zero(); self.hidden()], vec![T::zero(); self.hidden()])
    }

    pub fn forward(&self, x: &[T], h: &[T], c: &[T]) -> Result<LstmStep<T>, NnError> {
        let hd = self.hidden();
        if x.len() != self.inputs() || h.len() != hd || c.len() != hd {
            return Err(NnError::Shape {
                op: "lstm_forward",
                expected: vec![self.inputs(), hd, hd],
                found: vec![x.len(), h.len(), c.len()],
            });
        }
        let mut gates = self.bias.value.data().to_vec();
        matvec(self.w_input.value.data(), x, &mut gates);
        matvec(self.w_hidden.value.data(), h, &mut gates);
        let (ifg, o) = gates.split_at_mut(3 * hd);
        ifg[..2 * hd].iter_mut().for_each(|v| *v = sigmoid(*v));
        ifg[2 * hd..].iter_mut().for_each(|v| *v = v.tanh());
        o.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut c_new = vec![T::zero(); hd];
        let mut tanh_c = vec![T::zero(); hd];
        let mut h_new = vec![T::zero(); hd];
        for k in 0..hd {
            let (i, f, g, o) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
            c_new[k] = f * c[k] + i * g;
            tanh_c[k] = c_new[k].tanh();
            h_new[k] = o * tanh_c[k];
        }
        Ok(LstmStep {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            gates,
            tanh_c,
            h: h_new,
            c: c_new,
        })
    }

    /// Backpropagates `dL/dh` and `dL/dc` of this step's outputs. Accumulates
    /// parameter gradients and returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(&mut self, step: &LstmStep<T>, dh: &[T], dc: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>), NnError> {
        let hd = self.hidden();
        if dh.len() != hd || dc.len() != hd {
            return Err(NnError::Shape {
                op: "lstm_backward",
                expected: vec![hd, hd],
                found: vec![dh.len(), dc.len()],
            });
        }
        let mut da = vec![T::zero(); 4 * hd];
        let mut dc_prev = vec![T::zero(); hd];
        let one = T::one();
        for k in 0..hd {
            let g4 = &step.gates;
            let (i, f, g, o) = (g4[k], g4[hd + k], g4[2 * hd + k], g4[3 * hd + k]);
            let tc = step.tanh_c[k];
            let d_o = dh[k] * tc;
            let dct = dc[k] + dh[k] * o * (one - tc * tc);
            da[k] = dct * g * i * (one - i);
            da[hd + k] = dct * step.c_prev[k] * f * (one - f);
            da[2 * hd + k] = dct * i * (one - g * g);
            da[3 * hd + k] = d_o * o * (one - o);
            dc_prev[k] = dct * f;
        }
        for (b, &g) in self.bias.grad.data_mut().iter_mut().zip(&da) {
            *b += g;
        }
        let mut dx = vec![T::zero(); step.x.len()];
        let mut dh_prev = vec![T::zero(); hd];
        matvec_backward(self.w_input.value.data(), self.w_input.grad.data_mut(), &step.x, &da, &mut dx);
        matvec_backward(
            self.w_hidden.value.data(),
            self.w_hidden.grad.data_mut(),
            &step.h_prev,
            &da,
            &mut dh_prev,
        );
        Ok((dx, dh_prev, dc_prev))
    }
}

impl<T: Real> Parameterized<T> for LstmCell<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}
