use super::tensor::{Param, Real, Tensor};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates. Moments are created lazily on
/// the first step and bound to the parameter order of that call.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<(), NnError> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(NnError::Shape {
                op: "adam_step",
                expected: vec![self.first.len()],
                found: vec![params.len()],
            });
        }
        for (p, m) in params.iter().zip(&self.first) {
            p.grad.expect_shape("adam_step", m.shape())?;
        }
        self.step += 1;
        let c = self.config;
        let k = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(k);
        let bc2 = 1.0 - c.beta2.powi(k);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let (inv_bc1, inv_bc2) = (T::lit(1.0 / bc1), T::lit(1.0 / bc2));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grads = p.grad.data().to_vec();
            let values = p.value.data_mut();
            for (((w, &g), mi), vi) in values
                .iter_mut()
                .zip(&grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + one_b1 * g;
                *vi = b2 * *vi + one_b2 * g * g;
                let m_hat = *mi * inv_bc1;
                let v_hat = *vi * inv_bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Param<f64> {
        Param::new("w", Tensor::from_vec(&[1], vec![v]).unwrap())
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = scalar(0.7);
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut [&mut p]).unwrap();
        assert_eq!(p.value.data()[0], 0.7);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(1.0);
        p.grad.fill(1.0);
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut [&mut p]).unwrap();
        // m_hat = v_hat = 1 after bias correction
        let expected = 1.0 - 1e-3 / (1.0 + 1e-8);
        assert!((p.value.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_parabola() {
        let mut p = scalar(1.0);
        let mut opt = Adam::new(AdamConfig::default());
        let mut prev = 1.0f64;
        for _ in 0..100 {
            let w = p.value.data()[0];
            p.grad.fill(2.0 * w);
            opt.step(&mut [&mut p]).unwrap();
            let now = p.value.data()[0].abs();
            assert!(now < prev);
            prev = now;
        }
        // constant-sign gradients move by about lr per step
        assert!((prev - 0.9).abs() < 2e-3, "{prev}");
    }

    #[test]
    fn parameter_list_must_stay_fixed() {
        let (mut a, mut b) = (scalar(1.0), scalar(2.0));
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut [&mut a]).unwrap();
        assert!(opt.step(&mut [&mut a, &mut b]).is_err());
    }
}
