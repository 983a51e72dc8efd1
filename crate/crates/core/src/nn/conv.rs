use rand::Rng;

use super::dense::{relu_backward, relu_forward};
use super::tensor::{axpy, dot, Param, Parameterized, Real, Tensor};
use super::NnError;

/// 3x3 convolution, stride 1, zero "same" padding, over `[channels, h, w]`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::glorot(&[out_ch, in_ch, 3, 3], in_ch * 9, out_ch * 9, rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[out_ch])),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    fn dims(&self, op: &'static str, x: &Tensor<T>) -> Result<(usize, usize), NnError> {
        match x.shape() {
            [c, h, w] if *c == self.in_channels() => Ok((*h, *w)),
            other => Err(NnError::Shape {
                op,
                expected: vec![self.in_channels(), 0, 0],
                found: other.to_vec(),
            }),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (h, w) = self.dims("conv2d_forward", x)?;
        let (ic_n, oc_n) = (self.in_channels(), self.out_channels());
        let plane = h * w;
        let taps = ic_n * 9;
        let col = im2col(x.data(), ic_n, h, w);
        let mut out = Tensor::zeros(&[oc_n, h, w]);
        let wt = self.weight.value.data();
        let od = out.data_mut();
        for oc in 0..oc_n {
            let dst = &mut od[oc * plane..(oc + 1) * plane];
            dst.fill(self.bias.value.data()[oc]);
            for (k, row) in col.chunks_exact(plane).enumerate() {
                axpy(wt[oc * taps + k], row, dst);
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (h, w) = self.dims("conv2d_backward", x)?;
        let (ic_n, oc_n) = (self.in_channels(), self.out_channels());
        dy.expect_shape("conv2d_backward", &[oc_n, h, w])?;
        let plane = h * w;
        let taps = ic_n * 9;
        let col = im2col(x.data(), ic_n, h, w);
        let mut dcol = vec![T::zero(); col.len()];
        let wt = self.weight.value.data();
        let dw = self.weight.grad.data_mut();
        let db = self.bias.grad.data_mut();
        for (oc, g) in dy.data().chunks_exact(plane).enumerate() {
            db[oc] += g.iter().copied().sum::<T>();
            for (k, (row, drow)) in col.chunks_exact(plane).zip(dcol.chunks_exact_mut(plane)).enumerate() {
                dw[oc * taps + k] += dot(row, g);
                axpy(wt[oc * taps + k], g, drow);
            }
        }
        let mut dx = Tensor::zeros(x.shape());
        col2im(&dcol, dx.data_mut(), ic_n, h, w);
        Ok(dx)
    }
}

impl<T: Real> Parameterized<T> for Conv2d<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Valid output range `[lo, hi)` along one axis for kernel tap offset `k - 1`.
#[inline]
fn tap_range(k: usize, len: usize) -> (usize, usize) {
    match k {
        0 => (1, len),
        1 => (0, len),
        _ => (0, len.saturating_sub(1)),
    }
}

/// Unrolls every 3x3 neighbourhood: row `(ic * 3 + ky) * 3 + kx` holds
/// `x[ic][y + ky - 1][x + kx - 1]` for each output cell, zero outside the image.
fn im2col<T: Real>(x: &[T], channels: usize, h: usize, w: usize) -> Vec<T> {
    let plane = h * w;
    let mut col = vec![T::zero(); channels * 9 * plane];
    for (k, row) in col.chunks_exact_mut(plane).enumerate() {
        let (ic, ky, kx) = (k / 9, k / 3 % 3, k % 3);
        let src = &x[ic * plane..(ic + 1) * plane];
        let (y0, y1) = tap_range(ky, h);
        let (x0, x1) = tap_range(kx, w);
        if x0 >= x1 {
            continue;
        }
        for y in y0..y1 {
            let sy = y + ky - 1;
            row[y * w + x0..y * w + x1].copy_from_slice(&src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1]);
        }
    }
    col
}

/// Adjoint of [`im2col`]: adds each unrolled entry back onto its source cell.
fn col2im<T: Real>(col: &[T], dx: &mut [T], channels: usize, h: usize, w: usize) {
    let plane = h * w;
    for (k, row) in col.chunks_exact(plane).enumerate().take(channels * 9) {
        let (ic, ky, kx) = (k / 9, k / 3 % 3, k % 3);
        let dst = &mut dx[ic * plane..(ic + 1) * plane];
        let (y0, y1) = tap_range(ky, h);
        let (x0, x1) = tap_range(kx, w);
        if x0 >= x1 {
            continue;
        }
        for y in y0..y1 {
            let sy = y + ky - 1;
            axpy(T::one(), &row[y * w + x0..y * w + x1], &mut dst[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1]);
        }
    }
}

/// 2x2 max-pooling with stride 2. Odd trailing rows/columns are dropped.
pub fn max_pool_forward<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>), NnError> {
    let (c, h, w) = match x.shape() {
        [c, h, w] if *h >= 2 && *w >= 2 => (*c, *h, *w),
        other => {
            return Err(NnError::Shape {
                op: "max_pool",
                expected: vec![0, 2, 2],
                found: other.to_vec(),
            })
        }
    };
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut arg = vec![0usize; c * oh * ow];
    let xd = x.data();
    let od = out.data_mut();
    for ch in 0..c {
        for y in 0..oh {
            for xx in 0..ow {
                let base = ch * h * w + 2 * y * w + 2 * xx;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if xd[cand] > xd[best] {
                        best = cand;
                    }
                }
                let o = (ch * oh + y) * ow + xx;
                od[o] = xd[best];
                arg[o] = best;
            }
        }
    }
    Ok((out, arg))
}

pub fn max_pool_backward<T: Real>(dy: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor<T>, NnError> {
    if dy.len() != argmax.len() {
        return Err(NnError::Shape {
            op: "max_pool_backward",
            expected: vec![argmax.len()],
            found: dy.shape().to_vec(),
        });
    }
    let mut dx = Tensor::zeros(input_shape);
    let dxd = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(dy.data()) {
        dxd[i] += g;
    }
    Ok(dx)
}

/// Conv 3x3 -> ReLU -> max-pool 2x2.
#[derive(Debug, Clone)]
pub struct ConvBlock<T> {
    pub conv: Conv2d<T>,
}

/// Intermediates of [`ConvBlock::forward`] needed by the backward pass.
#[derive(Debug, Clone)]
pub struct ConvBlockCache<T> {
    input: Tensor<T>,
    activated: Tensor<T>,
    argmax: Vec<usize>,
}

impl<T: Real> ConvBlock<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        Self {
            conv: Conv2d::new(name, in_ch, out_ch, rng),
        }
    }

    pub fn forward(&self, x: Tensor<T>) -> Result<(Tensor<T>, ConvBlockCache<T>), NnError> {
        let mut a = self.conv.forward(&x)?;
        relu_forward(a.data_mut());
        let (out, argmax) = max_pool_forward(&a)?;
        Ok((
            out,
            ConvBlockCache {
                input: x,
                activated: a,
                argmax,
            },
        ))
    }

    pub fn backward(&mut self, cache: &ConvBlockCache<T>, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut da = max_pool_backward(dy, &cache.argmax, cache.activated.shape())?;
        relu_backward(cache.activated.data(), da.data_mut());
        self.conv.backward(&cache.input, &da)
    }
}

impl<T: Real> Parameterized<T> for ConvBlock<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.conv.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.conv.params_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_input_with_unit_sum_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2d::<f64>::new("c", 1, 1, &mut rng);
        conv.weight.value.fill(1.0 / 9.0);
        let x = Tensor::from_vec(&[1, 6, 8], vec![2.5; 48]).unwrap();
        let y = conv.forward(&x).unwrap();
        for r in 1..5 {
            for c in 1..7 {
                assert!((y.data()[r * 8 + c] - 2.5).abs() < 1e-12);
            }
        }
        // corners see 4 of 9 taps
        assert!((y.data()[0] - 2.5 * 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn pool_picks_maxima() {
        let x = Tensor::from_vec(&[1, 2, 4], vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 9.0, 1.0]).unwrap();
        let (y, arg) = max_pool_forward(&x).unwrap();
        assert_eq!(y.data(), &[5.0, 9.0]);
        assert_eq!(arg, vec![1, 6]);
        let dx = max_pool_backward(&Tensor::from_vec(&[1, 1, 2], vec![1.0, 2.0]).unwrap(), &arg, x.shape()).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn channel_mismatch_names_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f32>::new("c", 2, 4, &mut rng);
        let err = conv.forward(&Tensor::zeros(&[3, 4, 4])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[3, 4, 4]") && msg.contains("[2, 0, 0]"), "{msg}");
        assert!(max_pool_forward(&Tensor::<f32>::zeros(&[1, 1, 4])).is_err());
    }
}
