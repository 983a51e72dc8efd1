use rand::Rng;

use crate::nn::{tanh_backward, tanh_forward, ConvBlock, ConvBlockCache, Dense, Embedding, LstmCell, LstmStep, NnError, Param, Parameterized, Real, Tensor};
use crate::saliency::SaliencyMap;
use crate::subtitle::TokenId;

/// Convolutional saliency encoder: a stack of conv(3x3) + ReLU + pool(2x2)
/// stages, flattened into a dense layer with `tanh` output.
#[derive(Debug, Clone)]
pub struct SaliencyEncoder<T> {
    pub blocks: Vec<ConvBlock<T>>,
    pub dense: Dense<T>,
    width: usize,
    height: usize,
}

#[derive(Debug, Clone)]
pub struct SaliencyCache<T> {
    blocks: Vec<ConvBlockCache<T>>,
    pooled_shape: Vec<usize>,
    flat: Vec<T>,
    pub out: Vec<T>,
}

impl<T: Real> SaliencyEncoder<T> {
    pub fn new<R: Rng + ?Sized>(channels: &[usize], width: usize, height: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut blocks = Vec::with_capacity(channels.len());
        let mut in_ch = 1;
        for (i, &c) in channels.iter().enumerate() {
            blocks.push(ConvBlock::new(&format!("saliency.conv{}", i + 1), in_ch, c, rng));
            in_ch = c;
        }
        let shrink = 1 << channels.len();
        let flat = in_ch * (width / shrink) * (height / shrink);
        Self {
            blocks,
            dense: Dense::new("saliency.dense", flat, out_dim, rng),
            width,
            height,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.dense.outputs()
    }

    pub fn map_tensor(&self, map: &SaliencyMap) -> Result<Tensor<T>, NnError> {
        if map.width() != self.width || map.height() != self.height {
            return Err(NnError::Shape {
                op: "encode_saliency",
                expected: vec![self.height, self.width],
                found: vec![map.height(), map.width()],
            });
        }
        Tensor::from_vec(
            &[1, self.height, self.width],
            map.values().iter().map(|&v| T::lit(v)).collect(),
        )
    }

    pub fn forward(&self, input: Tensor<T>) -> Result<SaliencyCache<T>, NnError> {
        let mut x = input;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, cache) = b.forward(x)?;
            caches.push(cache);
            x = y;
        }
        let pooled_shape = x.shape().to_vec();
        let flat = x.into_data();
        let mut out = self.dense.forward(&flat)?;
        tanh_forward(&mut out);
        Ok(SaliencyCache {
            blocks: caches,
            pooled_shape,
            flat,
            out,
        })
    }

    pub fn encode(&self, map: &SaliencyMap) -> Result<Vec<T>, NnError> {
        Ok(self.forward(self.map_tensor(map)?)?.out)
    }

    /// Accumulates parameter gradients; returns `dL/d(map)` as `[1, H, W]`.
    pub fn backward(&mut self, cache: &SaliencyCache<T>, d_out: &[T]) -> Result<Tensor<T>, NnError> {
        let mut d = d_out.to_vec();
        tanh_backward(&cache.out, &mut d);
        let d_flat = self.dense.backward(&cache.flat, &d)?;
        let mut dx = Tensor::from_vec(&cache.pooled_shape, d_flat)?;
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            dx = b.backward(c, &dx)?;
        }
        Ok(dx)
    }
}

impl<T: Real> Parameterized<T> for SaliencyEncoder<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v: Vec<&Param<T>> = self.blocks.iter().flat_map(|b| b.params()).collect();
        v.extend(self.dense.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v: Vec<&mut Param<T>> = self.blocks.iter_mut().flat_map(|b| b.params_mut()).collect();
        v.extend(self.dense.params_mut());
        v
    }
}

/// Recurrent navigation encoder: token embeddings rolled through a stack of
/// LSTM layers; the last hidden state is projected to `k_n` with `tanh`.
/// An empty token list encodes to the zero vector without running the stack.
#[derive(Debug, Clone)]
pub struct NavigationEncoder<T> {
    pub embedding: Embedding<T>,
    pub layers: Vec<LstmCell<T>>,
    pub dense: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct NavigationCache<T> {
    ids: Vec<usize>,
    /// `steps[layer][token]`
    steps: Vec<Vec<LstmStep<T>>>,
    pub out: Vec<T>,
}

impl<T: Real> NavigationEncoder<T> {
    pub fn new<R: Rng + ?Sized>(vocab: usize, embed: usize, layers: usize, units: usize, out_dim: usize, rng: &mut R) -> Self {
        // Row 0 is the reserved "no navigation" id and is never looked up.
        let embedding = Embedding::new("navigation.embedding", vocab + 1, embed, rng);
        let layers = (0..layers)
            .map(|i| {
                let inp = if i == 0 { embed } else { units };
                LstmCell::new(&format!("navigation.lstm{}", i + 1), inp, units, rng)
            })
            .collect();
        Self {
            embedding,
            layers,
            dense: Dense::new("navigation.dense", units, out_dim, rng),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.dense.outputs()
    }

    pub fn vocab(&self) -> usize {
        self.embedding.vocab() - 1
    }

    /// Returns `None` for an empty token list (zero feature, nothing to
    /// backpropagate).
    pub fn forward(&self, tokens: &[TokenId]) -> Result<Option<NavigationCache<T>>, NnError> {
        if tokens.is_empty() {
            return Ok(None);
        }
        let ids: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
        let mut inputs: Vec<Vec<T>> = Vec::with_capacity(ids.len());
        for &id in &ids {
            if id == 0 {
                return Err(NnError::OutOfVocabulary { id, vocab: self.vocab() });
            }
            inputs.push(self.embedding.lookup(id)?.to_vec());
        }
        let mut steps = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (mut h, mut c) = layer.zero_state();
            let mut layer_steps = Vec::with_capacity(inputs.len());
            for x in &inputs {
                let s = layer.forward(x, &h, &c)?;
                h = s.h.clone();
                c = s.c.clone();
                layer_steps.push(s);
            }
            inputs = layer_steps.iter().map(|s| s.h.clone()).collect();
            steps.push(layer_steps);
        }
        let last = inputs.last().expect("non-empty token list");
        let mut out = self.dense.forward(last)?;
        tanh_forward(&mut out);
        Ok(Some(NavigationCache { ids, steps, out }))
    }

    pub fn encode(&self, tokens: &[TokenId]) -> Result<Vec<T>, NnError> {
        Ok(match self.forward(tokens)? {
            Some(c) => c.out,
            None => vec![T::zero(); self.out_dim()],
        })
    }

    pub fn backward(&mut self, cache: &NavigationCache<T>, d_out: &[T]) -> Result<(), NnError> {
        let mut d = d_out.to_vec();
        tanh_backward(&cache.out, &mut d);
        let last_layer = cache.steps.last().expect("at least one layer");
        let last_h = &last_layer.last().expect("non-empty").h;
        let dh_top = self.dense.backward(last_h, &d)?;
        let len = cache.ids.len();
        // Gradient w.r.t. each layer's outputs, starting from the top.
        let mut d_outputs: Vec<Vec<T>> = vec![vec![T::zero(); dh_top.len()]; len];
        d_outputs[len - 1] = dh_top;
        for (layer, steps) in self.layers.iter_mut().zip(&cache.steps).rev() {
            let hd = layer.hidden();
            let (mut dh_next, mut dc_next) = (vec![T::zero(); hd], vec![T::zero(); hd]);
            let mut d_inputs = Vec::with_capacity(len);
            for (s, d_o) in steps.iter().zip(&d_outputs).rev() {
                let dh: Vec<T> = d_o.iter().zip(&dh_next).map(|(a, b)| *a + *b).collect();
                let (dx, dh_prev, dc_prev) = layer.backward(s, &dh, &dc_next)?;
                d_inputs.push(dx);
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
            d_inputs.reverse();
            d_outputs = d_inputs;
        }
        for (&id, d) in cache.ids.iter().zip(&d_outputs) {
            self.embedding.backward(id, d);
        }
        Ok(())
    }
}

impl<T: Real> Parameterized<T> for NavigationEncoder<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.embedding.params();
        v.extend(self.layers.iter().flat_map(|l| l.params()));
        v.extend(self.dense.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.embedding.params_mut();
        v.extend(self.layers.iter_mut().flat_map(|l| l.params_mut()));
        v.extend(self.dense.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SphericalCoord;
    use crate::saliency::{per_user_map, SaliencyConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn saliency_encoding_is_deterministic_and_zero_at_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SaliencyConfig::new(0.3, 16, 8).unwrap();
        let map = per_user_map(&SphericalCoord::new(1.0, 1.2).unwrap(), &cfg);
        let mut enc = SaliencyEncoder::<f32>::new(&[2, 3], 16, 8, 4, &mut rng);
        assert_eq!(enc.encode(&map).unwrap(), enc.encode(&map.clone()).unwrap());
        enc.params_mut().into_iter().for_each(|p| p.value.fill(0.0));
        assert_eq!(enc.encode(&map).unwrap(), vec![0.0; 4]);
        let wrong = per_user_map(&SphericalCoord::new(1.0, 1.2).unwrap(), &SaliencyConfig::new(0.3, 8, 4).unwrap());
        assert!(enc.encode(&wrong).is_err());
    }

    #[test]
    fn navigation_empty_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let enc = NavigationEncoder::<f64>::new(5, 4, 2, 6, 3, &mut rng);
        assert_eq!(enc.encode(&[]).unwrap(), vec![0.0; 3]);
        assert_ne!(enc.encode(&[1, 2]).unwrap(), enc.encode(&[2, 1]).unwrap());
        assert!(enc.encode(&[6]).is_err());
        assert!(enc.encode(&[0]).is_err());
    }

    #[test]
    fn navigation_single_token_with_zero_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut enc = NavigationEncoder::<f64>::new(3, 2, 1, 3, 2, &mut rng);
        enc.layers[0].w_hidden.value.fill(0.0);
        // With h0 = c0 = 0 a single step depends on the input transform only,
        // so it must match a hand-rolled gate evaluation.
        let x = enc.embedding.lookup(2).unwrap().to_vec();
        let cell = &enc.layers[0];
        let hd = 3;
        let mut pre = cell.bias.value.data().to_vec();
        for (r, p) in pre.iter_mut().enumerate() {
            *p += (0..2).map(|c| cell.w_input.value.data()[r * 2 + c] * x[c]).sum::<f64>();
        }
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let h: Vec<f64> = (0..hd)
            .map(|k| sig(pre[3 * hd + k]) * (sig(pre[k]) * pre[2 * hd + k].tanh()).tanh())
            .collect();
        let mut expected = enc.dense.forward(&h).unwrap();
        expected.iter_mut().for_each(|v| *v = v.tanh());
        let got = enc.encode(&[2]).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
