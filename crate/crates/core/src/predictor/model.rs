use std::io::{Read, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::SphericalCoord;
use crate::nn::checkpoint::{load_params, read_checkpoint, write_checkpoint};
use crate::nn::{mse_slices, Dense, LstmCell, LstmStep, NnError, Param, Parameterized, Real};
use crate::saliency::SaliencyMap;
use crate::subtitle::TokenId;

use super::encoders::{NavigationEncoder, SaliencyEncoder};
use super::features::{FeatureVector, Frame};
use super::{ModelConfig, PredictorError, Variant};

/// Predicted viewport centers for the `n` steps after a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub coords: Vec<SphericalCoord>,
    pub latency_ms: f64,
}

/// One input timestep of a training window. `map` and `tokens` index into the
/// owning [`Batch`]; `tokens` is `None` when no navigation phrase is shown.
#[derive(Debug, Clone)]
pub struct BatchStep {
    pub map: usize,
    pub indicator: bool,
    pub tokens: Option<usize>,
    pub coord: SphericalCoord,
}

#[derive(Debug, Clone)]
pub struct BatchWindow {
    pub steps: Vec<BatchStep>,
    pub target: Vec<SphericalCoord>,
    /// `teacher[j]`: feed the true coordinate `j` (rather than the model's own
    /// output) as decoder input `j + 1`. Missing entries mean closed loop.
    pub teacher: Vec<bool>,
}

/// Windows sharing their saliency maps and token lists, so each distinct map
/// is encoded once per optimizer step.
#[derive(Debug, Clone, Default)]
pub struct Batch<'a> {
    pub maps: Vec<&'a SaliencyMap>,
    pub tokens: Vec<&'a [TokenId]>,
    pub windows: Vec<BatchWindow>,
}

struct SequenceCache<T> {
    encoder: Vec<LstmStep<T>>,
    decoder: Vec<LstmStep<T>>,
    decoder_inputs: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
    /// `fed_back[j]`: decoder input `j + 1` was output `j`.
    fed_back: Vec<bool>,
}

/// Encoder-decoder predictor. The encoder LSTM reads `m` fused inputs; its
/// final state seeds the decoder, which emits `n` circle-encoded coordinates
/// as residual updates of its own input.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel<T> {
    cfg: ModelConfig,
    pub saliency: Option<SaliencyEncoder<T>>,
    pub navigation: Option<NavigationEncoder<T>>,
    pub encoder: LstmCell<T>,
    pub decoder: LstmCell<T>,
    pub head: Dense<T>,
}

fn to_real<T: Real>(v: [f64; 4]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

impl<T: Real> Seq2SeqModel<T> {
    pub fn new(cfg: &ModelConfig) -> Result<Self, PredictorError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let saliency = cfg.variant.uses_saliency().then(|| {
            SaliencyEncoder::new(&cfg.conv_channels, cfg.grid_width, cfg.grid_height, cfg.saliency_dim, &mut rng)
        });
        let navigation = cfg.variant.uses_subtitles().then(|| {
            NavigationEncoder::new(cfg.vocab, cfg.nav_embed, cfg.nav_layers, cfg.nav_units, cfg.navigation_dim, &mut rng)
        });
        Ok(Self {
            cfg: cfg.clone(),
            saliency,
            navigation,
            encoder: LstmCell::new("encoder", cfg.input_dim(), cfg.hidden, &mut rng),
            decoder: LstmCell::new("decoder", 4, cfg.hidden, &mut rng),
            head: Dense::new("head", cfg.hidden, 4, &mut rng),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn variant(&self) -> Variant {
        self.cfg.variant
    }

    /// Concatenates the components this variant uses; the rest are left out.
    fn fuse_step(&self, saliency: &[T], indicator: bool, navigation: &[T], coord: [f64; 4]) -> Vec<T> {
        let mut v = Vec::with_capacity(self.cfg.input_dim());
        if self.cfg.variant.uses_saliency() {
            v.extend_from_slice(saliency);
        }
        if self.cfg.variant.uses_subtitles() {
            v.push(if indicator { T::one() } else { T::zero() });
            v.extend_from_slice(navigation);
        }
        v.extend(to_real::<T>(coord));
        v
    }

    /// Projects a full feature vector onto this variant's input.
    pub fn project(&self, fv: &FeatureVector) -> Result<Vec<T>, PredictorError> {
        let (ks, kn) = (self.cfg.saliency_dim, self.cfg.navigation_dim);
        if fv.saliency.len() != ks || fv.navigation.len() != kn {
            return Err(PredictorError::Dimension {
                what: "feature vector",
                expected: ks + 1 + kn + 4,
                found: fv.dim(),
            });
        }
        let sal: Vec<T> = fv.saliency.iter().map(|&x| T::lit(x)).collect();
        let nav: Vec<T> = fv.navigation.iter().map(|&x| T::lit(x)).collect();
        Ok(self.fuse_step(&sal, fv.indicator, &nav, fv.coord))
    }

    pub fn saliency_embedding(&self, map: &SaliencyMap) -> Result<Vec<f64>, PredictorError> {
        Ok(match &self.saliency {
            Some(enc) => enc.encode(map)?.iter().map(|v| v.as_f64()).collect(),
            None => vec![0.0; self.cfg.saliency_dim],
        })
    }

    /// Zero for an empty token list or a variant without subtitles.
    pub fn navigation_embedding(&self, tokens: &[TokenId]) -> Result<Vec<f64>, PredictorError> {
        Ok(match &self.navigation {
            Some(enc) => enc.encode(tokens)?.iter().map(|v| v.as_f64()).collect(),
            None => vec![0.0; self.cfg.navigation_dim],
        })
    }

    /// Encodes a raw frame. Components the variant does not use come back as
    /// zero vectors and are dropped again by [`Seq2SeqModel::project`].
    pub fn features(&self, frame: &Frame<'_>) -> Result<FeatureVector, PredictorError> {
        let saliency = self.saliency_embedding(frame.map)?;
        let navigation = if frame.indicator {
            self.navigation_embedding(frame.tokens)?
        } else {
            vec![0.0; self.cfg.navigation_dim]
        };
        super::fuse(
            &saliency,
            frame.indicator,
            &navigation,
            &frame.coord,
            self.cfg.saliency_dim,
            self.cfg.navigation_dim,
        )
    }

    fn run_sequence(&self, inputs: &[Vec<T>], truth: &[Vec<T>], teacher: &[bool]) -> Result<SequenceCache<T>, PredictorError> {
        let m = self.cfg.input_steps;
        if inputs.len() != m {
            return Err(PredictorError::WindowLength {
                expected: m,
                found: inputs.len(),
            });
        }
        let (mut h, mut c) = self.encoder.zero_state();
        let mut encoder = Vec::with_capacity(m);
        for x in inputs {
            let s = self.encoder.forward(x, &h, &c)?;
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            encoder.push(s);
        }
        let n = self.cfg.output_steps;
        let last = inputs.last().expect("m >= 1");
        let mut x = last[last.len() - 4..].to_vec();
        let mut cache = SequenceCache {
            encoder,
            decoder: Vec::with_capacity(n),
            decoder_inputs: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
            fed_back: Vec::with_capacity(n),
        };
        for j in 0..n {
            let s = self.decoder.forward(&x, &h, &c)?;
            let r = self.head.forward(&s.h)?;
            let y: Vec<T> = x.iter().zip(&r).map(|(a, b)| *a + *b).collect();
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            cache.decoder.push(s);
            cache.decoder_inputs.push(std::mem::take(&mut x));
            let forced = teacher.get(j).copied().unwrap_or(false) && j < truth.len();
            cache.fed_back.push(!forced);
            x = if forced { truth[j].clone() } else { y.clone() };
            cache.outputs.push(y);
        }
        Ok(cache)
    }

    /// Accumulates parameter gradients for `dL/d(outputs)` and returns the
    /// gradient w.r.t. each fused input.
    fn backward_sequence(&mut self, cache: &SequenceCache<T>, d_outputs: &[Vec<T>]) -> Result<Vec<Vec<T>>, PredictorError> {
        let hd = self.cfg.hidden;
        let n = cache.outputs.len();
        let mut dh = vec![T::zero(); hd];
        let mut dc = vec![T::zero(); hd];
        // gradient arriving at decoder input j + 1
        let mut dx_next = vec![T::zero(); 4];
        for j in (0..n).rev() {
            let mut dy = d_outputs[j].clone();
            if cache.fed_back[j] {
                dy.iter_mut().zip(&dx_next).for_each(|(a, b)| *a += *b);
            }
            let dh_head = self.head.backward(&cache.decoder[j].h, &dy)?;
            dh.iter_mut().zip(&dh_head).for_each(|(a, b)| *a += *b);
            let (dx, dh_prev, dc_prev) = self.decoder.backward(&cache.decoder[j], &dh, &dc)?;
            dx_next = dx.iter().zip(&dy).map(|(a, b)| *a + *b).collect();
            dh = dh_prev;
            dc = dc_prev;
        }
        let mut d_inputs = vec![Vec::new(); cache.encoder.len()];
        for (i, s) in cache.encoder.iter().enumerate().rev() {
            let (dx, dh_prev, dc_prev) = self.encoder.backward(s, &dh, &dc)?;
            d_inputs[i] = dx;
            dh = dh_prev;
            dc = dc_prev;
        }
        Ok(d_inputs)
    }

    fn batch_inputs(
        &self,
        sal: &[Vec<T>],
        nav: &[Vec<T>],
        w: &BatchWindow,
    ) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>), PredictorError> {
        let zero_nav = vec![T::zero(); self.cfg.navigation_dim];
        let mut inputs = Vec::with_capacity(w.steps.len());
        for s in &w.steps {
            let sal_v: &[T] = if self.saliency.is_some() {
                sal.get(s.map).ok_or_else(|| PredictorError::Data(format!("map index {} out of range", s.map)))?
            } else {
                &[]
            };
            let nav_v: &[T] = match s.tokens {
                Some(i) if s.indicator && self.navigation.is_some() => nav
                    .get(i)
                    .ok_or_else(|| PredictorError::Data(format!("token list {i} out of range")))?,
                _ => &zero_nav,
            };
            inputs.push(self.fuse_step(sal_v, s.indicator, nav_v, s.coord.encode()));
        }
        if w.target.len() != self.cfg.output_steps {
            return Err(PredictorError::Dimension {
                what: "window target",
                expected: self.cfg.output_steps,
                found: w.target.len(),
            });
        }
        let truth = w.target.iter().map(|c| to_real::<T>(c.encode())).collect();
        Ok((inputs, truth))
    }

    /// Mean over windows of the per-window MSE, without touching gradients.
    pub fn batch_loss(&self, batch: &Batch<'_>) -> Result<f64, PredictorError> {
        if batch.windows.is_empty() {
            return Err(PredictorError::EmptyDataset("batch has no windows".into()));
        }
        let sal = match &self.saliency {
            Some(enc) => batch.maps.iter().map(|m| enc.encode(m)).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let nav = match &self.navigation {
            Some(enc) => batch.tokens.iter().map(|t| enc.encode(t)).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let mut total = 0.0;
        for w in &batch.windows {
            let (inputs, truth) = self.batch_inputs(&sal, &nav, w)?;
            let cache = self.run_sequence(&inputs, &truth, &w.teacher)?;
            let pred: Vec<T> = cache.outputs.concat();
            total += mse_slices(&pred, &truth.concat()).0;
        }
        Ok(total / batch.windows.len() as f64)
    }

    /// Forward and backward pass over a batch. Adds the gradient of the mean
    /// per-window MSE into the parameters and returns that loss.
    pub fn accumulate_batch(&mut self, batch: &Batch<'_>) -> Result<f64, PredictorError> {
        if batch.windows.is_empty() {
            return Err(PredictorError::EmptyDataset("batch has no windows".into()));
        }
        let sal_caches = match &self.saliency {
            Some(enc) => batch
                .maps
                .iter()
                .map(|m| enc.forward(enc.map_tensor(m)?))
                .collect::<Result<Vec<_>, NnError>>()?,
            None => Vec::new(),
        };
        let nav_caches = match &self.navigation {
            Some(enc) => batch.tokens.iter().map(|t| enc.forward(t)).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let sal: Vec<Vec<T>> = sal_caches.iter().map(|c| c.out.clone()).collect();
        let nav: Vec<Vec<T>> = nav_caches
            .iter()
            .map(|c| match c {
                Some(c) => c.out.clone(),
                None => vec![T::zero(); self.cfg.navigation_dim],
            })
            .collect();
        let ks = self.cfg.saliency_dim;
        let kn = self.cfg.navigation_dim;
        let mut d_sal = vec![vec![T::zero(); ks]; sal.len()];
        let mut d_nav = vec![vec![T::zero(); kn]; nav.len()];
        let scale = T::lit(1.0 / batch.windows.len() as f64);
        let mut total = 0.0;
        for w in &batch.windows {
            let (inputs, truth) = self.batch_inputs(&sal, &nav, w)?;
            let cache = self.run_sequence(&inputs, &truth, &w.teacher)?;
            let (loss, grad) = mse_slices(&cache.outputs.concat(), &truth.concat());
            total += loss;
            let d_out: Vec<Vec<T>> = grad.chunks(4).map(|g| g.iter().map(|&v| v * scale).collect()).collect();
            let d_in = self.backward_sequence(&cache, &d_out)?;
            for (s, d) in w.steps.iter().zip(&d_in) {
                let mut off = 0;
                if self.saliency.is_some() {
                    d_sal[s.map].iter_mut().zip(&d[..ks]).for_each(|(a, b)| *a += *b);
                    off = ks;
                }
                if self.navigation.is_some() {
                    if let (Some(i), true) = (s.tokens, s.indicator) {
                        d_nav[i].iter_mut().zip(&d[off + 1..off + 1 + kn]).for_each(|(a, b)| *a += *b);
                    }
                }
            }
        }
        if let Some(enc) = self.saliency.as_mut() {
            for (c, d) in sal_caches.iter().zip(&d_sal) {
                enc.backward(c, d)?;
            }
        }
        if let Some(enc) = self.navigation.as_mut() {
            for (c, d) in nav_caches.iter().zip(&d_nav) {
                if let Some(c) = c {
                    enc.backward(c, d)?;
                }
            }
        }
        Ok(total / batch.windows.len() as f64)
    }

    /// Closed-loop prediction from `m` encoded feature vectors.
    pub fn predict_features(&self, window: &[FeatureVector]) -> Result<PredictionResult, PredictorError> {
        let start = Instant::now();
        let inputs = window.iter().map(|fv| self.project(fv)).collect::<Result<Vec<_>, _>>()?;
        let cache = self.run_sequence(&inputs, &[], &[])?;
        Ok(PredictionResult {
            coords: decode_outputs(&cache.outputs),
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Encodes `m` raw frames and predicts the next `n` viewport centers.
    pub fn predict(&self, frames: &[Frame<'_>]) -> Result<PredictionResult, PredictorError> {
        let start = Instant::now();
        if frames.len() != self.cfg.input_steps {
            return Err(PredictorError::WindowLength {
                expected: self.cfg.input_steps,
                found: frames.len(),
            });
        }
        let fvs = frames.iter().map(|f| self.features(f)).collect::<Result<Vec<_>, _>>()?;
        let mut out = self.predict_features(&fvs)?;
        out.latency_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(out)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), PredictorError> {
        let arch = serde_json::to_value(&self.cfg).map_err(|e| PredictorError::Config(e.to_string()))?;
        write_checkpoint(w, &arch, &self.params())?;
        Ok(())
    }

    pub fn load<R: Read>(r: R) -> Result<Self, PredictorError> {
        let ckpt = read_checkpoint(r)?;
        let cfg: ModelConfig = serde_json::from_value(ckpt.architecture.clone())
            .map_err(|e| PredictorError::Config(format!("checkpoint architecture: {e}")))?;
        let mut model = Self::new(&cfg)?;
        load_params(&mut model.params_mut(), &ckpt)?;
        Ok(model)
    }
}

fn decode_outputs<T: Real>(outputs: &[Vec<T>]) -> Vec<SphericalCoord> {
    outputs
        .iter()
        .map(|y| SphericalCoord::decode([y[0].as_f64(), y[1].as_f64(), y[2].as_f64(), y[3].as_f64()]))
        .collect()
}

impl<T: Real> Parameterized<T> for Seq2SeqModel<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        if let Some(s) = &self.saliency {
            v.extend(s.params());
        }
        if let Some(n) = &self.navigation {
            v.extend(n.params());
        }
        v.extend(self.encoder.params());
        v.extend(self.decoder.params());
        v.extend(self.head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        if let Some(s) = &mut self.saliency {
            v.extend(s.params_mut());
        }
        if let Some(n) = &mut self.navigation {
            v.extend(n.params_mut());
        }
        v.extend(self.encoder.params_mut());
        v.extend(self.decoder.params_mut());
        v.extend(self.head.params_mut());
        v
    }
}
