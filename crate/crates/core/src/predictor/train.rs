use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::SphericalCoord;
use crate::nn::{Adam, AdamConfig, Parameterized};

use super::data::{Corpus, WindowRef};
use super::features::fuse;
use super::model::{Batch, BatchStep, BatchWindow, Seq2SeqModel};
use super::{ModelConfig, PredictorError};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Seq2SeqModel<f32>,
    /// Mean training MSE of each epoch.
    pub loss_history: Vec<f64>,
}

/// Trains on every window of `corpus`.
pub fn train(corpus: &Corpus, cfg: &ModelConfig) -> Result<TrainOutcome, PredictorError> {
    let windows = corpus.windows(cfg.input_steps, cfg.output_steps, cfg.stride)?;
    train_windows(corpus, &windows, cfg)
}

/// Mini-batch Adam on MSE. Windows are batched in the given order and only
/// the order of batches is shuffled each epoch, so windows sharing saliency
/// maps stay together. Single-threaded and deterministic for a given seed.
pub fn train_windows(corpus: &Corpus, windows: &[WindowRef], cfg: &ModelConfig) -> Result<TrainOutcome, PredictorError> {
    if windows.is_empty() {
        return Err(PredictorError::EmptyDataset(
            "no training windows (series shorter than input_steps + output_steps?)".into(),
        ));
    }
    let mut model = Seq2SeqModel::<f32>::new(cfg)?;
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let chunks: Vec<&[WindowRef]> = windows.chunks(cfg.batch_size).collect();
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for &b in &order {
            let batch = make_batch(corpus, chunks[b], cfg, &mut rng);
            model.zero_grad();
            let loss = model.accumulate_batch(&batch)?;
            if !loss.is_finite() {
                return Err(PredictorError::Diverged { epoch, loss });
            }
            adam.step(&mut model.params_mut())?;
            sum += loss * chunks[b].len() as f64;
        }
        let mean = sum / windows.len() as f64;
        log::debug!("epoch {epoch}/{}: loss {mean:.6}", cfg.epochs);
        history.push(mean);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

fn make_batch<'a, R: Rng>(corpus: &'a Corpus, windows: &[WindowRef], cfg: &ModelConfig, rng: &mut R) -> Batch<'a> {
    let (m, n) = (cfg.input_steps, cfg.output_steps);
    let mut batch = Batch::default();
    let mut map_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut token_index: HashMap<(usize, usize), usize> = HashMap::new();
    for w in windows {
        let video = &corpus.videos[w.video];
        let mut steps = Vec::with_capacity(m);
        for i in w.start..w.start + m {
            let frame = video.frame(w.user, i);
            let map = *map_index.entry((w.video, i)).or_insert_with(|| {
                batch.maps.push(frame.map);
                batch.maps.len() - 1
            });
            let tokens = (frame.indicator && !frame.tokens.is_empty()).then(|| {
                *token_index.entry((w.video, i)).or_insert_with(|| {
                    batch.tokens.push(frame.tokens);
                    batch.tokens.len() - 1
                })
            });
            steps.push(BatchStep {
                map,
                indicator: frame.indicator,
                tokens,
                coord: frame.coord,
            });
        }
        let teacher = (0..n)
            .map(|_| match cfg.teacher_forcing {
                r if r >= 1.0 => true,
                r if r <= 0.0 => false,
                r => rng.random::<f64>() < r,
            })
            .collect();
        batch.windows.push(BatchWindow {
            steps,
            target: corpus.targets(w, m, n).to_vec(),
            teacher,
        });
    }
    batch
}

/// Closed-loop predictions and ground truth for each window. Saliency and
/// navigation embeddings are computed once per video timestep.
pub fn predict_windows(
    model: &Seq2SeqModel<f32>,
    corpus: &Corpus,
    windows: &[WindowRef],
) -> Result<(Vec<Vec<SphericalCoord>>, Vec<Vec<SphericalCoord>>), PredictorError> {
    let cfg = model.config();
    let (m, n) = (cfg.input_steps, cfg.output_steps);
    let mut sal_cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut nav_cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let zero_nav = vec![0.0; cfg.navigation_dim];
    let mut preds = Vec::with_capacity(windows.len());
    let mut truth = Vec::with_capacity(windows.len());
    for w in windows {
        let video = &corpus.videos[w.video];
        let mut fvs = Vec::with_capacity(m);
        for i in w.start..w.start + m {
            let frame = video.frame(w.user, i);
            if let Entry::Vacant(e) = sal_cache.entry((w.video, i)) {
                e.insert(model.saliency_embedding(frame.map)?);
            }
            let nav = if frame.indicator {
                if let Entry::Vacant(e) = nav_cache.entry((w.video, i)) {
                    e.insert(model.navigation_embedding(frame.tokens)?);
                }
                &nav_cache[&(w.video, i)]
            } else {
                &zero_nav
            };
            fvs.push(fuse(
                &sal_cache[&(w.video, i)],
                frame.indicator,
                nav,
                &frame.coord,
                cfg.saliency_dim,
                cfg.navigation_dim,
            )?);
        }
        preds.push(model.predict_features(&fvs)?.coords);
        truth.push(corpus.targets(w, m, n).to_vec());
    }
    Ok((preds, truth))
}
