//! The subtitle-aware viewport predictor: learned saliency and navigation
//! encoders feeding a recurrent encoder-decoder over the past trajectory.

mod config;
mod data;
mod encoders;
mod features;
mod model;
mod train;

use thiserror::Error;

use crate::nn::NnError;
use crate::saliency::SaliencyError;
use crate::subtitle::SubtitleError;
use crate::trajectory::TrajectoryError;

pub use config::{ablation_variants, ModelConfig, Variant};
pub use data::{Corpus, CorpusBuilder, UserSeries, VideoSeries, WindowRef};
pub use encoders::{NavigationCache, NavigationEncoder, SaliencyCache, SaliencyEncoder};
pub use features::{fuse, FeatureVector, Frame};
pub use model::{Batch, BatchStep, BatchWindow, PredictionResult, Seq2SeqModel};
pub use train::{predict_windows, train, train_windows, TrainOutcome};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what}: expected dimension {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("window has {found} input steps, model expects {expected}")]
    WindowLength { expected: usize, found: usize },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Saliency(#[from] SaliencyError),
    #[error(transparent)]
    Subtitle(#[from] SubtitleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
