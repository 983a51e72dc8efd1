//! Small datasets shared by the training tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use viewport_core::geometry::SphericalCoord;
use viewport_core::predictor::{Corpus, CorpusBuilder, ModelConfig};
use viewport_core::saliency::SaliencyConfig;
use viewport_core::subtitle::{NavigationLexicon, SubtitleCue, SubtitleTrack};
use viewport_core::trajectory::{Trajectory, TrajectorySample};

/// Two viewers, 14 steps each, one track with two navigation cues. Gives 10
/// windows of 5 + 5 steps.
pub fn toy_corpus() -> Corpus {
    let trajectories: Vec<Trajectory> = (0..2)
        .map(|u| {
            let samples = (0..14)
                .map(|i| {
                    let t = i as f64 * 0.5;
                    let phi = 1.0 + 0.08 * (u as f64 + 1.0) * i as f64;
                    let theta = 1.5 + 0.1 * (0.4 * i as f64 + u as f64).sin();
                    TrajectorySample {
                        t,
                        coord: SphericalCoord::new(phi, theta).unwrap(),
                    }
                })
                .collect();
            Trajectory::new(format!("u{u}"), "toy", samples).unwrap()
        })
        .collect();
    let track = SubtitleTrack::new(vec![
        SubtitleCue::new(1, 1.0, 3.0, "turn left").unwrap(),
        SubtitleCue::new(2, 4.0, 5.5, "look up").unwrap(),
    ]);
    CorpusBuilder::new(0.5, SaliencyConfig::new(PI / 30.0, 16, 8).unwrap(), NavigationLexicon::default())
        .subtitles("toy", track)
        .build(&trajectories)
        .unwrap()
}

/// Compact model that can memorise [`toy_corpus`].
pub fn toy_config() -> ModelConfig {
    ModelConfig {
        saliency_dim: 8,
        navigation_dim: 4,
        hidden: 32,
        conv_channels: vec![4, 4],
        grid_width: 16,
        grid_height: 8,
        nav_embed: 8,
        nav_layers: 1,
        nav_units: 8,
        lr: 5e-3,
        epochs: 500,
        batch_size: 10,
        seed: 7,
        ..ModelConfig::default()
    }
}
