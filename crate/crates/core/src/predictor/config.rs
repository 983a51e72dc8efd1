use serde::{Deserialize, Serialize};

use super::PredictorError;

/// Which input features the model sees. Absent features are removed from the
/// fused vector, never zero-filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Saliency, subtitle indicator, navigation feature and trajectory.
    Full,
    /// Saliency and trajectory.
    NoSubtitle,
    /// Trajectory only.
    TrajectoryOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoSubtitle, Variant::TrajectoryOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSubtitle => "no_subtitle",
            Variant::TrajectoryOnly => "trajectory_only",
        }
    }

    pub fn uses_saliency(&self) -> bool {
        !matches!(self, Variant::TrajectoryOnly)
    }

    pub fn uses_subtitles(&self) -> bool {
        matches!(self, Variant::Full)
    }
}

impl std::str::FromStr for Variant {
    type Err = PredictorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| PredictorError::Config(format!("unknown variant {s:?}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// `k_s`, width of the saliency embedding.
    pub saliency_dim: usize,
    /// `k_n`, width of the navigation embedding.
    pub navigation_dim: usize,
    /// Hidden size of the sequence encoder and decoder.
    pub hidden: usize,
    /// Output channels of each conv(3x3) + pool(2x2) stage.
    pub conv_channels: Vec<usize>,
    pub grid_width: usize,
    pub grid_height: usize,
    /// Number of navigation phrases; token ids run from 1 to `vocab`.
    pub vocab: usize,
    pub nav_embed: usize,
    pub nav_layers: usize,
    pub nav_units: usize,
    /// `m`, input timesteps per window.
    pub input_steps: usize,
    /// `n`, predicted timesteps per window.
    pub output_steps: usize,
    pub stride: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Probability of feeding the ground truth to the decoder during training.
    pub teacher_forcing: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            saliency_dim: 16,
            navigation_dim: 8,
            hidden: 64,
            conv_channels: vec![8, 16, 32],
            grid_width: 64,
            grid_height: 32,
            vocab: 20,
            nav_embed: 16,
            nav_layers: 2,
            nav_units: 32,
            input_steps: 5,
            output_steps: 5,
            stride: 1,
            lr: 1e-3,
            epochs: 10,
            batch_size: 64,
            teacher_forcing: 1.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        let positive = [
            ("saliency_dim", self.saliency_dim),
            ("navigation_dim", self.navigation_dim),
            ("hidden", self.hidden),
            ("vocab", self.vocab),
            ("nav_embed", self.nav_embed),
            ("nav_layers", self.nav_layers),
            ("nav_units", self.nav_units),
            ("input_steps", self.input_steps),
            ("output_steps", self.output_steps),
            ("stride", self.stride),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(PredictorError::Config(format!("{name} must be positive")));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(PredictorError::Config("conv_channels must be non-empty and positive".into()));
        }
        let shrink = 1usize << self.conv_channels.len();
        if self.grid_width % shrink != 0 || self.grid_height % shrink != 0 || self.grid_height == 0 {
            return Err(PredictorError::Config(format!(
                "grid {}x{} not divisible by {shrink} for {} pooling stages",
                self.grid_width,
                self.grid_height,
                self.conv_channels.len()
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(PredictorError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.teacher_forcing) {
            return Err(PredictorError::Config("teacher_forcing must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Width of the fused per-timestep input for this variant.
    pub fn input_dim(&self) -> usize {
        match self.variant {
            Variant::Full => self.saliency_dim + 1 + self.navigation_dim + 4,
            Variant::NoSubtitle => self.saliency_dim + 4,
            Variant::TrajectoryOnly => 4,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }
}

/// The full model and its two input ablations, identical otherwise.
pub fn ablation_variants(cfg: &ModelConfig) -> [ModelConfig; 3] {
    Variant::ALL.map(|v| cfg.with_variant(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_dims_per_variant() {
        let cfg = ModelConfig {
            saliency_dim: 8,
            navigation_dim: 4,
            ..ModelConfig::default()
        };
        let [full, no_sub, traj] = ablation_variants(&cfg);
        assert_eq!(full.input_dim(), 17);
        assert_eq!(no_sub.input_dim(), 12);
        assert_eq!(traj.input_dim(), 4);
        assert_eq!(no_sub.lr, full.lr);
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = ModelConfig::default();
        assert_eq!((cfg.input_steps, cfg.output_steps, cfg.lr), (5, 5, 1e-3));
        cfg.validate().unwrap();
        let bad = ModelConfig {
            grid_width: 60,
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig { hidden: 0, ..cfg };
        assert!(bad.validate().is_err());
        assert_eq!("no_subtitle".parse::<Variant>().unwrap(), Variant::NoSubtitle);
        assert!("both".parse::<Variant>().is_err());
    }
}
