//! Search Param Model.
//!
//! For each system parameter a separate MLP head reads the shared encoding of
//! a 10-frame window, the window's actions and a sinusoidal encoding of a
//! candidate value, and emits the logit of "the parameters that generated
//! this trajectory are larger than the candidate". Predictions over a full
//! trajectory average non-overlapping windows.

mod model;
mod pairs;
mod regression;
mod train;
mod window;

use serde::{Deserialize, Serialize};

use crate::nn::{AdamConfig, LayerSpec, DEFAULT_LEVELS};

pub use model::SpmModel;
pub use pairs::{label_pair, make_training_pairs, sample_candidate, TrainingPair};
pub use regression::{train_regression, RegressionMetrics, RegressionModel};
pub use train::{evaluate_accuracy, train_spm, LabelMode, SpmMetrics, TrainOptions};
pub use window::{window_starts, WindowBatch};

/// Frames per window.
pub const WINDOW: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpmConfig {
    pub levels: usize,
    /// Relative half-width of the "about equal" band excluded from the loss.
    /// Run configs set it from their top-level `eta`.
    #[serde(skip)]
    pub eta: f64,
    pub pairs_per_traj: usize,
    pub hidden: usize,
    pub conv_channels: [usize; 2],
    pub encoder_dim: usize,
    /// Width of the optional per-window state features; zero disables them.
    pub extra_features: usize,
    pub holdout_fraction: f64,
    pub eval_pairs_per_traj: usize,
    pub adam: AdamConfig,
}

impl Default for SpmConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            eta: 0.05,
            pairs_per_traj: 4,
            hidden: 400,
            conv_channels: [16, 32],
            encoder_dim: 128,
            extra_features: 0,
            holdout_fraction: 0.1,
            eval_pairs_per_traj: 32,
            adam: AdamConfig::default(),
        }
    }
}

impl SpmConfig {
    pub(crate) fn encoder_specs(&self) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv2d {
                out_channels: self.conv_channels[0],
                kernel: 3,
                stride: 2,
                padding: 1,
            },
            LayerSpec::Relu,
            LayerSpec::Conv2d {
                out_channels: self.conv_channels[1],
                kernel: 3,
                stride: 2,
                padding: 1,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                out_dim: self.encoder_dim,
            },
        ]
    }

    pub(crate) fn head_specs(&self, out_dim: usize) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Dense { out_dim: self.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { out_dim: self.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { out_dim },
        ]
    }
}
