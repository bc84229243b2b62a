use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::train::{split_buffer, TrainOptions};
use super::window::{window_starts, WindowBatch};
use super::{SpmConfig, WINDOW};
use crate::envs::{EnvSpec, Trajectory};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, mse_loss, AdamState, LayerStack, ParamSlot, Parameterized, Real, Tensor};
use crate::param::ParamVector;

/// Direct regression of all parameters from a window, as fractions of
/// twice the initial mean.
#[derive(Clone, Debug)]
pub struct RegressionModel<T: Real = f32> {
    config: SpmConfig,
    frame_size: usize,
    action_dim: usize,
    p_max: Vec<f64>,
    encoder: LayerStack<T>,
    head: LayerStack<T>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub losses: Vec<f64>,
    /// Per-parameter mean absolute error on held-out trajectories, as a
    /// fraction of the encoding scale.
    pub heldout_abs_error: Option<Vec<f64>>,
}

impl<T: Real> RegressionModel<T> {
    /// The untrained model predicts exactly the initial mean.
    pub fn new<R: Rng + ?Sized>(
        config: SpmConfig,
        spec: &EnvSpec,
        initial_mean: &ParamVector,
        rng: &mut R,
    ) -> Result<Self> {
        spec.schema.validate(initial_mean)?;
        let s = spec.frame_size;
        let encoder = LayerStack::new(&[3 * WINDOW, s, s], &config.encoder_specs(), rng)?;
        let head_in = config.encoder_dim + WINDOW * spec.action_dim + config.extra_features;
        let mut head = LayerStack::new(&[head_in], &config.head_specs(spec.num_params()), rng)?;
        let last = head.last_dense_mut().expect("head ends in a dense layer");
        last.weight_mut().fill(T::zero());
        last.bias_mut().fill(T::of(0.5));
        Ok(Self {
            config,
            frame_size: s,
            action_dim: spec.action_dim,
            p_max: initial_mean.iter().map(|m| 2.0 * m).collect(),
            encoder,
            head,
        })
    }

    pub fn config(&self) -> &SpmConfig {
        &self.config
    }

    pub fn num_params(&self) -> usize {
        self.p_max.len()
    }

    pub fn p_max(&self) -> &[f64] {
        &self.p_max
    }

    /// Normalized outputs `[B, N]`; caches activations for backward.
    pub fn forward(&mut self, batch: &WindowBatch<T>) -> Result<Tensor<T>> {
        let b = batch.len();
        let s = self.frame_size;
        if batch.frames.shape() != [b, 3 * WINDOW, s, s]
            || batch.actions.shape() != [b, WINDOW * self.action_dim]
            || batch.extra.shape() != [b, self.config.extra_features]
        {
            return Err(Error::Shape("window batch does not fit the regression model".into()));
        }
        let enc = self.encoder.forward(batch.frames.clone())?;
        let ctx = Tensor::concat_features(&[&enc, &batch.actions, &batch.extra])?;
        self.head.forward(ctx)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<()> {
        let dx = self.head.backward(grad, true)?.expect("input gradient requested");
        let enc_grad = dx.slice_features(0, self.config.encoder_dim)?;
        self.encoder.backward(&enc_grad, false)?;
        Ok(())
    }

    /// Window-averaged prediction rescaled to parameter units, clamped to
    /// `[0, p_max]`.
    pub fn predict(&mut self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.len() < WINDOW {
            return Err(Error::InsufficientData(format!(
                "trajectory of length {} is shorter than the {WINDOW}-frame window",
                traj.len()
            )));
        }
        let items: Vec<_> = window_starts(traj.len(), WINDOW)
            .into_iter()
            .map(|s| (traj, s))
            .collect();
        let out = self.forward(&WindowBatch::gather(&items, WINDOW)?)?;
        let n = self.num_params();
        let windows = items.len() as f64;
        Ok((0..n)
            .map(|i| {
                let avg = out.data().iter().skip(i).step_by(n).map(|v| v.as_f64()).sum::<f64>() / windows;
                avg.clamp(0.0, 1.0) * self.p_max[i]
            })
            .collect())
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(&mut self, path: &Path) -> Result<()> {
        checkpoint::load(self, path)
    }
}

impl<T: Real> Parameterized<T> for RegressionModel<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(ParamSlot<'_, T>)) {
        self.encoder.visit_params(f);
        self.head.visit_params(f);
    }
}

/// Squared-error training on random windows; targets are the generating
/// parameters divided by the encoding scale.
pub fn train_regression<T: Real, R: Rng + ?Sized>(
    model: &mut RegressionModel<T>,
    adam: &mut AdamState<T>,
    buffer: &[&Trajectory],
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<RegressionMetrics> {
    if buffer.is_empty() {
        return Err(Error::InsufficientData("training buffer is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let (train, held) = split_buffer(buffer.len(), model.config.holdout_fraction, opts.evaluate, rng);
    let n = model.num_params();
    let target_of = |traj: &Trajectory, p_max: &[f64]| -> Result<Vec<f64>> {
        let sim = traj
            .gen_params
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("training trajectories must carry their parameters".into()))?;
        Ok(sim.iter().zip(p_max).map(|(s, m)| s / m).collect())
    };

    let mut losses = Vec::with_capacity(opts.steps);
    for step in 0..opts.steps {
        let mut items = Vec::with_capacity(opts.batch_size);
        let mut targets = Vec::with_capacity(opts.batch_size * n);
        for _ in 0..opts.batch_size {
            let traj = buffer[train[rng.random_range(0..train.len())]];
            if traj.len() < WINDOW {
                return Err(Error::InsufficientData("trajectory shorter than the window".into()));
            }
            items.push((traj, rng.random_range(0..=traj.len() - WINDOW)));
            targets.extend(target_of(traj, &model.p_max)?);
        }
        let batch = WindowBatch::gather(&items, WINDOW)?;
        let pred = model.forward(&batch)?;
        let (loss, grad) = mse_loss(&pred, &Tensor::from_f64(vec![items.len(), n], &targets)?)?;
        model.zero_grad();
        model.backward(&grad)?;
        adam.step(model)?;
        if !loss.is_finite() || !model.params_finite() {
            return Err(Error::NumericDivergence(format!(
                "regression loss {loss} at step {step}"
            )));
        }
        losses.push(loss);
    }

    let heldout_abs_error = if held.is_empty() {
        None
    } else {
        let mut err = vec![0.0; n];
        for &i in &held {
            let pred = model.predict(buffer[i])?;
            let target = target_of(buffer[i], &model.p_max)?;
            for k in 0..n {
                err[k] += (pred[k] / model.p_max[k] - target[k]).abs() / held.len() as f64;
            }
        }
        Some(err)
    };
    Ok(RegressionMetrics {
        losses,
        heldout_abs_error,
    })
}
