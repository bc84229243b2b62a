use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pairs::{label_pair, make_training_pairs, sample_candidate, TrainingPair};
use super::window::WindowBatch;
use super::{SpmModel, WINDOW};
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{logistic_loss, AdamState, Parameterized, Real, Tensor};
use crate::param::ParamVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    #[default]
    True,
    /// Label/mask columns are permuted across each batch, destroying any
    /// relation to the inputs. Used as a null-model control.
    Shuffled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    /// Training pairs per optimizer step.
    pub batch_size: usize,
    pub label_mode: LabelMode,
    /// Hold out a fraction of the buffer and report accuracy on it.
    pub evaluate: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 300,
            batch_size: 128,
            label_mode: LabelMode::True,
            evaluate: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpmMetrics {
    pub losses: Vec<f64>,
    /// Per-parameter accuracy on held-out trajectories, when requested.
    pub heldout_accuracy: Option<Vec<f64>>,
}

/// Splits buffer indices into (train, held-out).
pub(crate) fn split_buffer<R: Rng + ?Sized>(
    len: usize,
    holdout_fraction: f64,
    evaluate: bool,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    if !evaluate || len < 2 || holdout_fraction <= 0.0 {
        return (idx, Vec::new());
    }
    idx.shuffle(rng);
    let held = ((len as f64 * holdout_fraction).round() as usize).clamp(1, len - 1);
    let train = idx.split_off(held);
    (train, idx)
}

fn check_buffer(buffer: &[&Trajectory], batch_size: usize) -> Result<()> {
    if buffer.is_empty() {
        return Err(Error::InsufficientData("training buffer is empty".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    Ok(())
}

/// Trains the classifier on pairs drawn from `buffer` (trajectories sampled
/// with replacement). Candidates and the equality band are scaled by `bound_mean`.
pub fn train_spm<T: Real, R: Rng + ?Sized>(
    model: &mut SpmModel<T>,
    adam: &mut AdamState<T>,
    buffer: &[&Trajectory],
    bound_mean: &ParamVector,
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<SpmMetrics> {
    check_buffer(buffer, opts.batch_size)?;
    let cfg = model.config().clone();
    let (train, held) = split_buffer(buffer.len(), cfg.holdout_fraction, opts.evaluate, rng);
    let per_traj = cfg.pairs_per_traj.max(1);
    let n = model.num_params();

    let mut losses = Vec::with_capacity(opts.steps);
    for step in 0..opts.steps {
        let mut items = Vec::with_capacity(opts.batch_size);
        let mut pairs: Vec<TrainingPair> = Vec::with_capacity(opts.batch_size);
        while pairs.len() < opts.batch_size {
            let traj = buffer[train[rng.random_range(0..train.len())]];
            let take = per_traj.min(opts.batch_size - pairs.len());
            for p in make_training_pairs(traj, bound_mean, cfg.eta, take, rng)? {
                items.push((traj, p.window_start));
                pairs.push(p);
            }
        }
        let mut labels: Vec<f64> = pairs.iter().flat_map(|p| p.labels.iter().map(|&v| v as f64)).collect();
        let mut mask: Vec<f64> = pairs.iter().flat_map(|p| p.mask.iter().map(|&v| v as f64)).collect();
        if opts.label_mode == LabelMode::Shuffled {
            let b = pairs.len();
            for i in 0..n {
                let mut order: Vec<usize> = (0..b).collect();
                order.shuffle(rng);
                let col: Vec<(f64, f64)> = order.iter().map(|&r| (labels[r * n + i], mask[r * n + i])).collect();
                for (r, (l, m)) in col.into_iter().enumerate() {
                    labels[r * n + i] = l;
                    mask[r * n + i] = m;
                }
            }
        }

        let batch = WindowBatch::gather(&items, WINDOW)?;
        let candidates: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.candidate).collect();
        let shape = vec![candidates.len(), n];
        let logits = model.forward_logits(&batch, &candidates)?;
        let (loss, grad) = logistic_loss(
            &logits,
            &Tensor::from_f64(shape.clone(), &labels)?,
            &Tensor::from_f64(shape, &mask)?,
        )?;
        model.zero_grad();
        model.backward(&grad)?;
        adam.step(model)?;
        if !loss.is_finite() || !model.params_finite() {
            return Err(Error::NumericDivergence(format!(
                "classifier loss {loss} at step {step}"
            )));
        }
        losses.push(loss);
    }

    let heldout_accuracy = if held.is_empty() {
        None
    } else {
        let held: Vec<&Trajectory> = held.iter().map(|&i| buffer[i]).collect();
        Some(evaluate_accuracy(
            model,
            &held,
            bound_mean,
            cfg.eval_pairs_per_traj,
            rng,
        )?)
    };
    Ok(SpmMetrics {
        losses,
        heldout_accuracy,
    })
}

/// Per-parameter binary accuracy of full-trajectory predictions against
/// fresh random candidates; entries inside the equality band are skipped.
pub fn evaluate_accuracy<T: Real, R: Rng + ?Sized>(
    model: &mut SpmModel<T>,
    trajs: &[&Trajectory],
    bound_mean: &ParamVector,
    pairs_per_traj: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = model.num_params();
    let eta = model.config().eta;
    let mut correct = vec![0usize; n];
    let mut scored = vec![0usize; n];
    for traj in trajs {
        let sim = traj
            .gen_params
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("evaluation trajectories must carry their parameters".into()))?;
        let candidates: Vec<Vec<f64>> = (0..pairs_per_traj).map(|_| sample_candidate(bound_mean, rng)).collect();
        let probs = model.predict_many(traj, &candidates)?;
        for (cand, p) in candidates.iter().zip(&probs) {
            let (labels, mask) = label_pair(sim.values(), cand, bound_mean.values(), eta);
            for i in 0..n {
                if mask[i] == 0.0 {
                    continue;
                }
                scored[i] += 1;
                if (p[i] > 0.5) == (labels[i] == 1.0) {
                    correct[i] += 1;
                }
            }
        }
    }
    correct
        .iter()
        .zip(&scored)
        .map(|(&c, &s)| {
            if s == 0 {
                Err(Error::InsufficientData("no scorable evaluation pairs".into()))
            } else {
                Ok(c as f64 / s as f64)
            }
        })
        .collect()
}
