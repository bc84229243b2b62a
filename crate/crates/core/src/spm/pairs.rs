use rand::Rng;

use super::WINDOW;
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::param::ParamVector;

/// One supervised example drawn from a simulated trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub window_start: usize,
    /// Candidate values; may be zero, so not a [`ParamVector`].
    pub candidate: Vec<f64>,
    /// 1 where the generating value exceeds the candidate.
    pub labels: Vec<f32>,
    /// 0 inside the "about equal" band.
    pub mask: Vec<f32>,
}

/// Binary labels `sim > pred` and the equality mask
/// `|sim - pred| <= eta * mean` (masked entries carry no training signal).
pub fn label_pair(sim: &[f64], pred: &[f64], mean: &[f64], eta: f64) -> (Vec<f32>, Vec<f32>) {
    sim.iter()
        .zip(pred)
        .zip(mean)
        .map(|((&s, &p), &m)| {
            let label = if s > p { 1.0 } else { 0.0 };
            let mask = if (s - p).abs() <= eta * m { 0.0 } else { 1.0 };
            (label, mask)
        })
        .unzip()
}

/// Per-parameter uniform draw on `[0, 2 * mean_i]`.
pub fn sample_candidate<R: Rng + ?Sized>(mean: &ParamVector, rng: &mut R) -> Vec<f64> {
    mean.iter().map(|&m| rng.random::<f64>() * 2.0 * m).collect()
}

/// Draws `pairs` random windows and candidates from a simulated trajectory.
/// `mean` sets both the candidate range and the equality band.
pub fn make_training_pairs<R: Rng + ?Sized>(
    traj: &Trajectory,
    mean: &ParamVector,
    eta: f64,
    pairs: usize,
    rng: &mut R,
) -> Result<Vec<TrainingPair>> {
    let sim = traj
        .gen_params
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("training trajectories must carry their parameters".into()))?;
    if sim.len() != mean.len() {
        return Err(Error::InvalidParams(format!(
            "trajectory has {} parameters, mean has {}",
            sim.len(),
            mean.len()
        )));
    }
    if traj.len() < WINDOW {
        return Err(Error::InsufficientData(format!(
            "trajectory of length {} is shorter than the {WINDOW}-frame window",
            traj.len()
        )));
    }
    Ok((0..pairs)
        .map(|_| {
            let window_start = rng.random_range(0..=traj.len() - WINDOW);
            let candidate = sample_candidate(mean, rng);
            let (labels, mask) = label_pair(sim.values(), &candidate, mean.values(), eta);
            TrainingPair {
                window_start,
                candidate,
                labels,
                mask,
            }
        })
        .collect())
}
