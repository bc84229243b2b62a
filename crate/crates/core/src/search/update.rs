use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamVector;

/// Confidence-thresholded multiplicative step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRule {
    pub alpha: f64,
    pub hi_threshold: f64,
    pub lo_threshold: f64,
}

impl Default for UpdateRule {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            hi_threshold: 0.7,
            lo_threshold: 0.3,
        }
    }
}

impl UpdateRule {
    pub fn new(alpha: f64, hi_threshold: f64, lo_threshold: f64) -> Result<Self> {
        let rule = Self {
            alpha,
            hi_threshold,
            lo_threshold,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.lo_threshold > 0.0 && self.lo_threshold < 0.5 && self.hi_threshold > 0.5 && self.hi_threshold < 1.0) {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 < lo < 0.5 < hi < 1, got lo={} hi={}",
                self.lo_threshold, self.hi_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Up,
    Down,
    Hold,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Up => "up",
            Decision::Down => "down",
            Decision::Hold => "hold",
        }
    }

    /// Direction of an arbitrary move from `old` to `new`.
    pub fn between(old: f64, new: f64) -> Self {
        if new > old {
            Decision::Up
        } else if new < old {
            Decision::Down
        } else {
            Decision::Hold
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Moves each parameter up by `alpha` when `probs[i] > hi`, down when
/// `probs[i] < lo`, and holds otherwise. `probs[i]` estimates the probability
/// that the target's parameter exceeds `mean[i]`. Exact 0 and 1 (as produced
/// by the oracle comparator) are accepted.
pub fn update_mean(rule: &UpdateRule, probs: &[f64], mean: &ParamVector) -> Result<(ParamVector, Vec<Decision>)> {
    if probs.len() != mean.len() {
        return Err(Error::InvalidParams(format!(
            "{} probabilities for {} parameters",
            probs.len(),
            mean.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParams(format!("probability {p} outside [0, 1]")));
    }
    let (values, decisions) = probs
        .iter()
        .zip(mean.iter())
        .map(|(&p, &m)| {
            if p > rule.hi_threshold {
                (m * (1.0 + rule.alpha), Decision::Up)
            } else if p < rule.lo_threshold {
                (m * (1.0 - rule.alpha), Decision::Down)
            } else {
                (m, Decision::Hold)
            }
        })
        .unzip();
    Ok((ParamVector::floored(values)?, decisions))
}

/// Test double for the classifier: answers from the hidden truth with the
/// same relative equality band the classifier is trained with.
pub fn oracle_comparator(real: &ParamVector, mean: &ParamVector, eta: f64) -> Vec<f64> {
    real.iter()
        .zip(mean.iter())
        .map(|(&r, &m)| {
            if r > m * (1.0 + eta) {
                1.0
            } else if r < m * (1.0 - eta) {
                0.0
            } else {
                0.5
            }
        })
        .collect()
}

/// `mean + alpha * (target - mean)`, floor-clamped.
pub fn step_toward(alpha: f64, target: &[f64], mean: &ParamVector) -> Result<(ParamVector, Vec<Decision>)> {
    if target.len() != mean.len() {
        return Err(Error::InvalidParams(format!(
            "{} targets for {} parameters",
            target.len(),
            mean.len()
        )));
    }
    let values: Vec<f64> = mean.iter().zip(target).map(|(&m, &t)| m + alpha * (t - m)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDivergence(
            "regression update produced a non-finite mean".into(),
        ));
    }
    let next = ParamVector::floored(values)?;
    let decisions = mean
        .iter()
        .zip(next.iter())
        .map(|(&a, &b)| Decision::between(a, b))
        .collect();
    Ok((next, decisions))
}
