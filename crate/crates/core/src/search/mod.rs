//! The calibration loop: alternating data collection, classifier training
//! and confidence-thresholded updates of the randomization mean.

mod buffer;
mod run;
mod update;

use serde::{Deserialize, Serialize};

use crate::envs::ControllerConfig;
use crate::error::{Error, Result};
use crate::spm::SpmConfig;

pub use buffer::BufferPair;
pub use run::{aggregate_real_predictions, AutotuneState, Estimator, RoundRecord};
pub use update::{oracle_comparator, step_toward, update_mean, Decision, UpdateRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Autotune,
    DrBaseline,
    RegressionBaseline,
    OracleTest,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Autotune,
        Method::DrBaseline,
        Method::RegressionBaseline,
        Method::OracleTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Autotune => "autotune",
            Method::DrBaseline => "dr_baseline",
            Method::RegressionBaseline => "regression_baseline",
            Method::OracleTest => "oracle_test",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything the loop needs besides the environment and the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub method: Method,
    /// Randomization width for classifier training data.
    pub r_sp: f64,
    /// Randomization width for controller rollouts.
    pub r_policy: f64,
    /// Fixed randomization width of the domain-randomization baseline.
    pub r_dr: f64,
    pub rule: UpdateRule,
    /// Relative equality band of the labels and of the oracle.
    pub eta: f64,
    pub rounds: usize,
    pub pretrain_trajs: usize,
    pub pretrain_steps: usize,
    pub sim_param_itrs: usize,
    pub batch_size: usize,
    pub policy_rollouts: usize,
    pub sp_rollouts: usize,
    pub real_rollouts_per_update: usize,
    pub sp_capacity: usize,
    pub policy_capacity: usize,
    /// Draw candidates around the current mean instead of the initial one.
    pub track_candidate_bound: bool,
    pub controller: ControllerConfig,
    pub spm: SpmConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            method: Method::Autotune,
            r_sp: 1.0,
            r_policy: 0.1,
            r_dr: 0.5,
            rule: UpdateRule::default(),
            eta: 0.05,
            rounds: 40,
            pretrain_trajs: 200,
            pretrain_steps: 1000,
            sim_param_itrs: 300,
            batch_size: 128,
            policy_rollouts: 10,
            sp_rollouts: 20,
            real_rollouts_per_update: 5,
            sp_capacity: 500,
            policy_capacity: 1000,
            track_candidate_bound: false,
            controller: ControllerConfig::default(),
            spm: SpmConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        for (name, v) in [("r_sp", self.r_sp), ("r_policy", self.r_policy), ("r_dr", self.r_dr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.r_policy >= self.r_sp {
            return Err(Error::Config(format!(
                "r_policy ({}) must be smaller than r_sp ({})",
                self.r_policy, self.r_sp
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.batch_size == 0 || self.real_rollouts_per_update == 0 || self.rounds == 0 {
            return Err(Error::Config(
                "batch_size, real_rollouts_per_update and K must be positive".into(),
            ));
        }
        if self.sp_capacity == 0 || self.policy_capacity == 0 {
            return Err(Error::Config("buffer capacities must be positive".into()));
        }
        let learned = matches!(self.method, Method::Autotune | Method::RegressionBaseline);
        if learned && (self.pretrain_trajs == 0 || self.pretrain_trajs.min(self.sp_capacity) < 2) {
            return Err(Error::Config(
                "learned methods need at least 2 pretraining trajectories".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
