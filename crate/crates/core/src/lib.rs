//! Auto-calibration of a randomized simulator from rendered trajectories.
//!
//! A Search Param Model (SPM) is trained on simulated rollouts to answer, per
//! system parameter, whether the parameters that generated a trajectory are
//! higher or lower than a candidate vector. Querying it on rollouts from a
//! target environment with the current randomization mean as the candidate
//! tells the search which way to move each parameter.
//!
//! Module map:
//!
//! * [`param`]: parameter schemas, vectors, uniform randomization, error metrics.
//! * [`envs`]: toy environments, a tiny rasterizer, scripted controllers.
//! * [`nn`]: dense/conv layers with reverse-mode gradients, Adam, checkpoints.
//! * [`spm`]: the classifier, its training pairs and loop, and a regression baseline.
//! * [`search`]: the alternating calibration loop, update rule and baselines.
//! * [`harness`]: run configuration, metrics CSV, run driver and comparisons.

pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod param;
pub mod search;
pub mod seed;
pub mod spm;

pub use envs::{Controller, ControllerKind, EnvId, EnvSpec, EnvState, Frame, PseudoRealEnv, Trajectory};
pub use error::{Error, Result};
pub use harness::{MetricsRow, RunConfig, RunSummary};
pub use param::{ParamDistribution, ParamKind, ParamSchema, ParamVector, PARAM_FLOOR};
pub use search::{AutotuneState, Decision, Method, SearchConfig, UpdateRule};
pub use spm::{RegressionModel, SpmConfig, SpmModel};
