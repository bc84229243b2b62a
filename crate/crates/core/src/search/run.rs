use serde::{Deserialize, Serialize};

use super::buffer::BufferPair;
use super::update::{oracle_comparator, step_toward, update_mean, Decision};
use super::{Method, SearchConfig};
use crate::envs::{collect_real_rollouts, collect_rollouts, ControllerConfig, EnvSpec, PseudoRealEnv, Trajectory};
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::param::{ParamDistribution, ParamVector};
use crate::seed::{rng_for, stream};
use crate::spm::{train_regression, train_spm, RegressionModel, SpmModel, TrainOptions};

/// What answers "which way should the mean move" each round.
#[derive(Debug)]
pub enum Estimator {
    Spm {
        model: Box<SpmModel>,
        adam: AdamState<f32>,
    },
    Regression {
        model: Box<RegressionModel>,
        adam: AdamState<f32>,
    },
    /// Reads the hidden truth; only for testing the search dynamics.
    Oracle {
        truth: ParamVector,
    },
    /// Domain-randomization baseline: the mean never moves.
    Fixed,
}

/// Outcome of pretraining (round 0) or of one search round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Mean after this round's update.
    pub mean: ParamVector,
    /// Aggregated classifier (or oracle) probabilities that drove the update.
    pub aggregate: Option<Vec<f64>>,
    pub decisions: Vec<Decision>,
    /// Average training loss over this round's steps.
    pub train_loss: Option<f64>,
    /// Held-out classifier accuracy, when evaluated this round.
    pub spm_accuracy: Option<Vec<f64>>,
    /// Held-out regression error as a fraction of the encoding scale.
    pub regression_error: Option<Vec<f64>>,
}

/// Window-averaged classifier probabilities at `mean`, averaged over trajectories.
pub fn aggregate_real_predictions(model: &mut SpmModel, real: &[Trajectory], mean: &ParamVector) -> Result<Vec<f64>> {
    if real.is_empty() {
        return Err(Error::InsufficientData("no real trajectories to aggregate".into()));
    }
    let mut acc = vec![0.0; mean.len()];
    for traj in real {
        for (a, p) in acc.iter_mut().zip(model.predict(traj, mean.values())?) {
            *a += p;
        }
    }
    Ok(acc.into_iter().map(|a| a / real.len() as f64).collect())
}

/// Average loss, SPM accuracy and regression error of one training phase.
type TrainOutcome = (Option<f64>, Option<Vec<f64>>, Option<Vec<f64>>);

fn average_loss(losses: &[f64]) -> Option<f64> {
    (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Loop state across rounds.
#[derive(Debug)]
pub struct AutotuneState {
    spec: EnvSpec,
    config: SearchConfig,
    seed: u64,
    round: usize,
    mean: ParamVector,
    initial_mean: ParamVector,
    buffers: BufferPair,
    estimator: Estimator,
    history: Vec<RoundRecord>,
}

impl AutotuneState {
    /// `truth` is consumed only by the oracle method and must be `None`
    /// otherwise.
    pub fn new(
        spec: EnvSpec,
        mut config: SearchConfig,
        initial_mean: ParamVector,
        seed: u64,
        truth: Option<ParamVector>,
    ) -> Result<Self> {
        config.validate()?;
        spec.schema.validate(&initial_mean)?;
        config.spm.eta = config.eta;
        let mut init_rng = rng_for(seed, &[stream::INIT_MODEL]);
        let estimator = match (config.method, truth) {
            (Method::OracleTest, Some(truth)) => {
                spec.schema.validate(&truth)?;
                Estimator::Oracle { truth }
            }
            (Method::OracleTest, None) => return Err(Error::Config("the oracle method needs the hidden truth".into())),
            (_, Some(_)) => return Err(Error::Config("only the oracle method may read the hidden truth".into())),
            (Method::Autotune, None) => {
                let model = SpmModel::new(config.spm.clone(), &spec, &initial_mean, &mut init_rng)?;
                Estimator::Spm {
                    model: Box::new(model),
                    adam: AdamState::new(config.spm.adam),
                }
            }
            (Method::RegressionBaseline, None) => {
                let model = RegressionModel::new(config.spm.clone(), &spec, &initial_mean, &mut init_rng)?;
                Estimator::Regression {
                    model: Box::new(model),
                    adam: AdamState::new(config.spm.adam),
                }
            }
            (Method::DrBaseline, None) => Estimator::Fixed,
        };
        Ok(Self {
            buffers: BufferPair::new(config.sp_capacity, config.policy_capacity)?,
            spec,
            config,
            seed,
            round: 0,
            mean: initial_mean.clone(),
            initial_mean,
            estimator,
            history: Vec::new(),
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn mean(&self) -> &ParamVector {
        &self.mean
    }

    pub fn initial_mean(&self) -> &ParamVector {
        &self.initial_mean
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn buffers(&self) -> &BufferPair {
        &self.buffers
    }

    pub fn estimator_mut(&mut self) -> &mut Estimator {
        &mut self.estimator
    }

    pub fn history(&self) -> &[RoundRecord] {
        &self.history
    }

    fn candidate_bound(&self) -> ParamVector {
        if self.config.track_candidate_bound {
            self.mean.clone()
        } else {
            self.initial_mean.clone()
        }
    }

    fn train_options(&self, steps: usize, evaluate: bool) -> TrainOptions {
        TrainOptions {
            steps,
            batch_size: self.config.batch_size,
            evaluate,
            ..TrainOptions::default()
        }
    }

    /// Trains the learned estimator on the classifier buffer; returns
    /// (average loss, accuracy, regression error).
    fn train(&mut self, steps: usize, evaluate: bool, tags: &[u64]) -> Result<TrainOutcome> {
        if steps == 0 && !evaluate {
            return Ok((None, None, None));
        }
        let opts = self.train_options(steps, evaluate);
        let bound = self.candidate_bound();
        let mut rng = rng_for(self.seed, tags);
        let buffer = self.buffers.sp_refs();
        match &mut self.estimator {
            Estimator::Spm { model, adam } => {
                let m = train_spm(model, adam, &buffer, &bound, &opts, &mut rng)?;
                Ok((average_loss(&m.losses), m.heldout_accuracy, None))
            }
            Estimator::Regression { model, adam } => {
                let m = train_regression(model, adam, &buffer, &opts, &mut rng)?;
                Ok((average_loss(&m.losses), None, m.heldout_abs_error))
            }
            Estimator::Oracle { .. } | Estimator::Fixed => Ok((None, None, None)),
        }
    }

    fn needs_data(&self) -> bool {
        !matches!(self.estimator, Estimator::Oracle { .. })
    }

    /// Fills the classifier buffer from the initial distribution with the
    /// random controller and pretrains. Records round 0.
    pub fn pretrain_phase(&mut self) -> Result<RoundRecord> {
        if self.round != 0 || !self.history.is_empty() {
            return Err(Error::Config("pretraining must happen before the first round".into()));
        }
        let (mut loss, mut acc, mut reg) = (None, None, None);
        if self.needs_data() {
            let dist = ParamDistribution::new(self.mean.clone(), self.config.r_sp)?;
            let trajs = collect_rollouts(
                &self.spec,
                &dist,
                &ControllerConfig::default(),
                self.config.pretrain_trajs,
                self.seed,
                &[stream::PRETRAIN_ROLLOUT],
            )?;
            for t in trajs {
                self.buffers.push_sp(t)?;
            }
            (loss, acc, reg) = self.train(self.config.pretrain_steps, true, &[stream::PRETRAIN_TRAIN])?;
        }
        let record = RoundRecord {
            round: 0,
            mean: self.mean.clone(),
            aggregate: None,
            decisions: vec![Decision::Hold; self.mean.len()],
            train_loss: loss,
            spm_accuracy: acc,
            regression_error: reg,
        };
        self.history.push(record.clone());
        Ok(record)
    }

    /// One round: controller rollouts, classifier data and training, then
    /// an update from `real` rollouts.
    pub fn run_round(&mut self, real: &PseudoRealEnv) -> Result<RoundRecord> {
        if self.history.is_empty() {
            return Err(Error::Config("run the pretraining phase before the first round".into()));
        }
        if real.spec() != &self.spec {
            return Err(Error::Config(
                "pseudo-real environment does not match the simulator".into(),
            ));
        }
        let k = (self.round + 1) as u64;
        let last = self.round + 1 == self.config.rounds;
        let (mut loss, mut acc, mut reg) = (None, None, None);

        if self.needs_data() {
            let width = match self.estimator {
                Estimator::Fixed => self.config.r_dr,
                _ => self.config.r_policy,
            };
            let dist = ParamDistribution::new(self.mean.clone(), width)?;
            let policy = collect_rollouts(
                &self.spec,
                &dist,
                &self.config.controller,
                self.config.policy_rollouts,
                self.seed,
                &[stream::POLICY_ROLLOUT, k],
            )?;
            for t in policy {
                self.buffers.push_policy(t);
            }
            if !matches!(self.estimator, Estimator::Fixed) {
                let dist = ParamDistribution::new(self.mean.clone(), self.config.r_sp)?;
                let sp = collect_rollouts(
                    &self.spec,
                    &dist,
                    &self.config.controller,
                    self.config.sp_rollouts,
                    self.seed,
                    &[stream::SP_ROLLOUT, k],
                )?;
                for t in sp {
                    self.buffers.push_sp(t)?;
                }
                (loss, acc, reg) = self.train(self.config.sim_param_itrs, last, &[stream::SP_TRAIN, k])?;
            }
        }

        let (next, decisions, aggregate) = match &mut self.estimator {
            Estimator::Oracle { truth } => {
                let probs = oracle_comparator(truth, &self.mean, self.config.eta);
                let (next, decisions) = update_mean(&self.config.rule, &probs, &self.mean)?;
                (next, decisions, Some(probs))
            }
            Estimator::Fixed => (self.mean.clone(), vec![Decision::Hold; self.mean.len()], None),
            Estimator::Spm { model, .. } => {
                let reals = collect_real_rollouts(
                    real,
                    self.config.real_rollouts_per_update,
                    self.seed,
                    &[stream::REAL_ROLLOUT, k],
                )?;
                let probs = aggregate_real_predictions(model, &reals, &self.mean)?;
                let (next, _) = update_mean(&self.config.rule, &probs, &self.mean)?;
                // Every candidate above p_max encodes identically, so the
                // classifier carries no signal there.
                let capped = ParamVector::floored(next.iter().zip(model.p_max()).map(|(v, p)| v.min(*p)).collect())?;
                let decisions = self
                    .mean
                    .iter()
                    .zip(capped.iter())
                    .map(|(&a, &b)| Decision::between(a, b))
                    .collect();
                (capped, decisions, Some(probs))
            }
            Estimator::Regression { model, .. } => {
                let reals = collect_real_rollouts(
                    real,
                    self.config.real_rollouts_per_update,
                    self.seed,
                    &[stream::REAL_ROLLOUT, k],
                )?;
                let mut target = vec![0.0; self.mean.len()];
                for traj in &reals {
                    for (t, p) in target.iter_mut().zip(model.predict(traj)?) {
                        *t += p / reals.len() as f64;
                    }
                }
                let (next, decisions) = step_toward(self.config.rule.alpha, &target, &self.mean)?;
                (next, decisions, None)
            }
        };

        self.round += 1;
        self.mean = next;
        let record = RoundRecord {
            round: self.round,
            mean: self.mean.clone(),
            aggregate,
            decisions,
            train_loss: loss,
            spm_accuracy: acc,
            regression_error: reg,
        };
        self.history.push(record.clone());
        Ok(record)
    }

    /// Pretraining followed by all configured rounds; `sink` sees every record.
    pub fn run(&mut self, real: &PseudoRealEnv, mut sink: impl FnMut(&RoundRecord) -> Result<()>) -> Result<()> {
        sink(&self.pretrain_phase()?)?;
        while self.round < self.config.rounds {
            sink(&self.run_round(real)?)?;
        }
        Ok(())
    }
}
