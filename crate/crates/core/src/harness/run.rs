use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::{rows_for, unix_now, write_param_table, MetricsWriter};
use crate::envs::{write_ppm, PseudoRealEnv};
use crate::error::{Error, Result};
use crate::param::{mean_of, misparametrize, percent_error, ParamVector};
use crate::search::{AutotuneState, Estimator, Method, RoundRecord};
use crate::seed::{rng_for, stream};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const STATE_FILE: &str = "run_state.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Written after every round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub round: usize,
    pub mean: ParamVector,
    pub config_hash: String,
    /// Relative to the run directory; `None` for methods without a model.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub env_id: String,
    pub method: Method,
    pub seed: u64,
    pub blind: bool,
    pub config_hash: String,
    pub rounds: usize,
    pub param_names: Vec<String>,
    pub initial_mean: ParamVector,
    pub final_mean: ParamVector,
    /// Per-parameter percent errors; absent in blind runs.
    pub initial_percent_error: Option<Vec<f64>>,
    pub final_percent_error: Option<Vec<f64>>,
    pub initial_mean_percent_error: Option<f64>,
    pub final_mean_percent_error: Option<f64>,
    /// First round whose percent error is below 10%, per parameter.
    pub first_round_below_10: Option<Vec<Option<usize>>>,
    pub pretrain_accuracy: Option<Vec<f64>>,
    pub final_accuracy: Option<Vec<f64>>,
    pub final_regression_error: Option<Vec<f64>>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Initial mean for a config: explicit factors or preset coin flips on the truth.
pub fn initial_mean(config: &RunConfig, truth: &ParamVector) -> Result<ParamVector> {
    let factors = match &config.factors {
        Some(f) => f.clone(),
        None => config
            .misparametrize
            .draw(truth.len(), &mut rng_for(config.seed, &[stream::MISPARAMETRIZE])),
    };
    misparametrize(truth, &factors)
}

fn save_checkpoint(state: &mut AutotuneState, path: &Path) -> Result<Option<PathBuf>> {
    match state.estimator_mut() {
        Estimator::Spm { model, .. } => model.save(path)?,
        Estimator::Regression { model, .. } => model.save(path)?,
        Estimator::Oracle { .. } | Estimator::Fixed => return Ok(None),
    }
    Ok(Some(PathBuf::from(CHECKPOINT_FILE)))
}

fn dump_frames(env: &PseudoRealEnv, config: &RunConfig, dir: &Path) -> Result<()> {
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for ep in 0..config.dump_frames {
        let traj = env.rollout(&mut rng_for(config.seed, &[stream::FRAME_DUMP, ep as u64]))?;
        for (t, frame) in traj.frames.iter().enumerate() {
            write_ppm(frame, &frames_dir.join(format!("ep{ep:03}_t{t:03}.ppm")))?;
        }
    }
    Ok(())
}

/// Runs one configured experiment into `out`.
///
/// With `blind` the hidden parameters are never passed to the method and
/// their columns stay empty; the oracle method is rejected since it reads them.
pub fn cmd_run(config: &RunConfig, blind: bool, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    if blind && config.method == Method::OracleTest {
        return Err(Error::Config(
            "the oracle method reads hidden parameters and cannot run blind".into(),
        ));
    }
    let env_id = config.env()?;
    let spec = config.env_spec()?;
    let schema = spec.schema.clone();
    let real = PseudoRealEnv::new(spec.clone(), env_id.preset_real_params(), config.controller.clone())?;
    // Evaluation-only view of the truth; the method sees it only as the oracle.
    let eval_truth = (!blind).then(|| real.hidden_truth().clone());
    let initial = initial_mean(config, real.hidden_truth())?;
    let hash = config.hash();

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_path = out.join(CONFIG_FILE);
    std::fs::write(&config_path, config.to_toml_string()).map_err(|e| Error::io(&config_path, e))?;
    write_param_table(&schema, &initial, &out.join("initial_mean.toml"))?;
    if config.dump_frames > 0 {
        dump_frames(&real, config, out)?;
    }

    let oracle_truth = (config.method == Method::OracleTest).then(|| real.hidden_truth().clone());
    let mut state = AutotuneState::new(spec, config.search_config(), initial.clone(), config.seed, oracle_truth)?;
    let mut writer = MetricsWriter::create(&out.join(METRICS_FILE))?;
    let mut history: Vec<RoundRecord> = Vec::with_capacity(config.rounds + 1);

    loop {
        let record = if history.is_empty() {
            state.pretrain_phase()?
        } else {
            state.run_round(&real)?
        };
        writer.write_rows(&rows_for(&schema, &record, eval_truth.as_ref(), &hash, unix_now())?)?;
        let checkpoint = save_checkpoint(&mut state, &out.join(CHECKPOINT_FILE))?;
        let run_state = RunState {
            round: record.round,
            mean: record.mean.clone(),
            config_hash: hash.clone(),
            checkpoint,
        };
        write_json(&out.join(STATE_FILE), &run_state)?;
        history.push(record);
        if state.round() >= config.rounds {
            break;
        }
    }

    let final_mean = state.mean().clone();
    write_param_table(&schema, &final_mean, &out.join("final_mean.toml"))?;
    let errors = eval_truth
        .as_ref()
        .map(|t| {
            history
                .iter()
                .map(|r| percent_error(&r.mean, t))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let first_below = errors.as_ref().map(|errs| {
        (0..schema.len())
            .map(|i| errs.iter().position(|e| e[i] < 10.0).map(|k| history[k].round))
            .collect()
    });
    let initial_err = errors.as_ref().map(|e| e[0].clone());
    let final_err = errors.as_ref().map(|e| e[e.len() - 1].clone());
    let summary = RunSummary {
        env_id: env_id.to_string(),
        method: config.method,
        seed: config.seed,
        blind,
        config_hash: hash,
        rounds: config.rounds,
        param_names: schema.names().map(str::to_string).collect(),
        initial_mean: initial,
        final_mean,
        initial_mean_percent_error: initial_err.as_deref().map(mean_of),
        final_mean_percent_error: final_err.as_deref().map(mean_of),
        initial_percent_error: initial_err,
        final_percent_error: final_err,
        first_round_below_10: first_below,
        pretrain_accuracy: history[0].spm_accuracy.clone(),
        final_accuracy: history
            .iter()
            .rev()
            .find_map(|r| r.spm_accuracy.clone())
            .filter(|_| history.len() > 1),
        final_regression_error: history.iter().rev().find_map(|r| r.regression_error.clone()),
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}
