//! Parametrized toy environments rendered to small RGB frames.
//!
//! Each environment exposes one or two dynamics parameters and several visual
//! parameters. Dynamics are integrated with semi-implicit Euler; rendering is a
//! pure function of state and parameters.

mod controller;
mod physics;
mod render;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use controller::{Controller, ControllerConfig, ControllerKind};
pub use physics::{BALL_RADIUS, BLOCK_FORCE_MAX, PENDULUM_LENGTH, STANDARD_GRAVITY, SUBSTEPS};
pub use render::{write_ppm, Frame};

use crate::error::{Error, Result};
use crate::param::{ParamDistribution, ParamEntry, ParamKind, ParamSchema, ParamVector};
use crate::seed::{rng_for, Rng};

pub const DEFAULT_DT: f64 = 0.02;
pub const DEFAULT_FRAME_SIZE: usize = 32;
pub const DEFAULT_EPISODE_LEN: usize = 60;
pub const MIN_EPISODE_LEN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    BouncingBall,
    DampedPendulum,
    SlidingBlock,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::BouncingBall, EnvId::DampedPendulum, EnvId::SlidingBlock];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::BouncingBall => "bouncing_ball",
            EnvId::DampedPendulum => "damped_pendulum",
            EnvId::SlidingBlock => "sliding_block",
        }
    }

    pub fn action_dim(self) -> usize {
        1
    }

    pub fn schema(self) -> ParamSchema {
        let dynamics = |name: &str, scale: f64, unit: &str| ParamEntry {
            name: name.into(),
            kind: ParamKind::Dynamics,
            reference_scale: scale,
            unit: unit.into(),
        };
        let rgb = |prefix: &str| {
            ["r", "g", "b"].map(|c| ParamEntry {
                name: format!("{prefix}_{c}"),
                kind: ParamKind::Visual,
                reference_scale: 1.0,
                unit: "channel".into(),
            })
        };
        let mut entries = Vec::new();
        match self {
            EnvId::BouncingBall => {
                entries.push(dynamics("gravity", STANDARD_GRAVITY, "m/s^2"));
                entries.push(dynamics("restitution", 1.0, "ratio"));
                entries.extend(rgb("ball"));
                entries.extend(rgb("background"));
            }
            EnvId::DampedPendulum => {
                entries.push(dynamics("mass", 1.0, "kg"));
                entries.push(dynamics("damping", 1.0, "N*m*s"));
                entries.extend(rgb("rod"));
                entries.extend(rgb("background"));
            }
            EnvId::SlidingBlock => {
                entries.push(dynamics("friction", 1.0, "coefficient"));
                entries.push(dynamics("mass", 1.0, "kg"));
                entries.push(ParamEntry {
                    name: "brightness".into(),
                    kind: ParamKind::Visual,
                    reference_scale: 1.0,
                    unit: "gain".into(),
                });
                entries.extend(rgb("block"));
            }
        }
        ParamSchema::new(entries).expect("built-in schemas are valid")
    }

    /// Parameters of the stand-in "real" environment shipped with each env.
    pub fn preset_real_params(self) -> ParamVector {
        let v = match self {
            EnvId::BouncingBall => vec![9.8, 0.45, 0.45, 0.40, 0.30, 0.10, 0.15, 0.10],
            EnvId::DampedPendulum => vec![1.0, 0.6, 0.45, 0.30, 0.12, 0.12, 0.20, 0.35],
            EnvId::SlidingBlock => vec![0.3, 1.0, 0.8, 0.40, 0.25, 0.15],
        };
        ParamVector::new(v).expect("preset parameters are positive")
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown env_id {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub env_id: EnvId,
    pub schema: ParamSchema,
    pub dt: f64,
    pub frame_size: usize,
    pub action_dim: usize,
    pub episode_len: usize,
}

impl EnvSpec {
    pub fn new(env_id: EnvId, frame_size: usize, episode_len: usize) -> Result<Self> {
        Self::with_dt(env_id, frame_size, episode_len, DEFAULT_DT)
    }

    pub fn with_dt(env_id: EnvId, frame_size: usize, episode_len: usize, dt: f64) -> Result<Self> {
        if ![16, 32, 64].contains(&frame_size) {
            return Err(Error::Config(format!(
                "frame_size must be 16, 32 or 64, got {frame_size}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if episode_len < MIN_EPISODE_LEN {
            return Err(Error::Config(format!(
                "episode_len must be at least {MIN_EPISODE_LEN}, got {episode_len}"
            )));
        }
        Ok(Self {
            env_id,
            schema: env_id.schema(),
            dt,
            frame_size,
            action_dim: env_id.action_dim(),
            episode_len,
        })
    }

    pub fn default_for(env_id: EnvId) -> Self {
        Self::new(env_id, DEFAULT_FRAME_SIZE, DEFAULT_EPISODE_LEN).expect("defaults are valid")
    }

    pub fn num_params(&self) -> usize {
        self.schema.len()
    }
}

/// Physical state. Layout of `vars` per env:
/// bouncing_ball `[x, y, vx, vy]`, damped_pendulum `[theta, omega]`,
/// sliding_block `[x, v]`. Positions in metres over a unit arena.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub vars: Vec<f64>,
    pub step: usize,
}

/// Samples the initial state.
///
/// * bouncing_ball: height 0.9, zero velocity, x uniform in [0.3, 0.7].
/// * damped_pendulum: angle uniform in [0.5, 1.0] rad with random sign, at rest.
/// * sliding_block: centre uniform in [0.4, 0.6], at rest.
pub fn env_reset<R: rand::Rng + ?Sized>(spec: &EnvSpec, params: &ParamVector, rng: &mut R) -> Result<EnvState> {
    spec.schema.validate(params)?;
    let vars = match spec.env_id {
        EnvId::BouncingBall => vec![rng.random_range(0.3..=0.7), 0.9, 0.0, 0.0],
        EnvId::DampedPendulum => {
            let mag: f64 = rng.random_range(0.5..=1.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            vec![sign * mag, 0.0]
        }
        EnvId::SlidingBlock => vec![rng.random_range(0.4..=0.6), 0.0],
    };
    Ok(EnvState { vars, step: 0 })
}

/// Advances one control step of `spec.dt`. Actions are clamped to [-1, 1].
pub fn env_step(spec: &EnvSpec, state: &EnvState, action: &[f64], params: &ParamVector) -> Result<EnvState> {
    spec.schema.validate(params)?;
    if action.len() != spec.action_dim {
        return Err(Error::Shape(format!(
            "expected action of dim {}, got {}",
            spec.action_dim,
            action.len()
        )));
    }
    let a: Vec<f64> = action.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
    let mut vars = state.vars.clone();
    physics::integrate(spec.env_id, &mut vars, &a, params.values(), spec.dt);
    Ok(EnvState {
        vars,
        step: (state.step + 1).min(spec.episode_len),
    })
}

pub fn render(spec: &EnvSpec, state: &EnvState, params: &ParamVector) -> Frame {
    render::rasterize(spec.env_id, spec.frame_size, &state.vars, params.values())
}

/// Observation/action sequence. `gen_params` is present only for simulated
/// rollouts whose parameters the consumer is allowed to see.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub actions: Vec<Vec<f32>>,
    pub gen_params: Option<ParamVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn rollout(
    spec: &EnvSpec,
    params: &ParamVector,
    controller: &ControllerConfig,
    rng: &mut Rng,
) -> Result<Trajectory> {
    let mut state = env_reset(spec, params, rng)?;
    let mut ctrl = controller.instantiate(spec, rng.random());
    let mut frames = Vec::with_capacity(spec.episode_len);
    let mut actions = Vec::with_capacity(spec.episode_len);
    for t in 0..spec.episode_len {
        frames.push(render(spec, &state, params));
        let a = ctrl.act(&state, t);
        state = env_step(spec, &state, &a, params)?;
        actions.push(a.iter().map(|&x| x as f32).collect());
    }
    Ok(Trajectory {
        frames,
        actions,
        gen_params: Some(params.clone()),
    })
}

/// Environment with fixed parameters that it does not reveal through its
/// trajectories.
#[derive(Clone, Debug)]
pub struct PseudoRealEnv {
    spec: EnvSpec,
    hidden: ParamVector,
    controller: ControllerConfig,
}

impl PseudoRealEnv {
    pub fn new(spec: EnvSpec, real_params: ParamVector, controller: ControllerConfig) -> Result<Self> {
        spec.schema.validate(&real_params)?;
        Ok(Self {
            spec,
            hidden: real_params,
            controller,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn rollout(&self, rng: &mut Rng) -> Result<Trajectory> {
        let mut t = rollout(&self.spec, &self.hidden, &self.controller, rng)?;
        t.gen_params = None;
        Ok(t)
    }

    /// Privileged accessor for evaluation metrics and the oracle comparator.
    pub fn hidden_truth(&self) -> &ParamVector {
        &self.hidden
    }
}

fn sim_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("AUTOTUNE_SIM_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("sim-{i}"))
            .build()
            .expect("failed to build rollout thread pool")
    })
}

/// Runs `count` simulated episodes with parameters drawn from `dist`.
///
/// Episode `i` uses the stream `(seed, tags.., i)` for both the parameter
/// draw and the rollout, so the result is independent of thread count.
pub fn collect_rollouts(
    spec: &EnvSpec,
    dist: &ParamDistribution,
    controller: &ControllerConfig,
    count: usize,
    seed: u64,
    tags: &[u64],
) -> Result<Vec<Trajectory>> {
    sim_pool().install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut path = tags.to_vec();
                path.push(i as u64);
                let mut rng = rng_for(seed, &path);
                let params = dist.sample(&mut rng);
                rollout(spec, &params, controller, &mut rng)
            })
            .collect()
    })
}

/// Same seeding scheme as [`collect_rollouts`] for the pseudo-real handle.
pub fn collect_real_rollouts(env: &PseudoRealEnv, count: usize, seed: u64, tags: &[u64]) -> Result<Vec<Trajectory>> {
    sim_pool().install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut path = tags.to_vec();
                path.push(i as u64);
                env.rollout(&mut rng_for(seed, &path))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests;
