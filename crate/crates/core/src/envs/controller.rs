use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{EnvId, EnvSpec, EnvState};
use crate::seed::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Independent uniform actions in [-1, 1] every step.
    Random,
    /// `sin(2 pi f t + phase)` with frequency and phase drawn per episode.
    Sinusoid,
    /// Proportional-derivative pull toward a target drawn per episode.
    ScriptedReach,
}

/// Serializable controller description; [`ControllerConfig::instantiate`]
/// binds it to an episode seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    #[serde(default = "default_freq_range")]
    pub freq_range_hz: (f64, f64),
    #[serde(default = "default_gain")]
    pub gain: f64,
}

fn default_freq_range() -> (f64, f64) {
    (0.5, 2.0)
}

fn default_gain() -> f64 {
    4.0
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::new(ControllerKind::Random)
    }
}

impl ControllerConfig {
    pub fn new(kind: ControllerKind) -> Self {
        Self {
            kind,
            freq_range_hz: default_freq_range(),
            gain: default_gain(),
        }
    }

    pub fn instantiate(&self, spec: &EnvSpec, seed: u64) -> Controller {
        let mut rng = Rng::seed_from_u64(seed);
        let dims = spec.action_dim;
        let (f_lo, f_hi) = self.freq_range_hz;
        let freqs = (0..dims).map(|_| rng.random_range(f_lo..=f_hi)).collect();
        let phases = (0..dims)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let target = match spec.env_id {
            EnvId::BouncingBall | EnvId::SlidingBlock => rng.random_range(0.2..=0.8),
            EnvId::DampedPendulum => rng.random_range(-1.0..=1.0),
        };
        Controller {
            config: self.clone(),
            env: spec.env_id,
            dims,
            dt: spec.dt,
            freqs,
            phases,
            target,
            rng,
        }
    }
}

/// Episode-bound action source. Every emitted action lies in [-1, 1].
#[derive(Clone, Debug)]
pub struct Controller {
    config: ControllerConfig,
    env: EnvId,
    dims: usize,
    dt: f64,
    freqs: Vec<f64>,
    phases: Vec<f64>,
    target: f64,
    rng: Rng,
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        self.config.kind
    }

    pub fn act(&mut self, state: &EnvState, t: usize) -> Vec<f64> {
        match self.config.kind {
            ControllerKind::Random => (0..self.dims).map(|_| self.rng.random_range(-1.0..=1.0)).collect(),
            ControllerKind::Sinusoid => {
                let time = t as f64 * self.dt;
                self.freqs
                    .iter()
                    .zip(&self.phases)
                    .map(|(f, ph)| (std::f64::consts::TAU * f * time + ph).sin())
                    .collect()
            }
            ControllerKind::ScriptedReach => {
                let (pos, vel) = match self.env {
                    EnvId::BouncingBall => (state.vars[0], state.vars[2]),
                    EnvId::DampedPendulum | EnvId::SlidingBlock => (state.vars[0], state.vars[1]),
                };
                let u = self.config.gain * (self.target - pos) - 0.5 * vel;
                vec![u.clamp(-1.0, 1.0); self.dims]
            }
        }
    }
}
