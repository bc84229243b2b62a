use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{ControllerConfig, EnvId, EnvSpec, DEFAULT_DT, DEFAULT_EPISODE_LEN, DEFAULT_FRAME_SIZE};
use crate::error::{Error, Result};
use crate::param::FactorPreset;
use crate::search::{Method, SearchConfig, UpdateRule};
use crate::spm::SpmConfig;

/// A run as read from a TOML file. Every field except `env_id` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env_id: Option<EnvId>,
    pub seed: u64,
    pub method: Method,
    pub r_sp: f64,
    pub r_policy: f64,
    pub r_dr: f64,
    pub alpha: f64,
    pub hi_threshold: f64,
    pub lo_threshold: f64,
    pub eta: f64,
    #[serde(alias = "K")]
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
    pub misparametrize: FactorPreset,
    /// Explicit per-parameter factors; overrides the preset coin flips.
    pub factors: Option<Vec<f64>>,
    pub frame_size: usize,
    pub episode_len: usize,
    pub dt: f64,
    /// Pseudo-real episodes written as PPM sequences under `frames/`.
    pub dump_frames: usize,
    pub track_candidate_bound: bool,
    pub controller: ControllerConfig,
    pub spm: SpmConfig,
    /// Not part of the config hash.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SearchConfig::default();
        Self {
            env_id: None,
            seed: 0,
            method: s.method,
            r_sp: s.r_sp,
            r_policy: s.r_policy,
            r_dr: s.r_dr,
            alpha: s.rule.alpha,
            hi_threshold: s.rule.hi_threshold,
            lo_threshold: s.rule.lo_threshold,
            eta: s.eta,
            rounds: s.rounds,
            pretrain_trajs: s.pretrain_trajs,
            pretrain_steps: s.pretrain_steps,
            sim_param_itrs: s.sim_param_itrs,
            batch_size: s.batch_size,
            policy_rollouts: s.policy_rollouts,
            sp_rollouts: s.sp_rollouts,
            real_rollouts_per_update: s.real_rollouts_per_update,
            sp_capacity: s.sp_capacity,
            policy_capacity: s.policy_capacity,
            misparametrize: FactorPreset::Double,
            factors: None,
            frame_size: DEFAULT_FRAME_SIZE,
            episode_len: DEFAULT_EPISODE_LEN,
            dt: DEFAULT_DT,
            dump_frames: 0,
            track_candidate_bound: s.track_candidate_bound,
            controller: s.controller,
            spm: s.spm,
            out_dir: None,
        }
    }
}

/// 1-based line of the first `key = ...` assignment in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

impl RunConfig {
    pub fn for_env(env: EnvId) -> Self {
        Self {
            env_id: Some(env),
            ..Self::default()
        }
    }

    /// Parses and validates TOML text. Errors name the offending line.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => Error::Config(format!("line {l}: {}", e.message())),
                None => Error::Config(e.message().to_string()),
            }
        })?;
        config.validate().map_err(|e| match e {
            Error::Config(msg) => {
                let key = msg.split_whitespace().next().unwrap_or_default();
                match line_of(text, key) {
                    Some(l) => Error::Config(format!("line {l}: {msg}")),
                    None => Error::Config(msg),
                }
            }
            other => other,
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// The environment; validated configs always have one.
    pub fn env(&self) -> Result<EnvId> {
        self.env_id.ok_or_else(|| Error::Config("env_id is required".into()))
    }

    /// Messages start with the offending key so parse errors can point at its line.
    pub fn validate(&self) -> Result<()> {
        let env = self.env()?;
        for (key, v) in [
            ("r_sp", self.r_sp),
            ("r_policy", self.r_policy),
            ("r_dr", self.r_dr),
            ("alpha", self.alpha),
            ("eta", self.eta),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if self.r_policy >= self.r_sp {
            return Err(Error::Config(format!(
                "r_policy ({}) must be smaller than r_sp ({})",
                self.r_policy, self.r_sp
            )));
        }
        for (key, v) in [
            ("rounds", self.rounds),
            ("batch_size", self.batch_size),
            ("real_rollouts_per_update", self.real_rollouts_per_update),
            ("sp_capacity", self.sp_capacity),
            ("policy_capacity", self.policy_capacity),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        if let Some(f) = &self.factors {
            let n = env.schema().len();
            if f.len() != n {
                return Err(Error::Config(format!(
                    "factors has {} entries, {env} has {n} parameters",
                    f.len()
                )));
            }
            if f.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::Config("factors must be positive".into()));
            }
        }
        UpdateRule::new(self.alpha, self.hi_threshold, self.lo_threshold)
            .map_err(|e| Error::Config(format!("hi_threshold / lo_threshold / alpha: {e}")))?;
        self.env_spec()?;
        self.search_config().validate()
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        EnvSpec::with_dt(self.env()?, self.frame_size, self.episode_len, self.dt)
            .map_err(|e| Error::Config(format!("frame_size / episode_len / dt: {e}")))
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            method: self.method,
            r_sp: self.r_sp,
            r_policy: self.r_policy,
            r_dr: self.r_dr,
            rule: UpdateRule {
                alpha: self.alpha,
                hi_threshold: self.hi_threshold,
                lo_threshold: self.lo_threshold,
            },
            eta: self.eta,
            rounds: self.rounds,
            pretrain_trajs: self.pretrain_trajs,
            pretrain_steps: self.pretrain_steps,
            sim_param_itrs: self.sim_param_itrs,
            batch_size: self.batch_size,
            policy_rollouts: self.policy_rollouts,
            sp_rollouts: self.sp_rollouts,
            real_rollouts_per_update: self.real_rollouts_per_update,
            sp_capacity: self.sp_capacity,
            policy_capacity: self.policy_capacity,
            track_candidate_bound: self.track_candidate_bound,
            controller: self.controller.clone(),
            spm: SpmConfig {
                eta: self.eta,
                ..self.spm.clone()
            },
        }
    }

    /// SHA-256 over the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            out_dir: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("run config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_alone_gets_documented_defaults() {
        let c = RunConfig::from_toml_str("env_id = \"bouncing_ball\"\n").unwrap();
        assert_eq!(c.env_id, Some(EnvId::BouncingBall));
        assert_eq!((c.r_sp, c.r_policy, c.r_dr), (1.0, 0.1, 0.5));
        assert_eq!((c.batch_size, c.real_rollouts_per_update, c.rounds), (128, 5, 40));
        assert_eq!(c.misparametrize, FactorPreset::Double);
        assert_eq!(c.method, Method::Autotune);
    }

    #[test]
    fn policy_range_must_be_narrower() {
        let text = "env_id = \"bouncing_ball\"\nr_sp = 1\nr_policy = 2\n";
        let err = RunConfig::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("r_policy"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected_with_lines() {
        let err = RunConfig::from_toml_str("env_id = \"sliding_block\"\n\nbogus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
        let err = RunConfig::from_toml_str("env_id = \"sliding_block\"\nalpha = -1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(RunConfig::from_toml_str("seed = 1\n").is_err());
        assert!(RunConfig::from_toml_str("env_id = \"moon\"\n").is_err());
        assert!(RunConfig::from_toml_str("env_id = \"sliding_block\"\nfactors = [2.0]\n").is_err());
        assert!(RunConfig::from_toml_str("env_id = \"sliding_block\"\nframe_size = 20\n").is_err());
        assert!(RunConfig::from_toml_str("env_id = \"sliding_block\"\nhi_threshold = 0.4\n").is_err());
    }

    #[test]
    fn nested_tables_parse() {
        let text =
            "env_id = \"damped_pendulum\"\nmethod = \"regression_baseline\"\nK = 7\nmisparametrize = \"4/3x-3/4x\"\n\
                    [controller]\nkind = \"sinusoid\"\n[spm]\nhidden = 64\n";
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.rounds, 7);
        assert_eq!(c.spm.hidden, 64);
        assert_eq!(c.misparametrize, FactorPreset::FourThirds);
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::for_env(EnvId::BouncingBall);
        let b = RunConfig {
            out_dir: Some("elsewhere".into()),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::for_env(EnvId::BouncingBall).hash());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }
}
