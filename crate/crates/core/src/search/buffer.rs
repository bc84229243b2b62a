use std::collections::VecDeque;

use crate::envs::Trajectory;
use crate::error::{Error, Result};

/// Bounded FIFO stores for classifier training data and controller rollouts.
#[derive(Clone, Debug)]
pub struct BufferPair {
    sp: VecDeque<Trajectory>,
    policy: VecDeque<Trajectory>,
    sp_capacity: usize,
    policy_capacity: usize,
}

impl BufferPair {
    pub fn new(sp_capacity: usize, policy_capacity: usize) -> Result<Self> {
        if sp_capacity == 0 || policy_capacity == 0 {
            return Err(Error::Config("buffer capacities must be positive".into()));
        }
        Ok(Self {
            sp: VecDeque::with_capacity(sp_capacity),
            policy: VecDeque::new(),
            sp_capacity,
            policy_capacity,
        })
    }

    /// Classifier buffer entries must carry their generating parameters.
    pub fn push_sp(&mut self, traj: Trajectory) -> Result<()> {
        if traj.gen_params.is_none() {
            return Err(Error::InvalidParams(
                "classifier buffer needs trajectories with parameters".into(),
            ));
        }
        if self.sp.len() == self.sp_capacity {
            self.sp.pop_front();
        }
        self.sp.push_back(traj);
        Ok(())
    }

    pub fn push_policy(&mut self, traj: Trajectory) {
        if self.policy.len() == self.policy_capacity {
            self.policy.pop_front();
        }
        self.policy.push_back(traj);
    }

    pub fn sp(&self) -> &VecDeque<Trajectory> {
        &self.sp
    }

    pub fn policy(&self) -> &VecDeque<Trajectory> {
        &self.policy
    }

    pub fn sp_refs(&self) -> Vec<&Trajectory> {
        self.sp.iter().collect()
    }
}
