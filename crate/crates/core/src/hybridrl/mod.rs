//! Hybrid discrete/continuous action reinforcement learning.
//!
//! An action is a pair `(k, x_k)`: a discrete branch k and a continuous
//! parameter inside that branch's interval. Branch indices are 0-based.

pub mod agent;
pub mod env;
pub mod mlp;
pub mod weights;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use agent::{AgentConfig, HybridAgent, ReplayMemory, StepStats};
pub use env::{HetNetEnv, HetNetEnvConfig};

use crate::{Error, Result};

/// Per-branch intervals `X_k = [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridActionSpace {
    pub bounds: Vec<(f64, f64)>,
}

impl HybridActionSpace {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::invalid("action space needs at least one branch"));
        }
        if let Some((k, _)) = bounds.iter().enumerate().find(|(_, (lo, hi))| !(lo < hi)) {
            return Err(Error::invalid(format!("branch {k} has an empty interval")));
        }
        Ok(HybridActionSpace { bounds })
    }

    /// `n` branches, all on the unit interval.
    pub fn unit(n: usize) -> Self {
        HybridActionSpace {
            bounds: vec![(0.0, 1.0); n],
        }
    }

    pub fn num_actions(&self) -> usize {
        self.bounds.len()
    }

    pub fn mid_half(&self, k: usize) -> (f64, f64) {
        let (lo, hi) = self.bounds[k];
        ((lo + hi) / 2.0, (hi - lo) / 2.0)
    }

    /// Maps an unbounded pre-activation into `X_k` through tanh.
    pub fn squash(&self, k: usize, z: f64) -> f64 {
        let (mid, half) = self.mid_half(k);
        let (lo, hi) = self.bounds[k];
        (mid + half * z.tanh()).clamp(lo, hi)
    }

    pub fn check(&self, k: usize, x: f64) -> Result<()> {
        let Some(&(lo, hi)) = self.bounds.get(k) else {
            return Err(Error::InvalidAction(format!("branch {k} out of range")));
        };
        if !(lo..=hi).contains(&x) {
            return Err(Error::ActionOutOfBounds {
                branch: k,
                value: x,
                lo,
                hi,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    pub k: usize,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: HybridAction,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True terminal state: no bootstrapping past it.
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    /// Episode cut by a time limit; the next state is still bootstrapped.
    pub truncated: bool,
}

pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_space(&self) -> HybridActionSpace;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &HybridAction) -> Result<Step>;
}

/// Single-state bandit with reward `b_k - (x - c_k)^2` on `X_k = [0, 1]`.
/// The optimum is the branch with the largest `b_k` at `x = c_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticBandit {
    pub offsets: Vec<f64>,
    pub centers: Vec<f64>,
}

impl Default for AnalyticBandit {
    fn default() -> Self {
        AnalyticBandit {
            offsets: vec![1.0, 0.5],
            centers: vec![0.3, 0.7],
        }
    }
}

impl AnalyticBandit {
    pub fn reward(&self, action: &HybridAction) -> f64 {
        self.offsets[action.k] - (action.x - self.centers[action.k]).powi(2)
    }

    pub fn optimum(&self) -> HybridAction {
        let k = (0..self.offsets.len()).fold(0, |best, k| {
            if self.offsets[k] > self.offsets[best] {
                k
            } else {
                best
            }
        });
        HybridAction {
            k,
            x: self.centers[k],
        }
    }
}

impl Environment for AnalyticBandit {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_space(&self) -> HybridActionSpace {
        HybridActionSpace::unit(self.offsets.len())
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        vec![1.0]
    }

    fn step(&mut self, action: &HybridAction) -> Result<Step> {
        self.action_space().check(action.k, action.x)?;
        Ok(Step {
            next_state: vec![1.0],
            reward: self.reward(action),
            terminal: true,
            truncated: false,
        })
    }
}

/// Small deterministic MDP with one-hot states: reward
/// `b[s][k] - (x - c[s][k])^2` on `[0, 1]`, next state `next[s][k]`,
/// episodes truncated after `horizon` steps and started from a uniformly
/// drawn state. With every `c` on a grid, value iteration over that grid is
/// exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMdp {
    pub offsets: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub next: Vec<Vec<usize>>,
    pub horizon: usize,
    state: usize,
    t: usize,
}

impl ChainMdp {
    pub fn new(
        offsets: Vec<Vec<f64>>,
        centers: Vec<Vec<f64>>,
        next: Vec<Vec<usize>>,
        horizon: usize,
    ) -> Self {
        ChainMdp {
            offsets,
            centers,
            next,
            horizon,
            state: 0,
            t: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len()
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        (0..self.num_states())
            .map(|i| f64::from(u8::from(i == s)))
            .collect()
    }

    pub fn reward(&self, s: usize, action: &HybridAction) -> f64 {
        self.offsets[s][action.k] - (action.x - self.centers[s][action.k]).powi(2)
    }
}

impl Environment for ChainMdp {
    fn state_dim(&self) -> usize {
        self.num_states()
    }

    fn action_space(&self) -> HybridActionSpace {
        HybridActionSpace::unit(self.offsets[0].len())
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.state = (rng.next_u64() % self.num_states() as u64) as usize;
        self.t = 0;
        self.one_hot(self.state)
    }

    fn step(&mut self, action: &HybridAction) -> Result<Step> {
        self.action_space().check(action.k, action.x)?;
        let reward = self.reward(self.state, action);
        self.state = self.next[self.state][action.k];
        self.t += 1;
        Ok(Step {
            next_state: self.one_hot(self.state),
            reward,
            terminal: false,
            truncated: self.t >= self.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squash_stays_in_bounds() {
        let space = HybridActionSpace::new(vec![(-2.0, 3.0), (0.0, 1.0)]).unwrap();
        for z in [-1e9, -3.0, 0.0, 0.4, 50.0, 1e300] {
            for k in 0..2 {
                let x = space.squash(k, z);
                assert!(space.check(k, x).is_ok(), "{k} {z} {x}");
            }
        }
        assert_eq!(space.squash(0, 0.0), 0.5);
    }

    #[test]
    fn action_space_validation() {
        assert!(HybridActionSpace::new(vec![]).is_err());
        assert!(HybridActionSpace::new(vec![(1.0, 1.0)]).is_err());
        let s = HybridActionSpace::unit(2);
        assert!(matches!(
            s.check(0, 1.5),
            Err(Error::ActionOutOfBounds { .. })
        ));
        assert!(matches!(s.check(2, 0.5), Err(Error::InvalidAction(_))));
    }

    #[test]
    fn bandit_optimum() {
        let b = AnalyticBandit::default();
        assert_eq!(b.optimum(), HybridAction { k: 0, x: 0.3 });
        assert_eq!(b.reward(&b.optimum()), 1.0);
    }
}
