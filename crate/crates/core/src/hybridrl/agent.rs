//! Parameterized-action Q-learning: a Q network over `(s, k, x_k)` and a
//! deterministic policy network producing `x_k(s)` for every discrete
//! branch.

use std::collections::VecDeque;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, Optimizer, OptimizerKind};
use super::{Environment, HybridAction, HybridActionSpace, Transition};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub q_hidden: Vec<usize>,
    pub policy_hidden: Vec<usize>,
    pub lr_q: f64,
    pub lr_policy: f64,
    pub optimizer: OptimizerKind,
    /// Discount `gamma_d` in [0, 1).
    pub discount: f64,
    /// Soft target-update rate.
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Gaussian noise scale on `x`, as a fraction of the interval half-width.
    pub noise_start: f64,
    pub noise_end: f64,
    /// Environment steps over which epsilon and the noise scale decay linearly.
    pub decay_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            q_hidden: vec![32, 32],
            policy_hidden: vec![16],
            lr_q: 3e-3,
            lr_policy: 1e-3,
            optimizer: OptimizerKind::Adam,
            discount: 0.9,
            tau: 0.01,
            batch_size: 32,
            replay_capacity: 10_000,
            warmup: 64,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            noise_start: 0.5,
            noise_end: 0.05,
            decay_steps: 2000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..1.0).contains(&self.discount) {
            errs.push(format!(
                "discount must be in [0, 1) (got {})",
                self.discount
            ));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            errs.push(format!("tau must be in (0, 1] (got {})", self.tau));
        }
        if self.batch_size == 0 {
            errs.push("batch_size must be >= 1".into());
        }
        if self.replay_capacity < self.batch_size {
            errs.push("replay_capacity must be >= batch_size".into());
        }
        for (name, v) in [("lr_q", self.lr_q), ("lr_policy", self.lr_policy)] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be > 0"));
            }
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{name} must be in [0, 1]"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Bounded FIFO of transitions with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        ReplayMemory {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `n` draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Transition> {
        (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub td_loss: f64,
    pub policy_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridAgent {
    pub space: HybridActionSpace,
    pub state_dim: usize,
    pub config: AgentConfig,
    pub q: Mlp,
    pub q_target: Mlp,
    pub policy: Mlp,
    pub policy_target: Mlp,
    pub replay: ReplayMemory,
    q_opt: Optimizer,
    policy_opt: Optimizer,
    /// Environment steps taken so far (drives the exploration schedule).
    pub steps: usize,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl HybridAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        space: HybridActionSpace,
        config: AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let k = space.num_actions();
        let q = Mlp::random(&layer_sizes(state_dim + 2 * k, &config.q_hidden, 1), rng);
        let policy = Mlp::random(&layer_sizes(state_dim, &config.policy_hidden, k), rng);
        Ok(Self::from_networks(state_dim, space, config, q, policy))
    }

    pub fn from_networks(
        state_dim: usize,
        space: HybridActionSpace,
        config: AgentConfig,
        q: Mlp,
        policy: Mlp,
    ) -> Self {
        let q_opt = Optimizer::new(config.optimizer, config.lr_q, q.params().len());
        let policy_opt = Optimizer::new(config.optimizer, config.lr_policy, policy.params().len());
        HybridAgent {
            replay: ReplayMemory::new(config.replay_capacity),
            q_target: q.clone(),
            policy_target: policy.clone(),
            q,
            policy,
            space,
            state_dim,
            config,
            q_opt,
            policy_opt,
            steps: 0,
        }
    }

    fn num_actions(&self) -> usize {
        self.space.num_actions()
    }

    /// `[s, onehot(k), x-vector zero except branch k]`, with `x_k` rescaled
    /// to [-1, 1].
    fn encode(&self, state: &[f64], k: usize, x: f64) -> Vec<f64> {
        let n = self.num_actions();
        let mut v = Vec::with_capacity(state.len() + 2 * n);
        v.extend_from_slice(state);
        v.extend((0..n).map(|i| f64::from(u8::from(i == k))));
        let (mid, half) = self.space.mid_half(k);
        v.extend((0..n).map(|i| if i == k { (x - mid) / half } else { 0.0 }));
        v
    }

    fn x_offset(&self) -> usize {
        self.state_dim + self.num_actions()
    }

    fn q_with(&self, net: &Mlp, state: &[f64], k: usize, x: f64) -> f64 {
        net.forward(&self.encode(state, k, x))[0]
    }

    /// `Q(s, k, x_k; omega)`.
    pub fn q_value(&self, state: &[f64], k: usize, x: f64) -> Result<f64> {
        self.space.check(k, x)?;
        Ok(self.q_with(&self.q, state, k, x))
    }

    /// `dQ/dx_k` at `(s, k, x)` by backpropagation.
    pub fn q_gradient_x(&self, state: &[f64], k: usize, x: f64) -> Result<f64> {
        self.space.check(k, x)?;
        Ok(self.q_input_gradient(&self.q, state, k, x))
    }

    fn q_input_gradient(&self, net: &Mlp, state: &[f64], k: usize, x: f64) -> f64 {
        let cache = net.forward_cache(&self.encode(state, k, x));
        let mut scratch = vec![0.0; net.params().len()];
        let g = net.backward(&cache, &[1.0], &mut scratch);
        g[self.x_offset() + k] / self.space.mid_half(k).1
    }

    fn policy_with(&self, net: &Mlp, state: &[f64]) -> Vec<f64> {
        net.forward(state)
            .iter()
            .enumerate()
            .map(|(k, &z)| self.space.squash(k, z))
            .collect()
    }

    /// `x_k(s; theta)` for every branch, each inside its interval.
    pub fn continuous_policy(&self, state: &[f64]) -> Vec<f64> {
        self.policy_with(&self.policy, state)
    }

    /// `argmax_k Q(s, k, x_k(s))` with its parameter.
    pub fn greedy_action(&self, state: &[f64]) -> HybridAction {
        let xs = self.continuous_policy(state);
        let (k, _) = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| (k, self.q_with(&self.q, state, k, x)))
            .fold((0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        HybridAction { k, x: xs[k] }
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule(self.config.epsilon_start, self.config.epsilon_end)
    }

    pub fn noise_scale(&self) -> f64 {
        self.schedule(self.config.noise_start, self.config.noise_end)
    }

    fn schedule(&self, start: f64, end: f64) -> f64 {
        let frac = if self.config.decay_steps == 0 {
            1.0
        } else {
            (self.steps as f64 / self.config.decay_steps as f64).min(1.0)
        };
        start + (end - start) * frac
    }

    /// Epsilon-greedy branch choice, clipped Gaussian noise on its parameter.
    pub fn explore<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> HybridAction {
        let xs = self.continuous_policy(state);
        let k = if rng.random::<f64>() < self.epsilon() {
            rng.random_range(0..self.num_actions())
        } else {
            self.greedy_action(state).k
        };
        let (lo, hi) = self.space.bounds[k];
        let half = (hi - lo) / 2.0;
        let noise: f64 = rng.sample(StandardNormal);
        let x = (xs[k] + noise * self.noise_scale() * half).clamp(lo, hi);
        HybridAction { k, x }
    }

    /// `y = r + gamma_d max_k Q(s', k, x_k(s'; theta^-); omega^-)`, or `r` when terminal.
    pub fn bellman_target(&self, t: &Transition) -> f64 {
        if t.terminal || self.config.discount == 0.0 {
            return t.reward;
        }
        let xs = self.policy_with(&self.policy_target, &t.next_state);
        let best = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| self.q_with(&self.q_target, &t.next_state, k, x))
            .fold(f64::NEG_INFINITY, f64::max);
        t.reward + self.config.discount * best
    }

    /// One descent step on the mean squared TD error. Returns the loss
    /// before the step.
    pub fn q_step(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.q.params().len()];
        let mut loss = 0.0;
        for t in batch {
            let y = self.bellman_target(t);
            let cache = self
                .q
                .forward_cache(&self.encode(&t.state, t.action.k, t.action.x));
            let err = cache.output()[0] - y;
            loss += err * err / n;
            self.q.backward(&cache, &[2.0 * err / n], &mut grad);
        }
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite TD loss after {} steps",
                self.steps
            )));
        }
        self.q_opt.step(self.q.params_mut(), &grad);
        Ok(loss)
    }

    /// One ascent step on `mean_s sum_k Q(s, k, x_k(s; theta); omega)`.
    /// Returns the objective before the step.
    pub fn policy_step(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.policy.params().len()];
        let mut objective = 0.0;
        for t in batch {
            let cache = self.policy.forward_cache(&t.state);
            let z = cache.output().to_vec();
            let mut grad_z = vec![0.0; z.len()];
            for (k, &zk) in z.iter().enumerate() {
                let x = self.space.squash(k, zk);
                objective += self.q_with(&self.q, &t.state, k, x) / n;
                let dq_dx = self.q_input_gradient(&self.q, &t.state, k, x);
                let dx_dz = self.space.mid_half(k).1 * (1.0 - zk.tanh().powi(2));
                // minimize the negative objective
                grad_z[k] = -dq_dx * dx_dz / n;
            }
            self.policy.backward(&cache, &grad_z, &mut grad);
        }
        if !objective.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite policy objective after {} steps",
                self.steps
            )));
        }
        self.policy_opt.step(self.policy.params_mut(), &grad);
        Ok(objective)
    }

    /// Q step, policy step, then soft target updates.
    pub fn train_step(&mut self, batch: &[Transition]) -> Result<StepStats> {
        let td_loss = self.q_step(batch)?;
        let policy_objective = self.policy_step(batch)?;
        let tau = self.config.tau;
        self.q_target.soft_update(&self.q, tau);
        self.policy_target.soft_update(&self.policy, tau);
        Ok(StepStats {
            td_loss,
            policy_objective,
        })
    }

    /// Runs `episodes` episodes with exploration, one update per environment
    /// step once the replay memory holds `warmup` transitions. Returns the
    /// undiscounted return of every episode.
    pub fn train<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        episodes: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        let mut returns = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut state = env.reset(rng);
            let mut total = 0.0;
            loop {
                let action = self.explore(&state, rng);
                let step = env.step(&action)?;
                total += step.reward;
                let transition = Transition {
                    state: state.clone(),
                    action,
                    reward: step.reward,
                    next_state: step.next_state.clone(),
                    terminal: step.terminal,
                };
                self.replay.push(transition);
                self.steps += 1;
                if self.replay.len() >= self.config.warmup.max(1) {
                    let batch = self.replay.sample(self.config.batch_size, rng);
                    self.train_step(&batch)?;
                }
                state = step.next_state;
                if step.terminal || step.truncated {
                    break;
                }
            }
            if !total.is_finite() {
                return Err(Error::Diverged(format!(
                    "episode {} returned {total}",
                    returns.len()
                )));
            }
            returns.push(total);
        }
        Ok(returns)
    }
}
