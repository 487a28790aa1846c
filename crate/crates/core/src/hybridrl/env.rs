//! Small-cell on/off and power-control environment.
//!
//! Branch 0 holds the activity pattern and sets the macro budget to
//! `x * p_max`; branch `j >= 1` toggles small cell j and sets its budget to
//! `x * p_max`. Rewards come from the closed-form capacity model:
//! `ee - lambda_qos * sum_k max(0, r_min - rate_k)`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Environment, HybridAction, HybridActionSpace, Step};
use crate::capacity::{
    closed_form_report, energy_efficiency, equal_split, serving_mask, Association, GainIndexing,
    PowerModel,
};
use crate::precoding::PrecoderScheme;
use crate::scenario::Deployment;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HetNetEnvConfig {
    pub scheme: PrecoderScheme,
    pub power_model: PowerModel,
    pub association: Association,
    pub qos_weight: f64,
    /// Minimum per-UE rate, bits/s/Hz.
    pub min_rate: f64,
    pub episode_length: usize,
}

impl Default for HetNetEnvConfig {
    fn default() -> Self {
        HetNetEnvConfig {
            scheme: PrecoderScheme::Mrt,
            power_model: PowerModel::default(),
            association: Association::Strongest,
            qos_weight: 1.0,
            min_rate: 0.5,
            episode_length: 50,
        }
    }
}

/// The part of the environment that changes over an episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HetNetEnvState {
    /// `active[0]` (macro) is always true.
    pub active: Vec<bool>,
    /// Budget per cell as a fraction of `p_max`.
    pub budget_fraction: Vec<f64>,
    pub rates: Vec<f64>,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub ee: f64,
    pub qos_penalty: f64,
    pub reward: f64,
}

/// What an action does to the activity pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellAction {
    Hold,
    Toggle(usize),
}

#[derive(Debug, Clone)]
pub struct HetNetEnv {
    pub deployment: Deployment,
    pub config: HetNetEnvConfig,
    pub state: HetNetEnvState,
    /// Mean `log10 beta` per cell over UEs, scaled by 1/10.
    features: Vec<f64>,
}

impl HetNetEnv {
    pub fn new(deployment: Deployment, config: HetNetEnvConfig) -> Result<Self> {
        config.power_model.validate()?;
        let cfg = &deployment.config;
        config
            .scheme
            .check_dimensions(cfg.antennas_per_cell, cfg.pilot_length)?;
        if config.episode_length == 0 {
            return Err(Error::invalid("episode_length must be >= 1"));
        }
        let features = deployment
            .beta
            .iter()
            .map(|row| row.iter().map(|b| b.log10()).sum::<f64>() / row.len() as f64 / 10.0)
            .collect();
        let cells = deployment.beta.len();
        let mut env = HetNetEnv {
            state: HetNetEnvState {
                active: vec![true; cells],
                budget_fraction: vec![1.0; cells],
                rates: vec![0.0; cfg.num_ues],
                step: 0,
            },
            deployment,
            config,
            features,
        };
        env.state.rates = env.current_rates()?;
        Ok(env)
    }

    pub fn num_cells(&self) -> usize {
        self.deployment.beta.len()
    }

    /// Replaces the mutable state (pattern and budgets) and refreshes rates.
    pub fn set_state(&mut self, active: Vec<bool>, budget_fraction: Vec<f64>) -> Result<()> {
        if active.len() != self.num_cells() || budget_fraction.len() != self.num_cells() {
            return Err(Error::invalid("state width does not match the cell count"));
        }
        if !active[0] {
            return Err(Error::InvalidAction(
                "the macro cell cannot be switched off".into(),
            ));
        }
        self.state.active = active;
        self.state.budget_fraction = budget_fraction.iter().map(|f| f.clamp(0.0, 1.0)).collect();
        self.state.rates = self.current_rates()?;
        Ok(())
    }

    fn allocation(&self) -> Vec<Vec<f64>> {
        let p_max = self.deployment.config.max_tx_power;
        let budgets: Vec<f64> = self
            .state
            .active
            .iter()
            .zip(&self.state.budget_fraction)
            .map(|(&a, &f)| if a { f * p_max } else { 0.0 })
            .collect();
        let serving = serving_mask(
            &self.deployment.beta,
            &self.state.active,
            self.config.association,
        );
        equal_split(&budgets, &serving)
    }

    fn current_rates(&self) -> Result<Vec<f64>> {
        let rho = self.allocation();
        Ok(closed_form_report(
            &self.deployment,
            self.config.scheme,
            &rho,
            &self.state.active,
            GainIndexing::Receiver,
        )?
        .rate)
    }

    /// Reward components for the current state.
    pub fn evaluate(&self) -> Evaluation {
        let rho = self.allocation();
        let ee = energy_efficiency(
            &self.state.rates,
            &rho,
            &self.state.active,
            &self.config.power_model,
        );
        let qos_penalty: f64 = self
            .state
            .rates
            .iter()
            .map(|r| (self.config.min_rate - r).max(0.0))
            .sum::<f64>()
            * self.config.qos_weight;
        Evaluation {
            ee,
            qos_penalty,
            reward: ee - qos_penalty,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        s.extend(
            self.state.active[1..]
                .iter()
                .map(|&a| f64::from(u8::from(a))),
        );
        s.extend_from_slice(&self.state.budget_fraction);
        s.extend_from_slice(&self.features);
        s.extend_from_slice(&self.state.rates);
        s.push(self.state.step as f64 / self.config.episode_length as f64);
        s
    }

    pub fn decode_action(&self, k: usize) -> Result<CellAction> {
        match k {
            0 => Ok(CellAction::Hold),
            j if j < self.num_cells() => Ok(CellAction::Toggle(j)),
            _ => Err(Error::InvalidAction(format!("branch {k} out of range"))),
        }
    }

    /// Applies a cell action with budget fraction `x`.
    pub fn apply(&mut self, action: CellAction, x: f64) -> Result<Step> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::ActionOutOfBounds {
                branch: 0,
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        match action {
            CellAction::Hold => self.state.budget_fraction[0] = x,
            CellAction::Toggle(0) => {
                return Err(Error::InvalidAction(
                    "the macro cell cannot be switched off".into(),
                ))
            }
            CellAction::Toggle(j) if j < self.num_cells() => {
                self.state.active[j] = !self.state.active[j];
                self.state.budget_fraction[j] = x;
            }
            CellAction::Toggle(j) => return Err(Error::InvalidAction(format!("no cell {j}"))),
        }
        self.state.rates = self.current_rates()?;
        self.state.step += 1;
        let reward = self.evaluate().reward;
        Ok(Step {
            next_state: self.observation(),
            reward,
            terminal: false,
            truncated: self.state.step >= self.config.episode_length,
        })
    }
}

impl Environment for HetNetEnv {
    fn state_dim(&self) -> usize {
        let cells = self.num_cells();
        (cells - 1) + cells + cells + self.deployment.config.num_ues + 1
    }

    fn action_space(&self) -> HybridActionSpace {
        HybridActionSpace::unit(self.num_cells())
    }

    /// Random activity pattern for small cells, random budgets.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let cells = self.num_cells();
        let mut active = vec![true; cells];
        for a in active.iter_mut().skip(1) {
            *a = rng.random::<bool>();
        }
        let budgets = (0..cells).map(|_| rng.random::<f64>()).collect();
        self.state.step = 0;
        self.set_state(active, budgets)
            .expect("reset state is valid");
        self.observation()
    }

    fn step(&mut self, action: &HybridAction) -> Result<Step> {
        let cell_action = self.decode_action(action.k)?;
        self.apply(cell_action, action.x)
    }
}

/// Best action by exhaustive one-step lookahead over every branch and
/// `grid` evenly spaced parameter values.
pub fn lookahead_action(env: &HetNetEnv, grid: usize) -> Result<HybridAction> {
    let mut best = (
        HybridAction {
            k: 0,
            x: env.state.budget_fraction[0],
        },
        f64::NEG_INFINITY,
    );
    for k in 0..env.num_cells() {
        for i in 0..grid {
            let x = if grid == 1 {
                1.0
            } else {
                i as f64 / (grid - 1) as f64
            };
            let mut probe = env.clone();
            let step = probe.step(&HybridAction { k, x })?;
            if step.reward > best.1 {
                best = (HybridAction { k, x }, step.reward);
            }
        }
    }
    Ok(best.0)
}

/// Undiscounted episode return of a policy from the given reset stream.
pub fn rollout<F>(env: &mut HetNetEnv, rng: &mut dyn RngCore, mut policy: F) -> Result<f64>
where
    F: FnMut(&HetNetEnv, &[f64], &mut dyn RngCore) -> Result<HybridAction>,
{
    let mut state = env.reset(rng);
    let mut total = 0.0;
    loop {
        let action = policy(env, &state, rng)?;
        let step = env.step(&action)?;
        total += step.reward;
        state = step.next_state;
        if step.terminal || step.truncated {
            return Ok(total);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn env() -> HetNetEnv {
        let cfg = ScenarioConfig {
            num_small_cells: 3,
            num_ues: 4,
            master_seed: 11,
            ..ScenarioConfig::default()
        };
        HetNetEnv::new(
            Deployment::generate(&cfg).unwrap(),
            HetNetEnvConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn hold_with_same_power_keeps_state() {
        let mut e = env();
        e.set_state(vec![true, true, false, true], vec![0.4, 0.5, 0.6, 0.7])
            .unwrap();
        let before = e.observation();
        let expected = e.evaluate().reward;
        let step = e.step(&HybridAction { k: 0, x: 0.4 }).unwrap();
        assert_eq!(step.reward, expected);
        let n = before.len();
        assert_eq!(&step.next_state[..n - 1], &before[..n - 1]);
    }

    #[test]
    fn switching_off_idle_cell_raises_ee() {
        // more cells than UEs, so some small cell serves nobody
        let cfg = ScenarioConfig {
            num_small_cells: 6,
            num_ues: 2,
            antennas_per_cell: 4,
            pilot_length: 1,
            master_seed: 5,
            ..ScenarioConfig::default()
        };
        let mut e = HetNetEnv::new(
            Deployment::generate(&cfg).unwrap(),
            HetNetEnvConfig::default(),
        )
        .unwrap();
        let cells = e.num_cells();
        let serving = serving_mask(
            &e.deployment.beta,
            &vec![true; cells],
            Association::Strongest,
        );
        let idle = (1..cells).find(|&j| serving[j].iter().all(|s| !s)).unwrap();
        let mut budgets = vec![0.5; cells];
        budgets[idle] = 0.0;
        e.set_state(vec![true; cells], budgets).unwrap();
        let before = e.evaluate().ee;
        e.step(&HybridAction { k: idle, x: 0.0 }).unwrap();
        assert!(!e.state.active[idle]);
        assert!(e.evaluate().ee > before);
    }

    #[test]
    fn macro_toggle_rejected() {
        let mut e = env();
        assert!(matches!(
            e.apply(CellAction::Toggle(0), 0.5),
            Err(Error::InvalidAction(_))
        ));
        assert!(e.step(&HybridAction { k: 9, x: 0.5 }).is_err());
        assert!(e.step(&HybridAction { k: 1, x: 1.5 }).is_err());
    }

    #[test]
    fn observation_width_matches() {
        let mut e = env();
        let mut rng = crate::rng::derive_rng(0, "env", 0);
        assert_eq!(e.reset(&mut rng).len(), e.state_dim());
        assert!(e.state.active[0]);
    }

    #[test]
    fn episode_truncates() {
        let mut e = env();
        let mut rng = crate::rng::derive_rng(0, "env", 1);
        e.reset(&mut rng);
        let mut steps = 0;
        loop {
            steps += 1;
            if e.step(&HybridAction { k: 0, x: 1.0 }).unwrap().truncated {
                break;
            }
        }
        assert_eq!(steps, 50);
    }
}
