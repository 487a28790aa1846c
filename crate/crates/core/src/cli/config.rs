//! Experiment files: strict JSON, every section optional, powers in dBm.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "scenario": { "num_ues": 4, "max_tx_power_dbm": 20 },
//!   "sweep": { "grid_dbm": [0, 10, 20, 30] }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::capacity::{Association, GainIndexing, PowerModel};
use crate::coopnet::CoopConfig;
use crate::hybridrl::{AgentConfig, HetNetEnvConfig};
use crate::placement::PlacementParams;
use crate::precoding::PrecoderScheme;
use crate::scenario::ScenarioConfig;
use crate::units::{dbm_to_watts, watts_to_dbm};
use crate::Error;

pub const DEFAULT_SEED: u64 = 1;

/// Scenario as written in experiment files; converted to [`ScenarioConfig`]
/// with powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub num_small_cells: usize,
    pub num_ues: usize,
    pub antennas_per_cell: usize,
    pub pilot_length: usize,
    pub coherence_block: usize,
    pub noise_power_dbm: f64,
    pub pilot_power_dbm: f64,
    pub max_tx_power_dbm: f64,
    pub area_side: f64,
    pub pathloss_exponent: f64,
    pub reference_distance: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let c = ScenarioConfig::default();
        ScenarioSpec {
            num_small_cells: c.num_small_cells,
            num_ues: c.num_ues,
            antennas_per_cell: c.antennas_per_cell,
            pilot_length: c.pilot_length,
            coherence_block: c.coherence_block,
            noise_power_dbm: watts_to_dbm(c.noise_variance),
            pilot_power_dbm: watts_to_dbm(c.pilot_power),
            max_tx_power_dbm: watts_to_dbm(c.max_tx_power),
            area_side: c.area_side,
            pathloss_exponent: c.pathloss_exponent,
            reference_distance: c.reference_distance,
        }
    }
}

impl ScenarioSpec {
    pub fn resolve(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            num_small_cells: self.num_small_cells,
            num_ues: self.num_ues,
            antennas_per_cell: self.antennas_per_cell,
            pilot_length: self.pilot_length,
            coherence_block: self.coherence_block,
            noise_variance: dbm_to_watts(self.noise_power_dbm),
            pilot_power: dbm_to_watts(self.pilot_power_dbm),
            max_tx_power: dbm_to_watts(self.max_tx_power_dbm),
            area_side: self.area_side,
            pathloss_exponent: self.pathloss_exponent,
            reference_distance: self.reference_distance,
            master_seed: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySpec {
    pub schemes: Vec<PrecoderScheme>,
    pub association: Association,
    pub indexing: GainIndexing,
    /// Relative tolerance for the closed-form / Monte Carlo comparison.
    pub tolerance: f64,
}

impl Default for CapacitySpec {
    fn default() -> Self {
        CapacitySpec {
            schemes: vec![PrecoderScheme::Mrt, PrecoderScheme::Fzf],
            association: Association::All,
            indexing: GainIndexing::Receiver,
            tolerance: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub scheme: PrecoderScheme,
    pub grid_dbm: Vec<f64>,
    pub power_model: PowerModel,
    pub association: Association,
    pub indexing: GainIndexing,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            scheme: PrecoderScheme::Mrt,
            grid_dbm: (0..=15).map(|i| f64::from(2 * i)).collect(),
            power_model: PowerModel::default(),
            association: Association::All,
            indexing: GainIndexing::Receiver,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoopSpec {
    /// Transmit SNRs (dB) to sweep; each overrides `config.tx_snr`.
    pub snr_grid_db: Vec<f64>,
    pub config: CoopConfig,
}

impl Default for CoopSpec {
    fn default() -> Self {
        CoopSpec {
            config: CoopConfig::default(),
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RlEnvironment {
    #[default]
    Hetnet,
    Bandit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSpec {
    pub environment: RlEnvironment,
    pub agent: AgentConfig,
    pub env: HetNetEnvConfig,
}

impl Default for RlSpec {
    fn default() -> Self {
        RlSpec {
            environment: RlEnvironment::Hetnet,
            agent: AgentConfig::default(),
            env: HetNetEnvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementSpec {
    /// Site coordinates; when absent, `num_sites` sites are drawn uniformly
    /// on `[0, area_side]^2`.
    pub sites: Option<Vec<[f64; 2]>>,
    /// Explicit symmetric distance matrix; overrides coordinates.
    pub distances: Option<Vec<Vec<f64>>>,
    /// Demand weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
    pub num_sites: usize,
    pub area_side: f64,
    pub params: PlacementParams,
}

impl Default for PlacementSpec {
    fn default() -> Self {
        PlacementSpec {
            sites: None,
            distances: None,
            weights: None,
            num_sites: 30,
            area_side: 1000.0,
            params: PlacementParams::default(),
        }
    }
}

/// One experiment file. Sections not used by a command are ignored (but
/// still validated for unknown fields).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    /// When present, must match the command on the command line.
    pub command: Option<String>,
    pub seed: Option<u64>,
    /// Monte Carlo trials, training episodes or random baseline draws,
    /// depending on the command.
    pub trials: Option<usize>,
    pub scenario: ScenarioSpec,
    pub capacity: CapacitySpec,
    pub sweep: SweepSpec,
    pub coop: CoopSpec,
    pub rl: RlSpec,
    pub placement: PlacementSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid experiment spec:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// A parsed spec plus the dotted paths of every field that took its default.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSpec {
    pub spec: ExperimentSpec,
    pub defaulted: Vec<String>,
}

pub fn load_spec(path: &Path) -> Result<LoadedSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spec(&text, &path.display().to_string())
}

/// Parses spec text; `origin` only labels diagnostics.
pub fn parse_spec(text: &str, origin: &str) -> Result<LoadedSpec, SpecError> {
    let parse_err = |e: serde_json::Error| SpecError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let raw: Value = serde_json::from_str(text).map_err(parse_err)?;
    let spec: ExperimentSpec = serde_json::from_str(text).map_err(parse_err)?;
    let resolved = serde_json::to_value(&spec).expect("spec serializes");
    let mut defaulted = Vec::new();
    collect_defaulted(&raw, &resolved, "", &mut defaulted);
    Ok(LoadedSpec { spec, defaulted })
}

fn collect_defaulted(raw: &Value, resolved: &Value, prefix: &str, out: &mut Vec<String>) {
    let Value::Object(fields) = resolved else {
        return;
    };
    let given = raw.as_object();
    for (key, value) in fields {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (given.and_then(|g| g.get(key)), value) {
            (None, Value::Object(_)) => collect_defaulted(&Value::Null, value, &path, out),
            (None, _) => out.push(path),
            (Some(r), _) => collect_defaulted(r, value, &path, out),
        }
    }
}

fn prefixed(section: &str, result: crate::Result<()>, errs: &mut Vec<String>) {
    match result {
        Ok(()) => {}
        Err(Error::InvalidConfig(list)) => {
            errs.extend(list.into_iter().map(|e| format!("{section}: {e}")))
        }
        Err(e) => errs.push(format!("{section}: {e}")),
    }
}

impl ExperimentSpec {
    /// Every constraint violation relevant to `command`, all at once.
    pub fn validate(&self, command: &str) -> Result<(), SpecError> {
        let mut errs = Vec::new();
        if let Some(c) = &self.command {
            if c != command {
                errs.push(format!(
                    "spec is for command '{c}' but '{command}' was requested"
                ));
            }
        }
        if self.trials == Some(0) {
            errs.push("trials must be >= 1".into());
        }
        let scenario = self.scenario.resolve(0);
        match command {
            "validate-capacity" => {
                prefixed("scenario", scenario.validate(), &mut errs);
                if self.capacity.schemes.is_empty() {
                    errs.push("capacity.schemes must not be empty".into());
                }
                for s in &self.capacity.schemes {
                    prefixed(
                        "capacity.schemes",
                        s.check_dimensions(scenario.antennas_per_cell, scenario.pilot_length),
                        &mut errs,
                    );
                }
                if !(self.capacity.tolerance > 0.0) {
                    errs.push("capacity.tolerance must be > 0".into());
                }
            }
            "sweep-power" => {
                prefixed("scenario", scenario.validate(), &mut errs);
                prefixed(
                    "sweep.scheme",
                    self.sweep
                        .scheme
                        .check_dimensions(scenario.antennas_per_cell, scenario.pilot_length),
                    &mut errs,
                );
                if self.sweep.grid_dbm.is_empty() {
                    errs.push("sweep.grid_dbm must not be empty".into());
                }
                if self.sweep.grid_dbm.iter().any(|v| !v.is_finite()) {
                    errs.push("sweep.grid_dbm entries must be finite".into());
                }
                prefixed(
                    "sweep.power_model",
                    self.sweep.power_model.validate(),
                    &mut errs,
                );
            }
            "coop-outage" => {
                prefixed("coop.config", self.coop.config.validate(), &mut errs);
                if self.coop.snr_grid_db.is_empty() {
                    errs.push("coop.snr_grid_db must not be empty".into());
                }
                if self.coop.snr_grid_db.iter().any(|v| !v.is_finite()) {
                    errs.push("coop.snr_grid_db entries must be finite".into());
                }
            }
            "train-rl" => {
                prefixed("rl.agent", self.rl.agent.validate(), &mut errs);
                if self.rl.environment == RlEnvironment::Hetnet {
                    prefixed("scenario", scenario.validate(), &mut errs);
                    prefixed(
                        "rl.env.power_model",
                        self.rl.env.power_model.validate(),
                        &mut errs,
                    );
                    if self.rl.env.episode_length == 0 {
                        errs.push("rl.env.episode_length must be >= 1".into());
                    }
                }
            }
            "place-replicas" => {
                let p = &self.placement;
                if p.params.clusters == 0 {
                    errs.push("placement.params.clusters must be >= 1".into());
                }
                if p.params.replicas_per_cluster == 0 {
                    errs.push("placement.params.replicas_per_cluster must be >= 1".into());
                }
                if !(p.params.time_per_unit > 0.0 && p.params.time_per_unit.is_finite()) {
                    errs.push("placement.params.time_per_unit must be finite and > 0".into());
                }
                let n = match (&p.distances, &p.sites) {
                    (Some(d), _) => d.len(),
                    (None, Some(s)) => s.len(),
                    (None, None) => {
                        if !(p.area_side > 0.0 && p.area_side.is_finite()) {
                            errs.push("placement.area_side must be finite and > 0".into());
                        }
                        p.num_sites
                    }
                };
                if p.params.clusters > n {
                    errs.push(format!(
                        "placement.params.clusters ({}) exceeds the site count ({n})",
                        p.params.clusters
                    ));
                }
                if let Some(w) = &p.weights {
                    if w.len() != n {
                        errs.push(format!(
                            "placement.weights has {} entries for {n} sites",
                            w.len()
                        ));
                    }
                }
            }
            other => errs.push(format!("unknown command '{other}'")),
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SpecError::Invalid(errs))
        }
    }
}

/// Effective master seed: command line / environment first, then the file,
/// then [`DEFAULT_SEED`].
pub fn resolve_seed(cli: Option<u64>, spec: &ExperimentSpec) -> u64 {
    cli.or(spec.seed).unwrap_or(DEFAULT_SEED)
}
