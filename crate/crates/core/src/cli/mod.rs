//! Command-line front end: `hetnet <command> --spec <path> [--seed <u64>]
//! [--out <path>] [--trials <n>]`.
//!
//! Every command writes one CSV (header row first) and a `<out>.meta.json`
//! sidecar holding the resolved configuration, the seed, the fields that
//! took defaults and a command-specific summary. Outputs are deterministic
//! functions of the spec file and the seed.

pub mod config;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::capacity::{
    closed_form_report, equal_split, monte_carlo_rate, serving_mask, sweep_power,
};
use crate::coopnet::outage_probability;
use crate::hybridrl::env::rollout;
use crate::hybridrl::{weights, AnalyticBandit, Environment, HetNetEnv, HybridAgent};
use crate::placement::{hybrid_place, random_placement_cost, SiteSet};
use crate::rng::derive_rng;
use crate::scenario::{Deployment, Point};
use crate::units::db_to_linear;

pub use config::{load_spec, parse_spec, ExperimentSpec, LoadedSpec, SpecError};

#[derive(Debug, Parser)]
#[command(
    name = "hetnet",
    version,
    about = "Two-tier HetNet simulation and optimization lab"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Experiment file (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Master seed; overrides HETNET_SEED and the file.
    #[arg(long, env = "HETNET_SEED")]
    pub seed: Option<u64>,
    /// Output CSV path; defaults to `<command>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte Carlo trials / training episodes / baseline draws.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-UE closed-form vs Monte Carlo rates for each precoder.
    ValidateCapacity(CommonArgs),
    /// Sum rate and energy efficiency over a grid of per-cell power caps.
    SweepPower(CommonArgs),
    /// Cooperative relaying outage over a grid of transmit SNRs.
    CoopOutage(CommonArgs),
    /// Trains the hybrid-action agent; also writes `<out>.weights.bin`.
    TrainRl(CommonArgs),
    /// K-means + p-center replica placement.
    PlaceReplicas(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ValidateCapacity(_) => "validate-capacity",
            Command::SweepPower(_) => "sweep-power",
            Command::CoopOutage(_) => "coop-outage",
            Command::TrainRl(_) => "train-rl",
            Command::PlaceReplicas(_) => "place-replicas",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::ValidateCapacity(a)
            | Command::SweepPower(a)
            | Command::CoopOutage(a)
            | Command::TrainRl(a)
            | Command::PlaceReplicas(a) => a,
        }
    }
}

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub extra: Vec<PathBuf>,
}

/// `<path>` with `suffix` appended to the file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Outcome {
    summary: Value,
    extra: Vec<PathBuf>,
}

pub fn run(command: &Command) -> anyhow::Result<RunOutput> {
    let name = command.name();
    let args = command.args();
    let loaded = load_spec(&args.spec)?;
    let mut spec = loaded.spec;
    if args.trials.is_some() {
        spec.trials = args.trials;
    }
    spec.validate(name)?;
    let seed = config::resolve_seed(args.seed, &spec);
    spec.seed = Some(seed);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut writer =
        csv::Writer::from_path(&out).with_context(|| format!("opening {}", out.display()))?;

    let outcome = match command {
        Command::ValidateCapacity(_) => validate_capacity(&spec, seed, &mut writer)?,
        Command::SweepPower(_) => sweep(&spec, seed, &mut writer)?,
        Command::CoopOutage(_) => coop(&spec, seed, &mut writer)?,
        Command::TrainRl(_) => train(&spec, seed, &out, &mut writer)?,
        Command::PlaceReplicas(_) => place(&spec, seed, &mut writer)?,
    };
    writer
        .flush()
        .with_context(|| format!("writing {}", out.display()))?;

    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "seed": seed,
        "trials": spec.trials,
        "spec": spec,
        "resolved_scenario": spec.scenario.resolve(seed),
        "defaulted": loaded.defaulted,
        "summary": outcome.summary,
    });
    let meta_path = sidecar(&out, ".meta.json");
    let mut f =
        File::create(&meta_path).with_context(|| format!("opening {}", meta_path.display()))?;
    serde_json::to_writer_pretty(&mut f, &meta)?;
    f.write_all(b"\n")?;
    Ok(RunOutput {
        csv: out,
        meta: meta_path,
        extra: outcome.extra,
    })
}

type Csv = csv::Writer<File>;

fn deployment(spec: &ExperimentSpec, seed: u64) -> anyhow::Result<Deployment> {
    Ok(Deployment::generate(&spec.scenario.resolve(seed))?)
}

#[derive(Serialize)]
struct CapacityRow {
    scheme: &'static str,
    ue: usize,
    closed_form_sinr: f64,
    closed_form_rate: f64,
    monte_carlo_sinr: f64,
    monte_carlo_rate: f64,
    relative_error: f64,
    pass: bool,
}

fn validate_capacity(spec: &ExperimentSpec, seed: u64, w: &mut Csv) -> anyhow::Result<Outcome> {
    let d = deployment(spec, seed)?;
    let trials = spec.trials.unwrap_or(100_000);
    let active = d.topology.active.clone();
    let budgets: Vec<f64> = active
        .iter()
        .map(|&a| if a { d.config.max_tx_power } else { 0.0 })
        .collect();
    let rho = equal_split(
        &budgets,
        &serving_mask(&d.beta, &active, spec.capacity.association),
    );
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut rejected = Vec::new();
    for &scheme in &spec.capacity.schemes {
        let cf = closed_form_report(&d, scheme, &rho, &active, spec.capacity.indexing)?;
        let mc = monte_carlo_rate(&d, scheme, &rho, &active, trials, seed)?;
        rejected.push(json!({ "scheme": scheme.name(), "rank_deficient_redraws": mc.rejected }));
        for k in 0..cf.rate.len() {
            let err = if cf.rate[k] > 0.0 {
                (mc.rate[k] - cf.rate[k]).abs() / cf.rate[k]
            } else {
                mc.rate[k].abs()
            };
            let pass = err <= spec.capacity.tolerance;
            worst = worst.max(err);
            failures += usize::from(!pass);
            w.serialize(CapacityRow {
                scheme: scheme.name(),
                ue: k,
                closed_form_sinr: cf.sinr[k],
                closed_form_rate: cf.rate[k],
                monte_carlo_sinr: mc.sinr[k],
                monte_carlo_rate: mc.rate[k],
                relative_error: err,
                pass,
            })?;
        }
    }
    Ok(Outcome {
        summary: json!({
            "trials": trials,
            "tolerance": spec.capacity.tolerance,
            "max_relative_error": worst,
            "rows_failing": failures,
            "monte_carlo": rejected,
        }),
        extra: vec![],
    })
}

fn sweep(spec: &ExperimentSpec, seed: u64, w: &mut Csv) -> anyhow::Result<Outcome> {
    let d = deployment(spec, seed)?;
    let s = &spec.sweep;
    let points = sweep_power(
        &d,
        s.scheme,
        &s.grid_dbm,
        &s.power_model,
        s.association,
        s.indexing,
    )?;
    for p in &points {
        w.serialize(p)?;
    }
    let best = points
        .iter()
        .fold(
            None,
            |best: Option<&crate::capacity::SweepPoint>, p| match best {
                Some(b) if b.ee >= p.ee => Some(b),
                _ => Some(p),
            },
        )
        .expect("grid is nonempty");
    Ok(Outcome {
        summary: json!({ "ee_argmax_dbm": best.p_max_dbm, "ee_max": best.ee }),
        extra: vec![],
    })
}

#[derive(Serialize)]
struct CoopRow {
    tx_snr_db: f64,
    trials: usize,
    failures: usize,
    outage_probability: f64,
    ci_low: f64,
    ci_high: f64,
}

fn coop(spec: &ExperimentSpec, seed: u64, w: &mut Csv) -> anyhow::Result<Outcome> {
    let trials = spec.trials.unwrap_or(100_000);
    for (i, &db) in spec.coop.snr_grid_db.iter().enumerate() {
        let mut cfg = spec.coop.config.clone();
        cfg.tx_snr = db_to_linear(db);
        // one independent stream family per grid point
        let est = outage_probability(
            &cfg,
            trials,
            crate::rng::split_seed(seed, "coop-grid", i as u64),
        )?;
        w.serialize(CoopRow {
            tx_snr_db: db,
            trials: est.trials,
            failures: est.failures,
            outage_probability: est.probability,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
        })?;
    }
    Ok(Outcome {
        summary: json!({ "trials_per_point": trials }),
        extra: vec![],
    })
}

#[derive(Serialize)]
struct EpisodeRow {
    episode: usize,
    episode_return: f64,
}

fn train(spec: &ExperimentSpec, seed: u64, out: &Path, w: &mut Csv) -> anyhow::Result<Outcome> {
    let episodes = spec.trials.unwrap_or(200);
    let mut init = derive_rng(seed, "agent-init", 0);
    let mut rng = derive_rng(seed, "train", 0);
    let agent_cfg = spec.rl.agent.clone();
    let (agent, returns, evaluation) = match spec.rl.environment {
        config::RlEnvironment::Bandit => {
            let mut env = AnalyticBandit::default();
            let mut agent =
                HybridAgent::new(env.state_dim(), env.action_space(), agent_cfg, &mut init)?;
            let returns = agent.train(&mut env, episodes, &mut rng)?;
            let a = agent.greedy_action(&[1.0]);
            let eval =
                json!({ "greedy_branch": a.k, "greedy_parameter": a.x, "reward": env.reward(&a) });
            (agent, returns, eval)
        }
        config::RlEnvironment::Hetnet => {
            let d = deployment(spec, seed)?;
            let mut env = HetNetEnv::new(d, spec.rl.env.clone())?;
            let mut agent =
                HybridAgent::new(env.state_dim(), env.action_space(), agent_cfg, &mut init)?;
            let returns = agent.train(&mut env, episodes, &mut rng)?;
            let mut eval_rng = derive_rng(seed, "evaluate", 0);
            let greedy = rollout(
                &mut env,
                &mut eval_rng,
                |_, s, _| Ok(agent.greedy_action(s)),
            )?;
            (agent, returns, json!({ "greedy_episode_return": greedy }))
        }
    };
    for (episode, &r) in returns.iter().enumerate() {
        w.serialize(EpisodeRow {
            episode,
            episode_return: r,
        })?;
    }
    let weights_path = sidecar(out, ".weights.bin");
    std::fs::write(&weights_path, weights::encode(&[&agent.q, &agent.policy]))
        .with_context(|| format!("writing {}", weights_path.display()))?;
    Ok(Outcome {
        summary: json!({
            "episodes": episodes,
            "environment_steps": agent.steps,
            "evaluation": evaluation,
            "weights": { "file": weights_path.file_name().map(|f| f.to_string_lossy()), "networks": ["q", "policy"] },
        }),
        extra: vec![weights_path],
    })
}

#[derive(Serialize)]
struct PlacementRow {
    site: usize,
    cluster: usize,
    center: usize,
    distance: f64,
}

fn place(spec: &ExperimentSpec, seed: u64, w: &mut Csv) -> anyhow::Result<Outcome> {
    let p = &spec.placement;
    let sites = match (&p.distances, &p.sites) {
        (Some(d), _) => {
            let n = d.len();
            SiteSet::from_matrix(d.clone(), p.weights.clone().unwrap_or_else(|| vec![1.0; n]))?
        }
        (None, coords) => {
            let points: Vec<Point> = match coords {
                Some(c) => c.iter().map(|&[x, y]| Point::new(x, y)).collect(),
                None => {
                    use rand::Rng;
                    let mut rng = derive_rng(seed, "sites", 0);
                    (0..p.num_sites)
                        .map(|_| {
                            Point::new(
                                rng.random::<f64>() * p.area_side,
                                rng.random::<f64>() * p.area_side,
                            )
                        })
                        .collect()
                }
            };
            let n = points.len();
            SiteSet::from_points(points, p.weights.clone().unwrap_or_else(|| vec![1.0; n]))?
        }
    };
    if sites.is_empty() {
        bail!("placement needs at least one site");
    }
    let mut rng = derive_rng(seed, "placement", 0);
    let placement = hybrid_place(&sites, &p.params, &mut rng)?;
    for i in 0..sites.len() {
        w.serialize(PlacementRow {
            site: i,
            cluster: placement.cluster[i],
            center: placement.nearest_center[i],
            distance: sites.distances[i][placement.nearest_center[i]],
        })?;
    }
    let draws = spec.trials.unwrap_or(100);
    let replicas = placement.centers().len();
    let random_mean = (0..draws)
        .map(|t| {
            let mut r = derive_rng(seed, "placement-random", t as u64);
            random_placement_cost(&sites, replicas, p.params.time_per_unit, &mut r)
        })
        .sum::<f64>()
        / draws as f64;
    Ok(Outcome {
        summary: json!({
            "centers": placement.centers(),
            "cluster_centers": placement.cluster_centers,
            "cost": placement.cost,
            "worst_case": placement.worst_case,
            "random_baseline_draws": draws,
            "random_baseline_mean_cost": random_mean,
        }),
        extra: vec![],
    })
}
