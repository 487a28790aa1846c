//! Two-tier topology, large-scale fading, pilot assignment, small-scale
//! channel draws and MMSE channel estimation.
//!
//! Indexing: cell 0 is the macro station, cells `1..=J` are small cells. UEs
//! and pilots are 0-based (`pilot_index[k] ∈ 0..tau_p`).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Full description of a downlink scenario. Powers are linear watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_small_cells: usize,
    pub num_ues: usize,
    pub antennas_per_cell: usize,
    pub pilot_length: usize,
    pub coherence_block: usize,
    pub noise_variance: f64,
    pub pilot_power: f64,
    pub max_tx_power: f64,
    pub area_side: f64,
    pub pathloss_exponent: f64,
    pub reference_distance: f64,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_small_cells: 3,
            num_ues: 4,
            antennas_per_cell: 8,
            pilot_length: 2,
            coherence_block: 200,
            noise_variance: 1e-6,
            pilot_power: 0.1,
            max_tx_power: 0.1,
            area_side: 500.0,
            pathloss_exponent: 3.76,
            reference_distance: 10.0,
            master_seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn num_cells(&self) -> usize {
        self.num_small_cells + 1
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.num_ues < 1 {
            errs.push("num_ues must be >= 1".to_string());
        }
        if self.antennas_per_cell < 1 {
            errs.push("antennas_per_cell must be >= 1".to_string());
        }
        if self.pilot_length < 1 {
            errs.push("pilot_length must be >= 1".to_string());
        }
        if self.pilot_length >= self.coherence_block {
            errs.push(format!(
                "pilot_length ({}) must be < coherence_block ({})",
                self.pilot_length, self.coherence_block
            ));
        }
        for (name, v) in [
            ("noise_variance", self.noise_variance),
            ("pilot_power", self.pilot_power),
            ("max_tx_power", self.max_tx_power),
            ("area_side", self.area_side),
            ("reference_distance", self.reference_distance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name} must be finite and > 0 (got {v})"));
            }
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent >= 0.0) {
            errs.push("pathloss_exponent must be finite and >= 0".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    /// Index 0 is the macro station.
    pub cell_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    /// `active[m]` is true when cell m belongs to the active set.
    pub active: Vec<bool>,
}

impl NetworkTopology {
    pub fn num_cells(&self) -> usize {
        self.cell_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn active_cells(&self) -> Vec<usize> {
        active_indices(&self.active)
    }
}

pub(crate) fn active_indices(active: &[bool]) -> Vec<usize> {
    active
        .iter()
        .enumerate()
        .filter_map(|(m, &a)| a.then_some(m))
        .collect()
}

/// Macro at the center of the square, small cells and UEs uniform in it.
/// All cells start active.
pub fn build_topology<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<NetworkTopology> {
    cfg.validate()?;
    let side = cfg.area_side;
    let uniform = |rng: &mut R| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side);
    let mut cell_positions = Vec::with_capacity(cfg.num_cells());
    cell_positions.push(Point::new(side / 2.0, side / 2.0));
    for _ in 0..cfg.num_small_cells {
        cell_positions.push(uniform(rng));
    }
    let ue_positions = (0..cfg.num_ues).map(|_| uniform(rng)).collect();
    Ok(NetworkTopology {
        active: vec![true; cell_positions.len()],
        cell_positions,
        ue_positions,
    })
}

/// Power-law path loss clamped at the reference distance:
/// `beta = (max(d, d0) / d0)^(-exponent)`.
pub fn pathloss(distance: f64, reference_distance: f64, exponent: f64) -> f64 {
    (distance.max(reference_distance) / reference_distance).powf(-exponent)
}

/// Large-scale gain matrix `beta[m][k]`, `(J+1) x K`.
pub fn large_scale_fading(topology: &NetworkTopology, cfg: &ScenarioConfig) -> Vec<Vec<f64>> {
    topology
        .cell_positions
        .iter()
        .map(|cell| {
            topology
                .ue_positions
                .iter()
                .map(|ue| {
                    pathloss(
                        cell.distance(ue),
                        cfg.reference_distance,
                        cfg.pathloss_exponent,
                    )
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotPolicy {
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotAssignment {
    pub pilot_length: usize,
    /// Pilot id per UE, in `0..pilot_length`.
    pub pilot_index: Vec<usize>,
    /// `groups[k]`: every UE sharing UE k's pilot, k included, ascending.
    pub groups: Vec<Vec<usize>>,
}

impl PilotAssignment {
    pub fn from_indices(pilot_length: usize, pilot_index: Vec<usize>) -> Self {
        let groups = pilot_index
            .iter()
            .map(|&p| {
                pilot_index
                    .iter()
                    .enumerate()
                    .filter_map(|(k, &q)| (q == p).then_some(k))
                    .collect()
            })
            .collect();
        PilotAssignment {
            pilot_length,
            pilot_index,
            groups,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.pilot_index.len()
    }

    /// UEs transmitting pilot `t`.
    pub fn users_of_pilot(&self, t: usize) -> Vec<usize> {
        self.pilot_index
            .iter()
            .enumerate()
            .filter_map(|(k, &p)| (p == t).then_some(k))
            .collect()
    }
}

pub fn assign_pilots(num_ues: usize, pilot_length: usize, policy: PilotPolicy) -> PilotAssignment {
    assert!(pilot_length >= 1, "pilot_length must be >= 1");
    match policy {
        PilotPolicy::RoundRobin => PilotAssignment::from_indices(
            pilot_length,
            (0..num_ues).map(|k| k % pilot_length).collect(),
        ),
    }
}

/// One draw from CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Length-`n` vector with i.i.d. CN(0, variance) entries.
pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng, variance)).collect()
}

/// Rayleigh small-scale fading: `h[m][k] ~ CN(0, beta[m][k] I_N)`.
pub fn draw_channels<R: Rng + ?Sized>(
    beta: &[Vec<f64>],
    antennas: usize,
    rng: &mut R,
) -> Vec<Vec<Vec<C64>>> {
    beta.iter()
        .map(|row| {
            row.iter()
                .map(|&b| complex_gaussian_vec(rng, antennas, b))
                .collect()
        })
        .collect()
}

/// Pilot-phase parameters shared by the estimator and the precoders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotParams {
    pub pilot_length: usize,
    pub pilot_power: f64,
    pub noise_variance: f64,
}

impl PilotParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        PilotParams {
            pilot_length: cfg.pilot_length,
            pilot_power: cfg.pilot_power,
            noise_variance: cfg.noise_variance,
        }
    }

    fn snr_gain(&self) -> f64 {
        self.pilot_length as f64 * self.pilot_power
    }
}

/// Per-antenna variance of the despread pilot observation at cell m on pilot
/// t: `tau_p p_p sum_{k in pilot t} beta_mk + sigma^2`. Indexed `[m][t]`.
pub fn observation_variance(
    beta: &[Vec<f64>],
    pilots: &PilotAssignment,
    params: PilotParams,
) -> Vec<Vec<f64>> {
    beta.iter()
        .map(|row| {
            (0..pilots.pilot_length)
                .map(|t| {
                    let load: f64 = pilots.users_of_pilot(t).iter().map(|&k| row[k]).sum();
                    params.snr_gain() * load + params.noise_variance
                })
                .collect()
        })
        .collect()
}

/// Estimate quality `gamma[m][k] = tau_p p_p beta_mk^2 / (tau_p p_p sum_{k' in P_k} beta_mk' + sigma^2)`.
pub fn estimation_quality(
    beta: &[Vec<f64>],
    pilots: &PilotAssignment,
    params: PilotParams,
) -> Vec<Vec<f64>> {
    let obs = observation_variance(beta, pilots, params);
    beta.iter()
        .zip(&obs)
        .map(|(row, psi)| {
            row.iter()
                .enumerate()
                .map(|(k, &b)| params.snr_gain() * b * b / psi[pilots.pilot_index[k]])
                .collect()
        })
        .collect()
}

/// MMSE estimates together with the despread pilot observations they are
/// built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimates {
    /// `h_hat[m][k]`, length N.
    pub h_hat: Vec<Vec<Vec<C64>>>,
    /// `gamma[m][k]`, per-antenna variance of `h_hat[m][k]`.
    pub gamma: Vec<Vec<f64>>,
    /// `observations[m][t]`: despread pilot-t observation at cell m, length N.
    pub observations: Vec<Vec<Vec<C64>>>,
    /// `observation_variance[m][t]`.
    pub observation_variance: Vec<Vec<f64>>,
}

/// Linear MMSE estimation from orthogonal pilots.
///
/// The despread observation of pilot t at cell m is
/// `y_mt = sqrt(tau_p p_p) sum_{k in pilot t} h_mk + n_mt`, `n_mt ~ CN(0, sigma^2 I)`,
/// and `h_hat_mk = sqrt(tau_p p_p) beta_mk / psi_mt * y_m,i_k`. UEs sharing a
/// pilot therefore get parallel estimates.
pub fn estimate_channels<R: Rng + ?Sized>(
    h: &[Vec<Vec<C64>>],
    beta: &[Vec<f64>],
    pilots: &PilotAssignment,
    params: PilotParams,
    rng: &mut R,
) -> ChannelEstimates {
    let amp = params.snr_gain().sqrt();
    let psi = observation_variance(beta, pilots, params);
    let gamma = estimation_quality(beta, pilots, params);
    let antennas = h.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let observations: Vec<Vec<Vec<C64>>> = h
        .iter()
        .map(|cell| {
            (0..pilots.pilot_length)
                .map(|t| {
                    let mut y = complex_gaussian_vec(rng, antennas, params.noise_variance);
                    for k in pilots.users_of_pilot(t) {
                        for (yn, hn) in y.iter_mut().zip(&cell[k]) {
                            *yn += hn * amp;
                        }
                    }
                    y
                })
                .collect()
        })
        .collect();
    let h_hat = beta
        .iter()
        .enumerate()
        .map(|(m, row)| {
            row.iter()
                .enumerate()
                .map(|(k, &b)| {
                    let t = pilots.pilot_index[k];
                    let c = amp * b / psi[m][t];
                    observations[m][t].iter().map(|y| y * c).collect()
                })
                .collect()
        })
        .collect();
    ChannelEstimates {
        h_hat,
        gamma,
        observations,
        observation_variance: psi,
    }
}

/// A generated deployment: topology, gains and pilots for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub config: ScenarioConfig,
    pub topology: NetworkTopology,
    pub beta: Vec<Vec<f64>>,
    pub pilots: PilotAssignment,
}

impl Deployment {
    /// Topology from the `"topology"` substream of `config.master_seed`.
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        let mut rng = crate::rng::derive_rng(config.master_seed, "topology", 0);
        let topology = build_topology(config, &mut rng)?;
        let beta = large_scale_fading(&topology, config);
        Ok(Self::from_parts(config.clone(), topology, beta))
    }

    pub fn from_parts(
        config: ScenarioConfig,
        topology: NetworkTopology,
        beta: Vec<Vec<f64>>,
    ) -> Self {
        let pilots = assign_pilots(config.num_ues, config.pilot_length, PilotPolicy::RoundRobin);
        Deployment {
            config,
            topology,
            beta,
            pilots,
        }
    }

    pub fn pilot_params(&self) -> PilotParams {
        PilotParams::from_config(&self.config)
    }

    pub fn gamma(&self) -> Vec<Vec<f64>> {
        estimation_quality(&self.beta, &self.pilots, self.pilot_params())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn cfg(j: usize, k: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_small_cells: j,
            num_ues: k,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn degenerate_tier() {
        let c = cfg(0, 1);
        let topo = build_topology(&c, &mut derive_rng(1, "t", 0)).unwrap();
        assert_eq!(topo.cell_positions, vec![Point::new(250.0, 250.0)]);
        assert_eq!(topo.num_ues(), 1);
        assert_eq!(topo.active_cells(), vec![0]);
    }

    #[test]
    fn topology_is_deterministic() {
        let c = cfg(4, 8);
        let a = build_topology(&c, &mut derive_rng(7, "t", 0)).unwrap();
        let b = build_topology(&c, &mut derive_rng(7, "t", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn positions_stay_in_square() {
        let c = cfg(4, 8);
        for seed in 0..1000 {
            let topo = build_topology(&c, &mut derive_rng(seed, "t", 0)).unwrap();
            assert_eq!(topo.num_cells(), 5);
            assert_eq!(topo.num_ues(), 8);
            for p in topo.cell_positions.iter().chain(&topo.ue_positions) {
                assert!((0.0..=c.area_side).contains(&p.x) && (0.0..=c.area_side).contains(&p.y));
            }
        }
    }

    #[test]
    fn validation_lists_every_violation() {
        let bad = ScenarioConfig {
            num_ues: 0,
            pilot_length: 300,
            noise_variance: -1.0,
            ..ScenarioConfig::default()
        };
        match bad.validate() {
            Err(Error::InvalidConfig(v)) => {
                assert_eq!(v.len(), 3, "{v:?}");
                assert!(v.iter().any(|s| s.contains("coherence_block")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pathloss_points() {
        assert_eq!(pathloss(10.0, 10.0, 3.76), 1.0);
        assert_eq!(pathloss(3.0, 10.0, 3.76), 1.0);
        assert!((pathloss(20.0, 10.0, 3.76) - 2f64.powf(-3.76)).abs() < 1e-15);
    }

    #[test]
    fn equidistant_ues_get_equal_gain() {
        let topo = NetworkTopology {
            cell_positions: vec![Point::new(0.0, 0.0)],
            ue_positions: vec![Point::new(30.0, 40.0), Point::new(-50.0, 0.0)],
            active: vec![true],
        };
        let beta = large_scale_fading(&topo, &cfg(0, 2));
        assert_eq!(beta[0][0], beta[0][1]);
    }

    #[test]
    fn round_robin_pilots() {
        let p = assign_pilots(2, 2, PilotPolicy::RoundRobin);
        assert_eq!(p.groups, vec![vec![0], vec![1]]);
        let p = assign_pilots(4, 2, PilotPolicy::RoundRobin);
        assert_eq!(p.pilot_index, vec![0, 1, 0, 1]);
        assert_eq!(
            p.groups,
            vec![vec![0, 2], vec![1, 3], vec![0, 2], vec![1, 3]]
        );
        let p = assign_pilots(5, 8, PilotPolicy::RoundRobin);
        assert!(p.groups.iter().enumerate().all(|(k, g)| g == &vec![k]));
    }

    #[test]
    fn gamma_two_ues_sharing_pilot() {
        // tau_p p_p = 10, sigma^2 = 1, equal beta = 1 -> 10 / 21
        let pilots = PilotAssignment::from_indices(1, vec![0, 0]);
        let params = PilotParams {
            pilot_length: 1,
            pilot_power: 10.0,
            noise_variance: 1.0,
        };
        let g = estimation_quality(&[vec![1.0, 1.0]], &pilots, params);
        assert!((g[0][0] - 10.0 / 21.0).abs() < 1e-15);
        assert!((g[0][1] - 10.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_limits() {
        let pilots = PilotAssignment::from_indices(1, vec![0]);
        let strong = PilotParams {
            pilot_length: 1,
            pilot_power: 1e12,
            noise_variance: 1.0,
        };
        let g = estimation_quality(&[vec![0.3]], &pilots, strong);
        assert!((g[0][0] - 0.3).abs() < 1e-9);

        let silent = PilotParams {
            pilot_power: 0.0,
            ..strong
        };
        let h = vec![vec![vec![C64::new(1.0, 1.0); 3]]];
        let est = estimate_channels(
            &h,
            &[vec![0.3]],
            &pilots,
            silent,
            &mut derive_rng(0, "e", 0),
        );
        assert_eq!(est.gamma[0][0], 0.0);
        assert!(est.h_hat[0][0].iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn zero_gain_link_gives_zero_channel() {
        let h = draw_channels(&[vec![0.0, 1.0]], 4, &mut derive_rng(3, "h", 0));
        assert!(h[0][0].iter().all(|z| z.norm() == 0.0));
        assert!(h[0][1].iter().any(|z| z.norm() > 0.0));
    }

    #[test]
    fn shared_pilot_estimates_are_parallel() {
        let beta = vec![vec![1.0, 0.25, 0.5]];
        let pilots = PilotAssignment::from_indices(2, vec![0, 1, 0]);
        let params = PilotParams {
            pilot_length: 2,
            pilot_power: 1.0,
            noise_variance: 0.1,
        };
        let mut rng = derive_rng(5, "e", 0);
        let h = draw_channels(&beta, 4, &mut rng);
        let est = estimate_channels(&h, &beta, &pilots, params, &mut rng);
        let ratio = beta[0][2] / beta[0][0];
        for (a, b) in est.h_hat[0][0].iter().zip(&est.h_hat[0][2]) {
            assert!((a * ratio - b).norm() < 1e-14);
        }
    }
}
