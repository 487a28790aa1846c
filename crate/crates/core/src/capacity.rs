//! Ergodic-rate lower bound (closed form and Monte Carlo) and network energy
//! efficiency.
//!
//! The Monte Carlo route estimates, per UE k,
//!
//! - `DS_k = E{sum_{m in A} sqrt(rho_mk) h_mk^H w_mk}`,
//! - `E|BU_k|^2`, the variance of that same sum,
//! - `E|UI_k'k|^2`, the second moment of `sum_{m in A} sqrt(rho_mk') h_mk^H w_mk'`,
//!
//! and combines them into `(1 - tau_p/tau_c) log2(1 + |DS|^2 / (E|BU|^2 + sum_{k' != k} E|UI|^2 + sigma^2))`.
//! The closed form evaluates the same bound analytically through the
//! precoder constants `(G, z)`.

use serde::{Deserialize, Serialize};

use crate::precoding::{inner, precoders, PrecoderScheme};
use crate::rng::derive_rng;
use crate::scenario::{draw_channels, estimate_channels, Deployment, PilotAssignment};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderConstants {
    pub gain: f64,
    /// `z[m][k]`.
    pub z: Vec<Vec<f64>>,
}

/// MRT: `G = N`, `z = beta`. F-ZF: `G = N - tau_p`, `z = beta - gamma`.
pub fn precoder_constants(
    scheme: PrecoderScheme,
    antennas: usize,
    pilot_length: usize,
    beta: &[Vec<f64>],
    gamma: &[Vec<f64>],
) -> Result<PrecoderConstants> {
    scheme.check_dimensions(antennas, pilot_length)?;
    Ok(match scheme {
        PrecoderScheme::Mrt => PrecoderConstants {
            gain: antennas as f64,
            z: beta.to_vec(),
        },
        PrecoderScheme::Fzf => PrecoderConstants {
            gain: (antennas - pilot_length) as f64,
            z: beta
                .iter()
                .zip(gamma)
                .map(|(b, g)| b.iter().zip(g).map(|(b, g)| (b - g).max(0.0)).collect())
                .collect(),
        },
    })
}

/// Which UE's gains enter the pilot-contamination and interference terms of
/// the closed-form SINR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainIndexing {
    /// Contamination `G (sum_m sqrt(rho_mk' gamma_mk))^2`, interference
    /// `sum_k' sum_m rho_mk' z_mk`: the interferer's power through the
    /// victim's channel. Agrees with the Monte Carlo bound.
    #[default]
    Receiver,
    /// Contamination `G (sum_m sqrt(rho_mk' gamma_mk'))^2`, interference
    /// `sum_k' sum_m rho_mk' z_mk'`: every quantity indexed by the
    /// interfering UE.
    Interferer,
}

/// Per-UE closed-form SINR. `rho`, `gamma` and `z` are `[m][k]`.
pub fn closed_form_sinr(
    rho: &[Vec<f64>],
    gamma: &[Vec<f64>],
    constants: &PrecoderConstants,
    active: &[bool],
    pilots: &PilotAssignment,
    noise_variance: f64,
    indexing: GainIndexing,
) -> Vec<f64> {
    let num_ues = pilots.num_ues();
    let cells: Vec<usize> = crate::scenario::active_indices(active);
    if cells.is_empty() {
        return vec![0.0; num_ues];
    }
    // coherent amplitude of UE `src`'s precoded stream seen through `gain_of`'s estimate
    let amplitude = |src: usize, gain_of: usize| -> f64 {
        cells
            .iter()
            .map(|&m| (rho[m][src] * gamma[m][gain_of]).sqrt())
            .sum()
    };
    (0..num_ues)
        .map(|k| {
            let desired = constants.gain * amplitude(k, k).powi(2);
            let contamination: f64 = pilots.groups[k]
                .iter()
                .filter(|&&kp| kp != k)
                .map(|&kp| {
                    let gain_of = match indexing {
                        GainIndexing::Receiver => k,
                        GainIndexing::Interferer => kp,
                    };
                    constants.gain * amplitude(kp, gain_of).powi(2)
                })
                .sum();
            let interference: f64 = (0..num_ues)
                .map(|kp| {
                    let z_of = match indexing {
                        GainIndexing::Receiver => k,
                        GainIndexing::Interferer => kp,
                    };
                    cells
                        .iter()
                        .map(|&m| rho[m][kp] * constants.z[m][z_of])
                        .sum::<f64>()
                })
                .sum();
            let denom = contamination + interference + noise_variance;
            if desired == 0.0 {
                0.0
            } else {
                desired / denom
            }
        })
        .collect()
}

/// `(1 - tau_p/tau_c) log2(1 + sinr)`.
pub fn closed_form_rate(sinr: f64, pilot_length: usize, coherence_block: usize) -> f64 {
    let prelog = (1.0 - pilot_length as f64 / coherence_block as f64).max(0.0);
    prelog * (1.0 + sinr.max(0.0)).log2()
}

/// Closed-form SINR and rate for a deployment with the given allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityReport {
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
}

impl CapacityReport {
    pub fn sum_rate(&self) -> f64 {
        self.rate.iter().sum()
    }
}

pub fn closed_form_report(
    deployment: &Deployment,
    scheme: PrecoderScheme,
    rho: &[Vec<f64>],
    active: &[bool],
    indexing: GainIndexing,
) -> Result<CapacityReport> {
    let cfg = &deployment.config;
    let gamma = deployment.gamma();
    let constants = precoder_constants(
        scheme,
        cfg.antennas_per_cell,
        cfg.pilot_length,
        &deployment.beta,
        &gamma,
    )?;
    let sinr = closed_form_sinr(
        rho,
        &gamma,
        &constants,
        active,
        &deployment.pilots,
        cfg.noise_variance,
        indexing,
    );
    let rate = sinr
        .iter()
        .map(|&s| closed_form_rate(s, cfg.pilot_length, cfg.coherence_block))
        .collect();
    Ok(CapacityReport { sinr, rate })
}

/// Monte Carlo estimates of the bound's decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    /// `DS_k` (complex mean of the coherent term).
    pub ds: Vec<C64>,
    /// `E|BU_k|^2`.
    pub bu: Vec<f64>,
    /// `ui[kp][k] = E|UI_k'k|^2`: UE kp's stream received at UE k (diagonal unused).
    pub ui: Vec<Vec<f64>>,
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    /// Realizations rejected for a rank-deficient pilot Gram matrix and redrawn.
    pub rejected: usize,
}

/// Running sums over trials; merged in a fixed order.
#[derive(Debug, Clone)]
struct Moments {
    mean: Vec<C64>,
    /// `second[kp][k] = sum |a_kp,k|^2` where `a_kp,k` is UE kp's stream at UE k.
    second: Vec<Vec<f64>>,
    trials: usize,
    rejected: usize,
}

impl Moments {
    fn new(num_ues: usize) -> Self {
        Moments {
            mean: vec![C64::new(0.0, 0.0); num_ues],
            second: vec![vec![0.0; num_ues]; num_ues],
            trials: 0,
            rejected: 0,
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        for (a, b) in self.mean.iter_mut().zip(&other.mean) {
            *a += b;
        }
        for (ra, rb) in self.second.iter_mut().zip(&other.second) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        self.trials += other.trials;
        self.rejected += other.rejected;
        self
    }
}

/// Trials per parallel work unit. Fixed so that reductions do not depend on
/// the thread count.
const CHUNK: usize = 1024;

/// Maximum redraws of a single trial before giving up.
const MAX_REDRAWS: usize = 64;

fn run_chunk(
    deployment: &Deployment,
    scheme: PrecoderScheme,
    rho: &[Vec<f64>],
    active: &[bool],
    seed: u64,
    range: std::ops::Range<usize>,
) -> Result<Moments> {
    let cfg = &deployment.config;
    let num_ues = cfg.num_ues;
    let cells = crate::scenario::active_indices(active);
    let params = deployment.pilot_params();
    let mut acc = Moments::new(num_ues);
    for trial in range {
        let mut rng = derive_rng(seed, "capacity-mc", trial as u64);
        let mut redraws = 0;
        let (h, w) = loop {
            let h = draw_channels(&deployment.beta, cfg.antennas_per_cell, &mut rng);
            let est = estimate_channels(&h, &deployment.beta, &deployment.pilots, params, &mut rng);
            match precoders(scheme, &est, &deployment.pilots, &cells) {
                Ok(w) => break (h, w),
                Err(Error::RankDeficient { .. }) if redraws < MAX_REDRAWS => redraws += 1,
                Err(e) => return Err(e),
            }
        };
        acc.rejected += redraws;
        acc.trials += 1;
        #[allow(clippy::needless_range_loop)]
        for k in 0..num_ues {
            for kp in 0..num_ues {
                let a: C64 = cells
                    .iter()
                    .map(|&m| inner(&h[m][k], &w.w[m][kp]) * rho[m][kp].sqrt())
                    .sum();
                if kp == k {
                    acc.mean[k] += a;
                }
                acc.second[kp][k] += a.norm_sqr();
            }
        }
    }
    Ok(acc)
}

/// Monte Carlo evaluation of the rate bound over `trials` independent
/// channel and estimate draws. Trial `t` uses substream
/// `derive_rng(seed, "capacity-mc", t)`.
pub fn monte_carlo_rate(
    deployment: &Deployment,
    scheme: PrecoderScheme,
    rho: &[Vec<f64>],
    active: &[bool],
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    let cfg = &deployment.config;
    scheme.check_dimensions(cfg.antennas_per_cell, cfg.pilot_length)?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let chunks: Vec<std::ops::Range<usize>> = (0..trials)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(trials))
        .collect();

    #[cfg(feature = "parallel")]
    let partials: Vec<Result<Moments>> = {
        use rayon::prelude::*;
        chunks
            .par_iter()
            .map(|r| run_chunk(deployment, scheme, rho, active, seed, r.clone()))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Result<Moments>> = chunks
        .iter()
        .map(|r| run_chunk(deployment, scheme, rho, active, seed, r.clone()))
        .collect();

    let mut total = Moments::new(cfg.num_ues);
    for p in partials {
        total = total.merge(&p?);
    }

    let n = total.trials as f64;
    let num_ues = cfg.num_ues;
    let ds: Vec<C64> = total.mean.iter().map(|s| s / n).collect();
    let bu: Vec<f64> = (0..num_ues)
        .map(|k| (total.second[k][k] / n - ds[k].norm_sqr()).max(0.0))
        .collect();
    let ui: Vec<Vec<f64>> = total
        .second
        .iter()
        .enumerate()
        .map(|(kp, row)| {
            row.iter()
                .enumerate()
                .map(|(k, s)| if k == kp { 0.0 } else { s / n })
                .collect()
        })
        .collect();
    let sinr: Vec<f64> = (0..num_ues)
        .map(|k| {
            let signal = ds[k].norm_sqr();
            if signal == 0.0 {
                return 0.0;
            }
            let interference: f64 = (0..num_ues).filter(|&kp| kp != k).map(|kp| ui[kp][k]).sum();
            signal / (bu[k] + interference + cfg.noise_variance)
        })
        .collect();
    let rate = sinr
        .iter()
        .map(|&s| closed_form_rate(s, cfg.pilot_length, cfg.coherence_block))
        .collect();
    Ok(MonteCarloReport {
        trials: total.trials,
        ds,
        bu,
        ui,
        sinr,
        rate,
        rejected: total.rejected,
    })
}

/// Linear amplifier with per-active-cell circuit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModel {
    /// Amplifier efficiency in (0, 1].
    pub efficiency: f64,
    /// Circuit power per active cell, watts.
    pub circuit_power: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            efficiency: 0.5,
            circuit_power: 0.1,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            errs.push(format!(
                "efficiency must be in (0, 1] (got {})",
                self.efficiency
            ));
        }
        if !(self.circuit_power > 0.0 && self.circuit_power.is_finite()) {
            errs.push(format!(
                "circuit_power must be > 0 (got {})",
                self.circuit_power
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// Consumed power: `sum_{m in A} (sum_k rho_mk / eta + P_c)`.
    pub fn consumed(&self, rho: &[Vec<f64>], active: &[bool]) -> f64 {
        active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(m, _)| rho[m].iter().sum::<f64>() / self.efficiency + self.circuit_power)
            .sum()
    }
}

/// Sum rate per consumed watt (bits/s/Hz/W). Zero when no cell is active.
pub fn energy_efficiency(
    rates: &[f64],
    rho: &[Vec<f64>],
    active: &[bool],
    model: &PowerModel,
) -> f64 {
    let power = model.consumed(rho, active);
    if power <= 0.0 {
        return 0.0;
    }
    rates.iter().sum::<f64>() / power
}

/// Which UEs an active cell serves when its budget is split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Association {
    /// Every active cell serves every UE.
    #[default]
    All,
    /// Each UE is served only by its strongest active cell.
    Strongest,
}

/// Serving mask `[m][k]` over active cells.
pub fn serving_mask(
    beta: &[Vec<f64>],
    active: &[bool],
    association: Association,
) -> Vec<Vec<bool>> {
    let num_ues = beta.first().map_or(0, Vec::len);
    match association {
        Association::All => active.iter().map(|&a| vec![a; num_ues]).collect(),
        Association::Strongest => {
            let mut mask = vec![vec![false; num_ues]; beta.len()];
            for k in 0..num_ues {
                let best =
                    (0..beta.len())
                        .filter(|&m| active[m])
                        .fold(None, |best: Option<usize>, m| match best {
                            Some(b) if beta[b][k] >= beta[m][k] => Some(b),
                            _ => Some(m),
                        });
                if let Some(m) = best {
                    mask[m][k] = true;
                }
            }
            mask
        }
    }
}

/// Equal per-served-UE split of each active cell's budget.
pub fn equal_split(budgets: &[f64], serving: &[Vec<bool>]) -> Vec<Vec<f64>> {
    budgets
        .iter()
        .zip(serving)
        .map(|(&p, row)| {
            let served = row.iter().filter(|&&s| s).count();
            row.iter()
                .map(|&s| {
                    if s && served > 0 {
                        p / served as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// One point of an energy-efficiency sweep over the per-cell power cap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub p_max_dbm: f64,
    pub sum_rate: f64,
    pub total_power_w: f64,
    pub ee: f64,
    pub active_cells: usize,
}

/// Closed-form sum rate and EE with every active cell at budget `p_max`,
/// split equally over served UEs.
pub fn sweep_power(
    deployment: &Deployment,
    scheme: PrecoderScheme,
    grid_dbm: &[f64],
    model: &PowerModel,
    association: Association,
    indexing: GainIndexing,
) -> Result<Vec<SweepPoint>> {
    model.validate()?;
    let active = &deployment.topology.active;
    let serving = serving_mask(&deployment.beta, active, association);
    grid_dbm
        .iter()
        .map(|&dbm| {
            let p_max = crate::units::dbm_to_watts(dbm);
            let budgets: Vec<f64> = active
                .iter()
                .map(|&a| if a { p_max } else { 0.0 })
                .collect();
            let rho = equal_split(&budgets, &serving);
            let report = closed_form_report(deployment, scheme, &rho, active, indexing)?;
            Ok(SweepPoint {
                p_max_dbm: dbm,
                sum_rate: report.sum_rate(),
                total_power_w: model.consumed(&rho, active),
                ee: energy_efficiency(&report.rate, &rho, active, model),
                active_cells: active.iter().filter(|&&a| a).count(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pilots(k: usize) -> PilotAssignment {
        PilotAssignment::from_indices(k.max(1), (0..k).collect())
    }

    #[test]
    fn constants_rules() {
        let beta = vec![vec![1.0, 0.5]];
        let gamma = vec![vec![0.4, 0.1]];
        let mrt = precoder_constants(PrecoderScheme::Mrt, 8, 2, &beta, &gamma).unwrap();
        assert_eq!(mrt.gain, 8.0);
        assert_eq!(mrt.z, beta);
        let fzf = precoder_constants(PrecoderScheme::Fzf, 8, 2, &beta, &gamma).unwrap();
        assert_eq!(fzf.gain, 6.0);
        assert!((fzf.z[0][0] - 0.6).abs() < 1e-15 && (fzf.z[0][1] - 0.4).abs() < 1e-15);
        let perfect = precoder_constants(PrecoderScheme::Fzf, 8, 2, &beta, &beta).unwrap();
        assert!(perfect.z.iter().flatten().all(|&z| z == 0.0));
        assert!(precoder_constants(PrecoderScheme::Fzf, 2, 2, &beta, &gamma).is_err());
    }

    #[test]
    fn single_link_sinr() {
        let constants = PrecoderConstants {
            gain: 4.0,
            z: vec![vec![1.0]],
        };
        let s = closed_form_sinr(
            &[vec![1.0]],
            &[vec![0.5]],
            &constants,
            &[true],
            &single_pilots(1),
            1.0,
            GainIndexing::Receiver,
        );
        assert!((s[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_shared_pilot_reduction() {
        let (g, rho, gamma, z, noise) = (6.0, 0.7, 0.3, 0.2, 0.9);
        let constants = PrecoderConstants {
            gain: g,
            z: vec![vec![z, z]],
        };
        let pilots = PilotAssignment::from_indices(1, vec![0, 0]);
        let expected = g * rho * gamma / (g * rho * gamma + 2.0 * rho * z + noise);
        for indexing in [GainIndexing::Receiver, GainIndexing::Interferer] {
            let s = closed_form_sinr(
                &[vec![rho, rho]],
                &[vec![gamma, gamma]],
                &constants,
                &[true],
                &pilots,
                noise,
                indexing,
            );
            assert!((s[0] - expected).abs() < 1e-14 && (s[1] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_active_set_is_zero() {
        let constants = PrecoderConstants {
            gain: 4.0,
            z: vec![vec![1.0]],
        };
        let s = closed_form_sinr(
            &[vec![1.0]],
            &[vec![0.5]],
            &constants,
            &[false],
            &single_pilots(1),
            1.0,
            GainIndexing::Receiver,
        );
        assert_eq!(s, vec![0.0]);
    }

    #[test]
    fn rate_cases() {
        assert!((closed_form_rate(1.0, 10, 100) - 0.9).abs() < 1e-15);
        assert_eq!(closed_form_rate(0.0, 10, 100), 0.0);
        assert!(closed_form_rate(1e6, 99, 100) < 0.2);
        assert_eq!(closed_form_rate(5.0, 100, 100), 0.0);
    }

    #[test]
    fn ee_plug_in() {
        let model = PowerModel {
            efficiency: 0.5,
            circuit_power: 1.0,
        };
        let ee = energy_efficiency(&[1.5, 0.5], &[vec![0.25, 0.75]], &[true], &model);
        assert!((ee - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            energy_efficiency(&[0.0], &[vec![1.0]], &[false], &model),
            0.0
        );
    }

    #[test]
    fn switching_off_unpowered_cell_raises_ee() {
        let model = PowerModel::default();
        let rho = vec![vec![0.1, 0.1], vec![0.0, 0.0]];
        let rates = [1.0, 2.0];
        let on = energy_efficiency(&rates, &rho, &[true, true], &model);
        let off = energy_efficiency(&rates, &rho, &[true, false], &model);
        assert!(off > on);
    }

    #[test]
    fn ee_scales_with_rates() {
        let model = PowerModel::default();
        let rho = vec![vec![0.3, 0.2]];
        let a = energy_efficiency(&[1.0, 2.0], &rho, &[true], &model);
        let b = energy_efficiency(&[3.0, 6.0], &rho, &[true], &model);
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn equal_split_respects_association() {
        let beta = vec![vec![1.0, 0.1, 0.5], vec![0.2, 0.9, 0.5]];
        let all = equal_split(
            &[0.75, 1.5],
            &serving_mask(&beta, &[true, true], Association::All),
        );
        assert_eq!(all, vec![vec![0.25, 0.25, 0.25], vec![0.5, 0.5, 0.5]]);
        let strongest = serving_mask(&beta, &[true, true], Association::Strongest);
        // tie on UE 2 goes to the lower cell index
        assert_eq!(
            strongest,
            vec![vec![true, false, true], vec![false, true, false]]
        );
        let rho = equal_split(&[0.3, 0.6], &strongest);
        assert_eq!(rho, vec![vec![0.15, 0.0, 0.15], vec![0.0, 0.6, 0.0]]);
    }
}
