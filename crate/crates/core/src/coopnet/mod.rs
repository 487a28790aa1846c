//! Network-coded cooperative relaying.
//!
//! A round: the destination ranks the N sources by direct-link SNR and picks
//! the K at the configured ranks; every relay's quality is the bottleneck of
//! its links from those sources and to the destination; the L relays at the
//! configured bottleneck ranks decode each source frame, forward an
//! `F_q`-linear combination, and the destination solves for all K frames.
//!
//! Links are Rayleigh: gain `h ~ CN(0, mean_gain)`, instantaneous SNR
//! `tx_snr |h|^2 / noise_variance`.

pub mod destination;
pub mod field;
pub mod link;
pub mod select;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use destination::{destination_decode, DecodeOutcome, Equation};
pub use field::PrimeField;
pub use link::{ml_decode, network_encode, relay_transmit, transmit, Constellation};
pub use select::{bottleneck_snr, select_relays, select_sources, RankSet};

use crate::rng::derive_rng;
use crate::scenario::complex_gaussian;
use crate::{Error, Result, C64};

/// Mean channel power per link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkMeans {
    pub source_destination: f64,
    pub source_relay: f64,
    pub relay_destination: f64,
}

impl Default for LinkMeans {
    fn default() -> Self {
        LinkMeans {
            source_destination: 1.0,
            source_relay: 1.0,
            relay_destination: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    /// Symbol-level simulation with ML detection; a frame counts only when
    /// every symbol is right.
    #[default]
    Waveform,
    /// A link is up iff its SNR reaches the erasure threshold; a relay's
    /// coded frame arrives iff its bottleneck SNR does.
    Erasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoopConfig {
    pub num_sources: usize,
    /// Ranks I of the selected sources; K = |I|.
    pub source_ranks: RankSet,
    pub num_relays: usize,
    /// Ranks J of the selected relays; L = |J|.
    pub relay_ranks: RankSet,
    pub tx_snr: f64,
    pub noise_variance: f64,
    pub field_order: PrimeField,
    pub frame_length: usize,
    pub mean_gain: LinkMeans,
    pub fidelity: Fidelity,
    pub erasure_threshold: f64,
}

impl Default for CoopConfig {
    fn default() -> Self {
        CoopConfig {
            num_sources: 5,
            source_ranks: RankSet::top(3),
            num_relays: 3,
            relay_ranks: RankSet::top(2),
            tx_snr: 10.0,
            noise_variance: 1.0,
            field_order: PrimeField::new(2).expect("prime"),
            frame_length: 32,
            mean_gain: LinkMeans::default(),
            fidelity: Fidelity::Waveform,
            erasure_threshold: 1.0,
        }
    }
}

impl CoopConfig {
    pub fn selected_sources(&self) -> usize {
        self.source_ranks.len()
    }

    pub fn selected_relays(&self) -> usize {
        self.relay_ranks.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.source_ranks.max_rank() > self.num_sources {
            errs.push(format!(
                "source_ranks reach rank {} but num_sources is {}",
                self.source_ranks.max_rank(),
                self.num_sources
            ));
        }
        if self.relay_ranks.max_rank() > self.num_relays {
            errs.push(format!(
                "relay_ranks reach rank {} but num_relays is {}",
                self.relay_ranks.max_rank(),
                self.num_relays
            ));
        }
        if !(self.tx_snr >= 0.0 && self.tx_snr.is_finite()) {
            errs.push("tx_snr must be finite and >= 0".into());
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            errs.push("noise_variance must be finite and >= 0".into());
        }
        if self.frame_length == 0 {
            errs.push("frame_length must be >= 1".into());
        }
        let m = self.mean_gain;
        if [m.source_destination, m.source_relay, m.relay_destination]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            errs.push("mean_gain entries must be finite and >= 0".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    fn snr(&self, h: C64) -> f64 {
        let p = self.tx_snr * h.norm_sqr();
        if self.noise_variance > 0.0 {
            p / self.noise_variance
        } else if p > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Everything that happened in one cooperation round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoopRound {
    pub snr_source_destination: Vec<f64>,
    /// `[relay][source]`.
    pub snr_source_relay: Vec<Vec<f64>>,
    pub snr_relay_destination: Vec<f64>,
    pub selected_sources: Vec<usize>,
    pub bottlenecks: Vec<f64>,
    pub selected_relays: Vec<usize>,
    /// Source frames, one per selected source (empty in erasure mode).
    pub frames: Vec<Vec<u32>>,
    /// `alpha[l][k]`, nonzero.
    pub alpha: Vec<Vec<u32>>,
    /// Network-coded frame each selected relay forwarded (empty in erasure mode).
    pub coded_frames: Vec<Vec<u32>>,
    pub direct_received: Vec<bool>,
    pub coded_received: Vec<bool>,
    pub outcome: DecodeOutcome,
}

impl CoopRound {
    pub fn is_outage(&self) -> bool {
        match &self.outcome {
            DecodeOutcome::Outage { .. } => true,
            DecodeOutcome::Recovered(f) => !self.frames.is_empty() && f != &self.frames,
        }
    }
}

struct LinkDraw {
    h_sd: Vec<C64>,
    h_sr: Vec<Vec<C64>>,
    h_rd: Vec<C64>,
}

fn draw_links<R: Rng + ?Sized>(cfg: &CoopConfig, rng: &mut R) -> LinkDraw {
    let m = cfg.mean_gain;
    LinkDraw {
        h_sd: (0..cfg.num_sources)
            .map(|_| complex_gaussian(rng, m.source_destination))
            .collect(),
        h_sr: (0..cfg.num_relays)
            .map(|_| {
                (0..cfg.num_sources)
                    .map(|_| complex_gaussian(rng, m.source_relay))
                    .collect()
            })
            .collect(),
        h_rd: (0..cfg.num_relays)
            .map(|_| complex_gaussian(rng, m.relay_destination))
            .collect(),
    }
}

/// Simulates one round at the configured fidelity.
pub fn simulate_round<R: Rng + ?Sized>(cfg: &CoopConfig, rng: &mut R) -> Result<CoopRound> {
    let field = cfg.field_order;
    let q = field.order();
    let k = cfg.selected_sources();
    let links = draw_links(cfg, rng);
    let snr_sd: Vec<f64> = links.h_sd.iter().map(|&h| cfg.snr(h)).collect();
    let snr_sr: Vec<Vec<f64>> = links
        .h_sr
        .iter()
        .map(|row| row.iter().map(|&h| cfg.snr(h)).collect())
        .collect();
    let snr_rd: Vec<f64> = links.h_rd.iter().map(|&h| cfg.snr(h)).collect();

    let selected_sources = select_sources(&snr_sd, &cfg.source_ranks)?;
    let bottlenecks: Vec<f64> = (0..cfg.num_relays)
        .map(|r| bottleneck_snr(&snr_sr[r], &selected_sources, snr_rd[r]))
        .collect();
    let selected_relays = select_relays(&bottlenecks, &cfg.relay_ranks)?;
    let alpha: Vec<Vec<u32>> = selected_relays
        .iter()
        .map(|_| (0..k).map(|_| rng.random_range(1..q)).collect())
        .collect();

    let mut equations = Vec::new();
    let (frames, coded_frames, direct_received, coded_received) = match cfg.fidelity {
        Fidelity::Erasure => {
            let x = cfg.erasure_threshold;
            let direct: Vec<bool> = selected_sources.iter().map(|&s| snr_sd[s] >= x).collect();
            let coded: Vec<bool> = selected_relays
                .iter()
                .map(|&r| bottlenecks[r] >= x)
                .collect();
            for (i, &ok) in direct.iter().enumerate() {
                if ok {
                    equations.push(Equation::direct(i, k, Vec::new()));
                }
            }
            for (l, &ok) in coded.iter().enumerate() {
                if ok {
                    equations.push(Equation::coded(alpha[l].clone(), Vec::new()));
                }
            }
            (Vec::new(), Vec::new(), direct, coded)
        }
        Fidelity::Waveform => {
            let constellation = Constellation::for_field(&field);
            let frames: Vec<Vec<u32>> = (0..k)
                .map(|_| {
                    (0..cfg.frame_length)
                        .map(|_| rng.random_range(0..q))
                        .collect()
                })
                .collect();
            let mut direct = Vec::with_capacity(k);
            for (i, &s) in selected_sources.iter().enumerate() {
                let y = transmit(
                    &constellation.modulate(&frames[i]),
                    links.h_sd[s],
                    cfg.tx_snr,
                    cfg.noise_variance,
                    rng,
                );
                let decoded = ml_decode(&y, links.h_sd[s], cfg.tx_snr, &constellation);
                let ok = decoded == frames[i];
                if ok {
                    equations.push(Equation::direct(i, k, decoded));
                }
                direct.push(ok);
            }
            let mut coded_frames = Vec::with_capacity(alpha.len());
            let mut coded = Vec::with_capacity(alpha.len());
            for (l, &r) in selected_relays.iter().enumerate() {
                // relay-side ML decoding, right or wrong, then encoding
                let decoded: Vec<Vec<u32>> = selected_sources
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| {
                        let h = links.h_sr[r][s];
                        let y = transmit(
                            &constellation.modulate(&frames[i]),
                            h,
                            cfg.tx_snr,
                            cfg.noise_variance,
                            rng,
                        );
                        ml_decode(&y, h, cfg.tx_snr, &constellation)
                    })
                    .collect();
                let forwarded = network_encode(&decoded, &alpha[l], &field)?;
                let y = relay_transmit(
                    &forwarded,
                    &constellation,
                    links.h_rd[r],
                    cfg.tx_snr,
                    cfg.noise_variance,
                    rng,
                );
                let at_destination = ml_decode(&y, links.h_rd[r], cfg.tx_snr, &constellation);
                let expected = network_encode(&frames, &alpha[l], &field)?;
                let ok = at_destination == expected;
                if ok {
                    equations.push(Equation::coded(alpha[l].clone(), at_destination));
                }
                coded_frames.push(forwarded);
                coded.push(ok);
            }
            (frames, coded_frames, direct, coded)
        }
    };

    let outcome = destination_decode(&equations, k, &field);
    Ok(CoopRound {
        snr_source_destination: snr_sd,
        snr_source_relay: snr_sr,
        snr_relay_destination: snr_rd,
        selected_sources,
        bottlenecks,
        selected_relays,
        frames,
        alpha,
        coded_frames,
        direct_received,
        coded_received,
        outcome,
    })
}

/// Event frequency with a 95% normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub trials: usize,
    pub failures: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl OutageEstimate {
    pub fn from_counts(failures: usize, trials: usize) -> Self {
        let p = failures as f64 / trials as f64;
        let half = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
        OutageEstimate {
            trials,
            failures,
            probability: p,
            ci_low: (p - half).max(0.0),
            ci_high: (p + half).min(1.0),
        }
    }
}

const CHUNK: usize = 4096;

fn count_events<F>(trials: usize, event: F) -> Result<usize>
where
    F: Fn(usize) -> Result<bool> + Sync,
{
    let chunks: Vec<std::ops::Range<usize>> = (0..trials)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(trials))
        .collect();
    let count_chunk = |r: &std::ops::Range<usize>| -> Result<usize> {
        let mut n = 0;
        for t in r.clone() {
            n += usize::from(event(t)?);
        }
        Ok(n)
    };
    #[cfg(feature = "parallel")]
    let partial: Vec<Result<usize>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(count_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<Result<usize>> = chunks.iter().map(count_chunk).collect();
    partial.into_iter().sum()
}

/// Fraction of rounds in which the destination cannot recover all K frames.
/// Round `t` uses `derive_rng(seed, "coop-round", t)`.
pub fn outage_probability(cfg: &CoopConfig, trials: usize, seed: u64) -> Result<OutageEstimate> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let failures = count_events(trials, |t| {
        let mut rng = derive_rng(seed, "coop-round", t as u64);
        Ok(simulate_round(cfg, &mut rng)?.is_outage())
    })?;
    Ok(OutageEstimate::from_counts(failures, trials))
}

/// Probability that the best relay's bottleneck SNR falls below `threshold`,
/// i.e. `P(g_(1) < x)`, estimated through the same selection pipeline.
/// Round `t` uses `derive_rng(seed, "best-relay", t)`.
pub fn best_relay_outage(
    cfg: &CoopConfig,
    threshold: f64,
    trials: usize,
    seed: u64,
) -> Result<OutageEstimate> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let best = RankSet::top(1);
    let failures = count_events(trials, |t| {
        let mut rng = derive_rng(seed, "best-relay", t as u64);
        let links = draw_links(cfg, &mut rng);
        let snr_sd: Vec<f64> = links.h_sd.iter().map(|&h| cfg.snr(h)).collect();
        let selected = select_sources(&snr_sd, &cfg.source_ranks)?;
        let bottlenecks: Vec<f64> = (0..cfg.num_relays)
            .map(|r| {
                let sr: Vec<f64> = links.h_sr[r].iter().map(|&h| cfg.snr(h)).collect();
                bottleneck_snr(&sr, &selected, cfg.snr(links.h_rd[r]))
            })
            .collect();
        let top = select_relays(&bottlenecks, &best)?[0];
        Ok(bottlenecks[top] < threshold)
    })?;
    Ok(OutageEstimate::from_counts(failures, trials))
}
