//! Symbol mapping, flat-fading links, ML detection and network encoding.

use std::f64::consts::PI;

use rand::Rng;

use super::field::PrimeField;
use crate::scenario::complex_gaussian;
use crate::{Error, Result, C64};

/// q-PSK: value v maps to `exp(2 pi i v / q)`. For q = 2 this is BPSK (+1, -1).
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
}

impl Constellation {
    pub fn psk(q: u32) -> Self {
        let points = (0..q)
            .map(|v| {
                let phase = 2.0 * PI * v as f64 / q as f64;
                // exact values on the axes keep BPSK symmetric
                let (s, c) = phase.sin_cos();
                C64::new(snap(c), snap(s))
            })
            .collect();
        Constellation { points }
    }

    pub fn for_field(field: &PrimeField) -> Self {
        Self::psk(field.order())
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, v: u32) -> C64 {
        self.points[v as usize]
    }

    pub fn modulate(&self, frame: &[u32]) -> Vec<C64> {
        frame.iter().map(|&v| self.point(v)).collect()
    }
}

fn snap(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

/// `y = sqrt(rho) h x + n`, `n ~ CN(0, noise_variance)` i.i.d. per symbol.
pub fn transmit<R: Rng + ?Sized>(
    symbols: &[C64],
    gain: C64,
    tx_snr: f64,
    noise_variance: f64,
    rng: &mut R,
) -> Vec<C64> {
    let a = gain * tx_snr.sqrt();
    symbols
        .iter()
        .map(|&x| {
            let n = if noise_variance > 0.0 {
                complex_gaussian(rng, noise_variance)
            } else {
                C64::new(0.0, 0.0)
            };
            a * x + n
        })
        .collect()
}

/// Relay-to-destination transmission of a coded frame.
pub fn relay_transmit<R: Rng + ?Sized>(
    coded: &[u32],
    constellation: &Constellation,
    gain: C64,
    tx_snr: f64,
    noise_variance: f64,
    rng: &mut R,
) -> Vec<C64> {
    transmit(
        &constellation.modulate(coded),
        gain,
        tx_snr,
        noise_variance,
        rng,
    )
}

/// Symbol-wise maximum-likelihood detection:
/// `argmin_v |y - sqrt(rho) h x(v)|^2` over all q candidates, lowest value on ties.
pub fn ml_decode(
    received: &[C64],
    gain: C64,
    tx_snr: f64,
    constellation: &Constellation,
) -> Vec<u32> {
    let a = gain * tx_snr.sqrt();
    received
        .iter()
        .map(|&y| {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for v in 0..constellation.size() as u32 {
                let d = (y - a * constellation.point(v)).norm_sqr();
                if d < best_d {
                    best_d = d;
                    best = v;
                }
            }
            best
        })
        .collect()
}

/// Position-wise `sum_k alpha_k ⊗ frame_k` over the field.
pub fn network_encode(frames: &[Vec<u32>], alpha: &[u32], field: &PrimeField) -> Result<Vec<u32>> {
    if alpha.len() != frames.len() {
        return Err(Error::LengthMismatch {
            expected: frames.len(),
            got: alpha.len(),
        });
    }
    let len = frames.first().map_or(0, Vec::len);
    Ok((0..len)
        .map(|i| {
            frames
                .iter()
                .zip(alpha)
                .fold(0, |acc, (f, &a)| field.add(acc, field.mul(a, f[i])))
        })
        .collect())
}
