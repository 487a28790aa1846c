//! MRT and full-pilot zero-forcing precoders, the transmit signal of a cell
//! and the received downlink sample.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::{complex_gaussian, ChannelEstimates, PilotAssignment};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderScheme {
    Mrt,
    Fzf,
}

impl PrecoderScheme {
    pub fn name(self) -> &'static str {
        match self {
            PrecoderScheme::Mrt => "mrt",
            PrecoderScheme::Fzf => "fzf",
        }
    }

    pub fn check_dimensions(self, antennas: usize, pilots: usize) -> Result<()> {
        if self == PrecoderScheme::Fzf && antennas <= pilots {
            return Err(Error::ZeroForcingDimension { antennas, pilots });
        }
        Ok(())
    }
}

/// How `E{||h_hat||^2}` is obtained for MRT normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// `N gamma_mk`.
    Analytic,
    /// Caller-supplied second moments `[m][k]`, e.g. from
    /// [`empirical_second_moments`].
    Empirical(Vec<Vec<f64>>),
}

/// Precoders `w[m][k]` of length N. A link with zero estimate quality gets a
/// zero vector and `inactive[m][k] = true`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingVectors {
    pub w: Vec<Vec<Vec<C64>>>,
    pub inactive: Vec<Vec<bool>>,
}

fn scaled(v: &[C64], s: f64) -> Vec<C64> {
    v.iter().map(|z| z * s).collect()
}

/// `w_mk = h_hat_mk / sqrt(E{||h_hat_mk||^2})`.
pub fn mrt_weights(est: &ChannelEstimates, normalization: &Normalization) -> PrecodingVectors {
    let antennas = est
        .h_hat
        .first()
        .and_then(|r| r.first())
        .map_or(0, Vec::len);
    let mut w = Vec::with_capacity(est.h_hat.len());
    let mut inactive = Vec::with_capacity(est.h_hat.len());
    for (m, cell) in est.h_hat.iter().enumerate() {
        let mut row = Vec::with_capacity(cell.len());
        let mut flags = Vec::with_capacity(cell.len());
        for (k, h_hat) in cell.iter().enumerate() {
            let second_moment = match normalization {
                Normalization::Analytic => antennas as f64 * est.gamma[m][k],
                Normalization::Empirical(table) => table[m][k],
            };
            if second_moment > 0.0 {
                row.push(scaled(h_hat, second_moment.sqrt().recip()));
                flags.push(false);
            } else {
                row.push(vec![C64::new(0.0, 0.0); antennas]);
                flags.push(true);
            }
        }
        w.push(row);
        inactive.push(flags);
    }
    PrecodingVectors { w, inactive }
}

/// Sample mean of `||h_hat_mk||^2` over the supplied estimate draws.
pub fn empirical_second_moments<'a, I>(draws: I) -> Vec<Vec<f64>>
where
    I: IntoIterator<Item = &'a ChannelEstimates>,
{
    let mut acc: Vec<Vec<f64>> = Vec::new();
    let mut count = 0usize;
    for est in draws {
        if acc.is_empty() {
            acc = est.gamma.iter().map(|r| vec![0.0; r.len()]).collect();
        }
        for (m, cell) in est.h_hat.iter().enumerate() {
            for (k, v) in cell.iter().enumerate() {
                acc[m][k] += v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        count += 1;
    }
    for row in &mut acc {
        for v in row.iter_mut() {
            *v /= count.max(1) as f64;
        }
    }
    acc
}

/// Smallest Cholesky pivot ratio accepted before a Gram matrix is treated as
/// rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

/// Zero-forcing directions at one cell: for every pilot t the vector `v_t`
/// with `y_t'^H v_t = delta_tt'`, i.e. the columns of `Y (Y^H Y)^{-1}` where
/// `Y = [y_0 … y_{tau_p-1}]` stacks the despread pilot observations.
pub fn zero_forcing_directions(observations: &[Vec<C64>], cell: usize) -> Result<Vec<Vec<C64>>> {
    let tau = observations.len();
    let antennas = observations.first().map_or(0, Vec::len);
    let y = DMatrix::from_fn(antennas, tau, |n, t| observations[t][n]);
    let gram = y.adjoint() * &y;
    let max_diag = (0..tau).map(|t| gram[(t, t)].re).fold(0.0, f64::max);
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::RankDeficient { cell })?;
    let l = chol.l();
    let min_pivot = (0..tau)
        .map(|t| l[(t, t)].re.powi(2))
        .fold(f64::INFINITY, f64::min);
    if !(max_diag > 0.0) || min_pivot < RANK_TOLERANCE * max_diag {
        return Err(Error::RankDeficient { cell });
    }
    let dual = &y * chol.inverse();
    Ok((0..tau)
        .map(|t| dual.column(t).iter().copied().collect())
        .collect())
}

/// Full-pilot zero-forcing precoders for every UE at one cell.
///
/// The direction for UE k is `H_hat (H_hat^H H_hat)^{-1} e_{i_k}` where column
/// `i_k` of `H_hat` is `h_hat_mk` (the other columns are the remaining pilot
/// directions; their scale does not affect the result). Unit second moment
/// uses `E{||.||^2} = 1 / ((N - tau_p) gamma_mk)`.
pub fn fzf_cell_weights(
    est: &ChannelEstimates,
    pilots: &PilotAssignment,
    cell: usize,
) -> Result<(Vec<Vec<C64>>, Vec<bool>)> {
    let tau = pilots.pilot_length;
    let antennas = est.observations[cell].first().map_or(0, Vec::len);
    PrecoderScheme::Fzf.check_dimensions(antennas, tau)?;
    let dirs = zero_forcing_directions(&est.observations[cell], cell)?;
    let psi = &est.observation_variance[cell];
    let mut w = Vec::with_capacity(pilots.num_ues());
    let mut inactive = Vec::with_capacity(pilots.num_ues());
    for (k, &t) in pilots.pilot_index.iter().enumerate() {
        let gamma = est.gamma[cell][k];
        if gamma > 0.0 {
            // h_hat_mk = c y_t with c = sqrt(gamma / psi); the dual of h_hat is v_t / c.
            // Scaling by sqrt((N - tau) gamma) then reduces to sqrt((N - tau) psi).
            let s = ((antennas - tau) as f64 * psi[t]).sqrt();
            w.push(scaled(&dirs[t], s));
            inactive.push(false);
        } else {
            w.push(vec![C64::new(0.0, 0.0); antennas]);
            inactive.push(true);
        }
    }
    Ok((w, inactive))
}

/// Single-UE view of [`fzf_cell_weights`].
pub fn fzf_weights(
    est: &ChannelEstimates,
    pilots: &PilotAssignment,
    cell: usize,
    ue: usize,
) -> Result<Vec<C64>> {
    let (mut w, _) = fzf_cell_weights(est, pilots, cell)?;
    Ok(w.swap_remove(ue))
}

/// Precoders for every cell in `cells` (others left as zero vectors).
pub fn precoders(
    scheme: PrecoderScheme,
    est: &ChannelEstimates,
    pilots: &PilotAssignment,
    cells: &[usize],
) -> Result<PrecodingVectors> {
    match scheme {
        PrecoderScheme::Mrt => Ok(mrt_weights(est, &Normalization::Analytic)),
        PrecoderScheme::Fzf => {
            let antennas = est
                .observations
                .first()
                .and_then(|c| c.first())
                .map_or(0, Vec::len);
            let num_ues = pilots.num_ues();
            let mut w = vec![vec![vec![C64::new(0.0, 0.0); antennas]; num_ues]; est.h_hat.len()];
            let mut inactive = vec![vec![true; num_ues]; est.h_hat.len()];
            for &m in cells {
                let (wm, flags) = fzf_cell_weights(est, pilots, m)?;
                w[m] = wm;
                inactive[m] = flags;
            }
            Ok(PrecodingVectors { w, inactive })
        }
    }
}

/// `x_m = sum_k sqrt(rho_mk) w_mk s_k` for one cell.
pub fn transmit_signal(rho: &[f64], w: &[Vec<C64>], symbols: &[C64]) -> Vec<C64> {
    let antennas = w.first().map_or(0, Vec::len);
    let mut x = vec![C64::new(0.0, 0.0); antennas];
    for ((&p, wk), &s) in rho.iter().zip(w).zip(symbols) {
        let a = s * p.sqrt();
        for (xn, wn) in x.iter_mut().zip(wk) {
            *xn += wn * a;
        }
    }
    x
}

/// `h^H x`.
pub fn inner(h: &[C64], x: &[C64]) -> C64 {
    h.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
}

/// `sum_{m in A} h_mk^H x_m + noise` with an explicit noise sample.
pub fn received_with_noise(x: &[Vec<C64>], h_k: &[Vec<C64>], active: &[bool], noise: C64) -> C64 {
    let signal: C64 = active
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(m, _)| inner(&h_k[m], &x[m]))
        .sum();
    signal + noise
}

/// Received sample at one UE: `x[m]` and `h_k[m]` indexed by cell.
pub fn received_sample<R: Rng + ?Sized>(
    x: &[Vec<C64>],
    h_k: &[Vec<C64>],
    active: &[bool],
    noise_variance: f64,
    rng: &mut R,
) -> C64 {
    received_with_noise(x, h_k, active, complex_gaussian(rng, noise_variance))
}
