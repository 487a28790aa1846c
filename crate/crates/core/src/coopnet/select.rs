//! Ordered-SNR source and relay selection.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Strictly increasing set of 1-based descending-order ranks, e.g.
/// `{1, 4, 5}` picks the best, fourth-best and fifth-best entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct RankSet(Vec<usize>);

impl RankSet {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::InvalidRankSet("rank set is empty".into()));
        }
        if ranks[0] == 0 {
            return Err(Error::InvalidRankSet("ranks are 1-based".into()));
        }
        for w in ranks.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidRankSet(format!("duplicate rank {}", w[0])));
            }
            if w[0] > w[1] {
                return Err(Error::InvalidRankSet(format!(
                    "ranks must increase ({} > {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(RankSet(ranks))
    }

    /// `{1, …, n}`.
    pub fn top(n: usize) -> Self {
        RankSet((1..=n).collect())
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_rank(&self) -> usize {
        *self.0.last().expect("nonempty")
    }
}

impl TryFrom<Vec<usize>> for RankSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        RankSet::new(v)
    }
}

impl From<RankSet> for Vec<usize> {
    fn from(r: RankSet) -> Self {
        r.0
    }
}

/// Indices ordered by descending value; ties keep the lower index first.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

fn pick_ranked(values: &[f64], ranks: &RankSet) -> Result<Vec<usize>> {
    if ranks.max_rank() > values.len() {
        return Err(Error::InvalidRankSet(format!(
            "rank {} exceeds the {} candidates",
            ranks.max_rank(),
            values.len()
        )));
    }
    let order = descending_order(values);
    Ok(ranks.ranks().iter().map(|&r| order[r - 1]).collect())
}

/// Sources whose direct-link SNR ranks equal the entries of `ranks`, in rank
/// order (0-based source ids).
pub fn select_sources(direct_snr: &[f64], ranks: &RankSet) -> Result<Vec<usize>> {
    pick_ranked(direct_snr, ranks)
}

/// Bottleneck SNR of one relay: the minimum over the selected sources'
/// links into it and its own link to the destination.
pub fn bottleneck_snr(
    source_relay_snr: &[f64],
    selected: &[usize],
    relay_destination_snr: f64,
) -> f64 {
    selected
        .iter()
        .map(|&s| source_relay_snr[s])
        .fold(relay_destination_snr, f64::min)
}

/// Relays at the given descending bottleneck ranks, in rank order.
pub fn select_relays(bottlenecks: &[f64], ranks: &RankSet) -> Result<Vec<usize>> {
    pick_ranked(bottlenecks, ranks)
}
