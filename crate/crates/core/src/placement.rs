//! Replica placement: K-means partitioning followed by p-center selection
//! inside every cluster, scored by weighted mean response time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::Point;
use crate::{Error, Result};

/// Sites with demand weights and a symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    /// Present when the sites came from coordinates.
    pub points: Option<Vec<Point>>,
    pub distances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn check_weights(weights: &[f64], n: usize, errs: &mut Vec<String>) {
    if weights.len() != n {
        errs.push(format!("{} weights for {n} sites", weights.len()));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        errs.push("weights must be finite and >= 0".into());
    }
    if !weights.iter().any(|&w| w > 0.0) {
        errs.push("at least one weight must be positive".into());
    }
}

impl SiteSet {
    pub fn from_points(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let mut errs = Vec::new();
        if points.is_empty() {
            errs.push("no sites".to_string());
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            errs.push("site coordinates must be finite".into());
        }
        check_weights(&weights, points.len(), &mut errs);
        if !errs.is_empty() {
            return Err(Error::InvalidConfig(errs));
        }
        let distances = points
            .iter()
            .map(|a| points.iter().map(|b| a.distance(b)).collect())
            .collect();
        Ok(SiteSet {
            points: Some(points),
            distances,
            weights,
        })
    }

    pub fn from_matrix(distances: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = distances.len();
        let mut errs = Vec::new();
        if n == 0 {
            errs.push("no sites".to_string());
        }
        for (i, row) in distances.iter().enumerate() {
            if row.len() != n {
                errs.push(format!("row {i} has {} entries, expected {n}", row.len()));
                continue;
            }
            if row[i] != 0.0 {
                errs.push(format!("diagonal entry {i} is not zero"));
            }
            for (j, &d) in row.iter().enumerate() {
                if !(d >= 0.0 && d.is_finite()) {
                    errs.push(format!("distance ({i}, {j}) must be finite and >= 0"));
                } else if j < i && distances[j].get(i) != Some(&d) {
                    errs.push(format!("distance matrix not symmetric at ({i}, {j})"));
                }
            }
        }
        check_weights(&weights, n, &mut errs);
        if !errs.is_empty() {
            return Err(Error::InvalidConfig(errs));
        }
        Ok(SiteSet {
            points: None,
            distances,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Same sites with every distance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SiteSet {
        SiteSet {
            points: self.points.as_ref().map(|ps| {
                ps.iter()
                    .map(|p| Point::new(p.x * factor, p.y * factor))
                    .collect()
            }),
            distances: self
                .distances
                .iter()
                .map(|r| r.iter().map(|d| d * factor).collect())
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub k: usize,
    /// Within-cluster sum of squared distances after each iteration.
    pub objective_history: Vec<f64>,
}

impl Clustering {
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == c)
            .collect()
    }
}

/// Farthest-point seeding: first center drawn uniformly, then repeatedly the
/// site farthest from all chosen centers (lowest index on ties).
fn farthest_point_seeds<R: Rng + ?Sized>(dist: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let n = dist.len();
    let mut seeds = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = dist[seeds[0]].clone();
    while seeds.len() < k {
        let next = (0..n)
            .filter(|i| !seeds.contains(i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if nearest[b] >= nearest[i] => Some(b),
                _ => Some(i),
            })
            .expect("k <= n");
        seeds.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist[next][i]);
        }
    }
    seeds
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, v)| if v < best.1 { (i, v) } else { best },
        )
        .0
}

/// Lloyd iterations on coordinates (or, for matrix-only sites, medoid
/// updates under the same squared-distance objective). Empty clusters are
/// reseeded with the site farthest from its current center.
pub fn kmeans<R: Rng + ?Sized>(
    sites: &SiteSet,
    k: usize,
    rng: &mut R,
    max_iter: usize,
) -> Result<Clustering> {
    let n = sites.len();
    if k == 0 || k > n {
        return Err(Error::InvalidClusterCount { k, sites: n });
    }
    let seeds = farthest_point_seeds(&sites.distances, k, rng);
    let mut assignment = vec![0usize; n];
    let mut history = Vec::new();

    match &sites.points {
        Some(points) => {
            let mut centroids: Vec<Point> = seeds.iter().map(|&s| points[s]).collect();
            let sq = |a: &Point, b: &Point| (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
            for _ in 0..max_iter.max(1) {
                for (i, p) in points.iter().enumerate() {
                    assignment[i] = argmin(centroids.iter().map(|c| sq(p, c)));
                }
                for c in 0..k {
                    if !assignment.contains(&c) {
                        let far = argmin(
                            points
                                .iter()
                                .enumerate()
                                .map(|(i, p)| -sq(p, &centroids[assignment[i]])),
                        );
                        assignment[far] = c;
                    }
                }
                let mut next = vec![Point::new(0.0, 0.0); k];
                let mut counts = vec![0usize; k];
                for (i, p) in points.iter().enumerate() {
                    next[assignment[i]].x += p.x;
                    next[assignment[i]].y += p.y;
                    counts[assignment[i]] += 1;
                }
                for (c, cnt) in counts.iter().enumerate() {
                    next[c].x /= *cnt as f64;
                    next[c].y /= *cnt as f64;
                }
                history.push(
                    points
                        .iter()
                        .enumerate()
                        .map(|(i, p)| sq(p, &next[assignment[i]]))
                        .sum(),
                );
                let moved = next != centroids;
                centroids = next;
                if !moved {
                    break;
                }
            }
        }
        None => {
            let d = &sites.distances;
            let mut medoids = seeds;
            for _ in 0..max_iter.max(1) {
                for i in 0..n {
                    assignment[i] = argmin(medoids.iter().map(|&m| d[i][m]));
                }
                for c in 0..k {
                    if !assignment.contains(&c) {
                        let far = argmin((0..n).map(|i| -d[i][medoids[assignment[i]]]));
                        assignment[far] = c;
                    }
                }
                let next: Vec<usize> = (0..k)
                    .map(|c| {
                        let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == c).collect();
                        let best = argmin(
                            members
                                .iter()
                                .map(|&m| members.iter().map(|&i| d[i][m].powi(2)).sum()),
                        );
                        members[best]
                    })
                    .collect();
                history.push((0..n).map(|i| d[i][next[assignment[i]]].powi(2)).sum());
                let moved = next != medoids;
                medoids = next;
                if !moved {
                    break;
                }
            }
        }
    }
    Ok(Clustering {
        assignment,
        k,
        objective_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCenterSolution {
    /// Site indices, ascending.
    pub centers: Vec<usize>,
    /// Largest member-to-nearest-center distance.
    pub radius: f64,
    pub exact: bool,
}

/// Clusters up to this size are solved exactly.
pub const EXACT_LIMIT: usize = 12;

fn radius(members: &[usize], centers: &[usize], dist: &[Vec<f64>]) -> f64 {
    members
        .iter()
        .map(|&i| {
            centers
                .iter()
                .map(|&c| dist[i][c])
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn check_p(members: &[usize], p: usize) -> Result<()> {
    if p == 0 || p > members.len() {
        return Err(Error::InvalidCenterCount {
            p,
            size: members.len(),
        });
    }
    Ok(())
}

/// Exhaustive search over all p-subsets of `members` in lexicographic
/// order; the first subset attaining the minimum radius wins.
pub fn p_center_exact(members: &[usize], dist: &[Vec<f64>], p: usize) -> Result<PCenterSolution> {
    check_p(members, p)?;
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut idx: Vec<usize> = (0..p).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let centers: Vec<usize> = idx.iter().map(|&i| sorted[i]).collect();
        let r = radius(&sorted, &centers, dist);
        if best.as_ref().is_none_or(|b| r < b.1) {
            best = Some((centers, r));
        }
        // next combination
        let Some(pos) = (0..p).rev().find(|&i| idx[i] != i + n - p) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let (centers, radius) = best.expect("at least one subset");
    Ok(PCenterSolution {
        centers,
        radius,
        exact: true,
    })
}

/// Farthest-point greedy (2-approximation), started from the member with
/// the smallest eccentricity; ties go to the lowest index.
pub fn p_center_greedy(members: &[usize], dist: &[Vec<f64>], p: usize) -> Result<PCenterSolution> {
    check_p(members, p)?;
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let first = sorted[argmin(sorted.iter().map(|&c| radius(&sorted, &[c], dist)))];
    let mut centers = vec![first];
    while centers.len() < p {
        let far = sorted
            .iter()
            .copied()
            .filter(|i| !centers.contains(i))
            .fold(None, |best: Option<(usize, f64)>, i| {
                let d = centers
                    .iter()
                    .map(|&c| dist[i][c])
                    .fold(f64::INFINITY, f64::min);
                match best {
                    Some(b) if b.1 >= d => Some(b),
                    _ => Some((i, d)),
                }
            })
            .expect("p <= size")
            .0;
        centers.push(far);
    }
    centers.sort_unstable();
    let r = radius(&sorted, &centers, dist);
    Ok(PCenterSolution {
        centers,
        radius: r,
        exact: false,
    })
}

/// Exact for clusters up to [`EXACT_LIMIT`] sites, greedy beyond.
pub fn p_center(members: &[usize], dist: &[Vec<f64>], p: usize) -> Result<PCenterSolution> {
    if members.len() <= EXACT_LIMIT {
        p_center_exact(members, dist, p)
    } else {
        p_center_greedy(members, dist, p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaPlacement {
    pub cluster: Vec<usize>,
    /// Replica sites of every cluster.
    pub cluster_centers: Vec<Vec<usize>>,
    /// Nearest replica (over all clusters) per site.
    pub nearest_center: Vec<usize>,
    /// Response time to that replica.
    pub response_time: Vec<f64>,
    /// `sum_i w_i t_i / sum_i w_i`.
    pub cost: f64,
    pub worst_case: f64,
}

impl ReplicaPlacement {
    pub fn centers(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.cluster_centers.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Weighted mean of `time_per_unit * d(i, nearest center)`.
pub fn weighted_cost(sites: &SiteSet, centers: &[usize], time_per_unit: f64) -> f64 {
    let total: f64 = sites.weights.iter().sum();
    (0..sites.len())
        .map(|i| {
            let d = centers
                .iter()
                .map(|&c| sites.distances[i][c])
                .fold(f64::INFINITY, f64::min);
            sites.weights[i] * d * time_per_unit
        })
        .sum::<f64>()
        / total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementParams {
    pub clusters: usize,
    /// Replicas per cluster; clusters smaller than this get one per site.
    pub replicas_per_cluster: usize,
    pub max_iter: usize,
    /// Response time per unit of distance.
    pub time_per_unit: f64,
}

impl Default for PlacementParams {
    fn default() -> Self {
        PlacementParams {
            clusters: 3,
            replicas_per_cluster: 1,
            max_iter: 100,
            time_per_unit: 1.0,
        }
    }
}

pub fn hybrid_place<R: Rng + ?Sized>(
    sites: &SiteSet,
    params: &PlacementParams,
    rng: &mut R,
) -> Result<ReplicaPlacement> {
    if params.replicas_per_cluster == 0 {
        return Err(Error::InvalidCenterCount {
            p: 0,
            size: sites.len(),
        });
    }
    let clustering = kmeans(sites, params.clusters, rng, params.max_iter)?;
    let cluster_centers = (0..clustering.k)
        .map(|c| {
            let members = clustering.members(c);
            let p = params.replicas_per_cluster.min(members.len());
            p_center(&members, &sites.distances, p).map(|s| s.centers)
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = cluster_centers.iter().flatten().copied().collect();
    let nearest_center: Vec<usize> = (0..sites.len())
        .map(|i| all[argmin(all.iter().map(|&c| sites.distances[i][c]))])
        .collect();
    let response_time: Vec<f64> = (0..sites.len())
        .map(|i| sites.distances[i][nearest_center[i]] * params.time_per_unit)
        .collect();
    let total: f64 = sites.weights.iter().sum();
    let cost = sites
        .weights
        .iter()
        .zip(&response_time)
        .map(|(w, t)| w * t)
        .sum::<f64>()
        / total;
    let worst_case = response_time.iter().copied().fold(0.0, f64::max);
    Ok(ReplicaPlacement {
        cluster: clustering.assignment,
        cluster_centers,
        nearest_center,
        response_time,
        cost,
        worst_case,
    })
}

/// Cost of `count` replicas drawn uniformly without replacement.
pub fn random_placement_cost<R: Rng + ?Sized>(
    sites: &SiteSet,
    count: usize,
    time_per_unit: f64,
    rng: &mut R,
) -> f64 {
    let centers = rand::seq::index::sample(rng, sites.len(), count.min(sites.len())).into_vec();
    weighted_cost(sites, &centers, time_per_unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn line(xs: &[f64]) -> SiteSet {
        SiteSet::from_points(
            xs.iter().map(|&x| Point::new(x, 0.0)).collect(),
            vec![1.0; xs.len()],
        )
        .unwrap()
    }

    #[test]
    fn collinear_one_center() {
        let s = line(&[0.0, 1.0, 10.0]);
        let sol = p_center_exact(&[0, 1, 2], &s.distances, 1).unwrap();
        assert_eq!(sol.centers, vec![1]);
        assert_eq!(sol.radius, 9.0);
        assert_eq!(
            p_center_greedy(&[0, 1, 2], &s.distances, 1)
                .unwrap()
                .centers,
            vec![1]
        );
    }

    #[test]
    fn every_site_a_center() {
        let s = line(&[0.0, 2.0, 5.0, 9.0]);
        for f in [p_center_exact, p_center_greedy] {
            let sol = f(&[0, 1, 2, 3], &s.distances, 4).unwrap();
            assert_eq!(sol.centers, vec![0, 1, 2, 3]);
            assert_eq!(sol.radius, 0.0);
        }
    }

    #[test]
    fn p_out_of_range() {
        let s = line(&[0.0, 1.0]);
        assert!(matches!(
            p_center(&[0, 1], &s.distances, 3),
            Err(Error::InvalidCenterCount { .. })
        ));
        assert!(p_center(&[0, 1], &s.distances, 0).is_err());
    }

    #[test]
    fn kmeans_singletons() {
        let s = line(&[0.0, 3.0, 7.0, 8.0]);
        let c = kmeans(&s, 4, &mut derive_rng(1, "km", 0), 50).unwrap();
        let mut a = c.assignment.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 4);
        assert_eq!(*c.objective_history.last().unwrap(), 0.0);
        assert!(kmeans(&s, 5, &mut derive_rng(1, "km", 0), 50).is_err());
    }

    #[test]
    fn kmeans_separates_two_groups() {
        let mut rng = derive_rng(3, "km", 0);
        let mut pts = Vec::new();
        for g in 0..2 {
            for _ in 0..15 {
                let base = if g == 0 { 0.0 } else { 1000.0 };
                pts.push(Point::new(
                    base + rng.random::<f64>(),
                    base + rng.random::<f64>(),
                ));
            }
        }
        let s = SiteSet::from_points(pts, vec![1.0; 30]).unwrap();
        for seed in 0..10 {
            let c = kmeans(&s, 2, &mut derive_rng(seed, "km", 1), 100).unwrap();
            assert!(c.assignment[..15].iter().all(|&a| a == c.assignment[0]));
            assert!(c.assignment[15..].iter().all(|&a| a == c.assignment[15]));
            assert_ne!(c.assignment[0], c.assignment[15]);
        }
    }

    #[test]
    fn kmeans_objective_nonincreasing() {
        for seed in 0..50 {
            let mut rng = derive_rng(seed, "km-mono", 0);
            let pts: Vec<Point> = (0..40)
                .map(|_| Point::new(rng.random(), rng.random()))
                .collect();
            let s = SiteSet::from_points(pts, vec![1.0; 40]).unwrap();
            let c = kmeans(&s, 5, &mut rng, 100).unwrap();
            for w in c.objective_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", c.objective_history);
            }
        }
    }

    #[test]
    fn matrix_sites_cluster_too() {
        let pts = line(&[0.0, 1.0, 2.0, 50.0, 51.0]);
        let s = SiteSet::from_matrix(pts.distances.clone(), vec![1.0; 5]).unwrap();
        let c = kmeans(&s, 2, &mut derive_rng(0, "km", 0), 20).unwrap();
        assert_eq!(c.assignment[0], c.assignment[2]);
        assert_eq!(c.assignment[3], c.assignment[4]);
        assert_ne!(c.assignment[0], c.assignment[3]);
    }

    #[test]
    fn matrix_validation() {
        assert!(
            SiteSet::from_matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 1.0]).is_err()
        );
        assert!(SiteSet::from_matrix(vec![vec![1.0]], vec![1.0]).is_err());
        assert!(SiteSet::from_matrix(vec![vec![0.0]], vec![0.0]).is_err());
    }

    #[test]
    fn single_site() {
        let s = line(&[4.0]);
        let params = PlacementParams {
            clusters: 1,
            ..PlacementParams::default()
        };
        let p = hybrid_place(&s, &params, &mut derive_rng(0, "p", 0)).unwrap();
        assert_eq!(p.centers(), vec![0]);
        assert_eq!(p.cost, 0.0);
    }

    #[test]
    fn uniform_weights_give_plain_mean() {
        let mut rng = derive_rng(8, "p", 0);
        let pts: Vec<Point> = (0..20)
            .map(|_| Point::new(rng.random(), rng.random()))
            .collect();
        let s = SiteSet::from_points(pts, vec![2.5; 20]).unwrap();
        let p = hybrid_place(&s, &PlacementParams::default(), &mut rng).unwrap();
        let mean = p.response_time.iter().sum::<f64>() / 20.0;
        assert!((p.cost - mean).abs() < 1e-12);
    }
}
