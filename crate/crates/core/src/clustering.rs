//! k-means with k-means++ seeding, silhouette score and silhouette-based
//! choice of the number of clusters.

use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::math::{dist, sq_dist};
use crate::rng::{Domain, RngStream};

/// Lloyd iterations per restart.
pub const MAX_ITERS: usize = 300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("need 2 <= k <= N, got k = {k} with N = {n}")]
    InvalidK { k: usize, n: usize },
    #[error("point matrix of length {len} is not a multiple of dimension {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("points contain non-finite coordinates")]
    NonFinite,
    #[error("{labels} labels for {points} points")]
    LabelMismatch { labels: usize, points: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("restarts must be at least 1")]
    NoRestarts,
}

/// Borrowed `N x d` row-major point matrix.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self, ClusterError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(ClusterError::Ragged { len: data.len(), dim });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    /// Cluster id in `0..k` per point.
    pub labels: Vec<usize>,
    /// `k x d` row-major centroids.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub silhouette: f64,
}

/// Output of a single Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Vec<f64>,
    /// Inertia after every centroid update.
    pub inertia_trace: Vec<f64>,
}

fn nearest(p: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    centroids
        .chunks_exact(dim)
        .enumerate()
        .map(|(c, ctr)| (c, sq_dist(p, ctr)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn recompute_centroids(points: Points<'_>, labels: &[usize], k: usize) -> Vec<f64> {
    let dim = points.dim();
    let mut sums = alloc::vec![0.0; k * dim];
    let mut counts = alloc::vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(points.get(i)) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums[c * dim..(c + 1) * dim].iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    sums
}

fn inertia(points: Points<'_>, labels: &[usize], centroids: &[f64]) -> f64 {
    let dim = points.dim();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.get(i), &centroids[l * dim..(l + 1) * dim]))
        .sum()
}

/// Moves, for each empty cluster, the point farthest from its own centroid
/// (among clusters with more than one member) into that cluster.
fn repair_empty(points: Points<'_>, labels: &mut [usize], centroids: &mut [f64], k: usize) {
    let dim = points.dim();
    loop {
        let mut counts = alloc::vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| {
                let l = labels[i];
                (i, sq_dist(points.get(i), &centroids[l * dim..(l + 1) * dim]))
            })
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((i, _)) = donor else {
            return;
        };
        labels[i] = empty;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(points.get(i));
    }
}

/// Lloyd iterations from the given centroids until assignments stop
/// changing or [`MAX_ITERS`] is reached.
pub fn lloyd(points: Points<'_>, initial: &[f64]) -> LloydRun {
    let dim = points.dim();
    let k = initial.len() / dim;
    let mut centroids = initial.to_vec();
    let mut labels: Vec<usize> = (0..points.len())
        .map(|i| nearest(points.get(i), &centroids, dim).0)
        .collect();
    let mut trace = Vec::new();
    for _ in 0..MAX_ITERS {
        repair_empty(points, &mut labels, &mut centroids, k);
        centroids = recompute_centroids(points, &labels, k);
        trace.push(inertia(points, &labels, &centroids));
        let next: Vec<usize> = (0..points.len())
            .map(|i| {
                let (c, dist_new) = nearest(points.get(i), &centroids, dim);
                // keep the current cluster on ties so the loop terminates
                let cur = labels[i];
                if sq_dist(points.get(i), &centroids[cur * dim..(cur + 1) * dim]) <= dist_new {
                    cur
                } else {
                    c
                }
            })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    LloydRun {
        labels,
        centroids,
        inertia_trace: trace,
    }
}

/// k-means++ seeding: first centre uniform, later ones with probability
/// proportional to the squared distance to the nearest chosen centre.
pub fn kmeans_pp_seeds<R: Rng + ?Sized>(points: Points<'_>, k: usize, rng: &mut R) -> Vec<f64> {
    let n = points.len();
    let dim = points.dim();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(points.get(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.get(i), points.get(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.get(pick);
        centroids.extend_from_slice(c);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(points.get(i), c));
        }
    }
    centroids
}

/// Best-of-`restarts` k-means (lowest inertia, earliest restart on ties).
pub fn kmeans(points: Points<'_>, k: usize, restarts: usize, seed: u64) -> Result<ClusterResult, ClusterError> {
    let n = points.len();
    if k < 2 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    if restarts == 0 {
        return Err(ClusterError::NoRestarts);
    }
    let mut best: Option<(f64, LloydRun)> = None;
    for r in 0..restarts {
        let mut rng = RngStream::new(seed, Domain::KMeans).iteration(k).sample(r).rng();
        let seeds = kmeans_pp_seeds(points, k, &mut rng);
        let run = lloyd(points, &seeds);
        let cost = *run.inertia_trace.last().expect("at least one Lloyd iteration");
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            best = Some((cost, run));
        }
    }
    let (inertia, run) = best.expect("restarts >= 1");
    let silhouette = silhouette(points, &run.labels)?;
    Ok(ClusterResult {
        k,
        labels: run.labels,
        centroids: run.centroids,
        inertia,
        silhouette,
    })
}

/// Mean silhouette `(d_out - d_in) / max(d_in, d_out)` over all points.
///
/// `d_in` averages distances to the other members of the point's cluster;
/// `d_out` is the smallest mean distance to another cluster. Points in
/// singleton clusters contribute 0, as do points with `d_in = d_out = 0`.
pub fn silhouette(points: Points<'_>, labels: &[usize]) -> Result<f64, ClusterError> {
    let n = points.len();
    if labels.len() != n {
        return Err(ClusterError::LabelMismatch {
            labels: labels.len(),
            points: n,
        });
    }
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let dense: Vec<usize> = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    let k = ids.len();
    let mut sizes = alloc::vec![0usize; k];
    dense.iter().for_each(|&l| sizes[l] += 1);

    let mut sums = alloc::vec![0.0; k];
    let mut total = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[dense[j]] += dist(points.get(i), points.get(j));
            }
        }
        let own = dense[i];
        if sizes[own] == 1 {
            continue;
        }
        let d_in = sums[own] / (sizes[own] - 1) as f64;
        let d_out = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = d_in.max(d_out);
        if denom > 0.0 {
            total += (d_out - d_in) / denom;
        }
    }
    Ok(total / n as f64)
}

/// One row of the silhouette-versus-k table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KScore {
    pub k: usize,
    pub silhouette: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub best: ClusterResult,
    pub table: Vec<KScore>,
}

/// Runs [`kmeans`] for `k = 2..=k_max` and keeps the highest silhouette,
/// preferring the smaller `k` on ties.
pub fn select_k(points: Points<'_>, k_max: usize, restarts: usize, seed: u64) -> Result<KSelection, ClusterError> {
    if k_max < 2 || k_max > points.len() {
        return Err(ClusterError::InvalidK {
            k: k_max,
            n: points.len(),
        });
    }
    let mut best: Option<ClusterResult> = None;
    let mut table = Vec::with_capacity(k_max - 1);
    for k in 2..=k_max {
        let res = kmeans(points, k, restarts, seed)?;
        table.push(KScore {
            k,
            silhouette: res.silhouette,
            inertia: res.inertia,
        });
        if best.as_ref().map_or(true, |b| res.silhouette > b.silhouette) {
            best = Some(res);
        }
    }
    Ok(KSelection {
        best: best.expect("k_max >= 2"),
        table,
    })
}
