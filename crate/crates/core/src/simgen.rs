//! Simulated graphs and node series.
//!
//! Series length is written `n` throughout (the number of time points `T`
//! in the recursions). All generators are deterministic functions of their
//! arguments and seed.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::graph::{Graph, NodeSeries};
use crate::rng::{Domain, RngStream};

const GRAPH_STREAM: usize = 1;
const AR_STREAM: usize = 2;
const VAR_STREAM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("edge probabilities must satisfy 0 <= p_out <= p_in <= 1 (got p_in = {p_in}, p_out = {p_out})")]
    InvalidProbability { p_in: f64, p_out: f64 },
    #[error("AR coefficient {psi} of cluster {cluster} is not stationary")]
    NonStationary { cluster: usize, psi: f64 },
    #[error("noise variance of cluster {cluster} must be positive")]
    NonPositiveVariance { cluster: usize },
    #[error("correlation {0} outside [0, 1)")]
    InvalidCorrelation(f64),
    #[error("label {label} has no parameters ({n_clusters} clusters configured)")]
    LabelOutOfRange { label: usize, n_clusters: usize },
    #[error("per-cluster parameter lists have different lengths")]
    ParameterMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("cluster sizes {sizes:?} do not fit a {rows}x{cols} grid")]
    GridSizes { rows: usize, cols: usize, sizes: [usize; 4] },
    #[error("series length must be at least 1")]
    ZeroLength,
    #[error("no preset for scenario {scenario} with {n_nodes} nodes")]
    NoPreset { scenario: u8, n_nodes: usize },
    #[error("cluster sizes are empty or contain zero")]
    EmptyCluster,
}

/// Labels `0, 0, ..., 1, 1, ...` for contiguous blocks of the given sizes.
pub fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(k, &s)| core::iter::repeat(k).take(s)).collect()
}

/// Stochastic block graph: each unordered pair is joined independently with
/// probability `p_in` inside a block and `p_out` across blocks.
pub fn gen_block_graph(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<(Graph, Vec<usize>), SimError> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=p_in).contains(&p_out) {
        return Err(SimError::InvalidProbability { p_in, p_out });
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(SimError::EmptyCluster);
    }
    let labels = block_labels(sizes);
    let n = labels.len();
    let mut rng = RngStream::new(seed, Domain::Simulation).iteration(GRAPH_STREAM).rng();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges).expect("block edges are valid");
    Ok((graph, labels))
}

/// 4-neighbour lattice on `rows x cols` cells, numbered row-major.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph, SimError> {
    if rows == 0 || cols == 0 {
        return Err(SimError::InvalidGrid("rows and cols must be positive"));
    }
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    Ok(Graph::from_edges(rows * cols, &edges).expect("lattice edges are valid"))
}

/// Lattice with quadrant labels split at `row_split` and `col_split`:
/// 0 top left, 1 top right, 2 bottom left, 3 bottom right.
pub fn gen_grid_graph(
    rows: usize,
    cols: usize,
    row_split: usize,
    col_split: usize,
) -> Result<(Graph, Vec<usize>), SimError> {
    if row_split == 0 || row_split >= rows || col_split == 0 || col_split >= cols {
        return Err(SimError::InvalidGrid("splits must lie strictly inside the grid"));
    }
    let graph = grid_graph(rows, cols)?;
    let labels = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            2 * usize::from(r >= row_split) + usize::from(c >= col_split)
        })
        .collect();
    Ok((graph, labels))
}

/// Spreads `total` over segments of the given capacities as evenly as
/// possible, filling earlier segments first.
fn spread(total: usize, caps: &[usize]) -> Option<Vec<usize>> {
    if caps.is_empty() {
        return (total == 0).then(Vec::new);
    }
    let m = caps.len();
    let mut out: Vec<usize> = (0..m).map(|r| (total / m + usize::from(r < total % m)).min(caps[r])).collect();
    let mut left = total - out.iter().sum::<usize>();
    for (o, &cap) in out.iter_mut().zip(caps) {
        let add = left.min(cap - *o);
        *o += add;
        left -= add;
    }
    (left == 0).then_some(out)
}

/// Four regional clusters of arbitrary sizes on a lattice.
///
/// The top region is the first `sizes[0] + sizes[1]` cells in row-major
/// order. In every row of it the top-left cluster takes a left run and the
/// top-right cluster the rest; in every full row below, the bottom-left
/// cluster takes a left run and the bottom-right cluster the rest. Run
/// lengths differ by at most one between rows, and a partly filled top row
/// gets the shorter runs.
pub fn sized_grid_labels(rows: usize, cols: usize, sizes: [usize; 4]) -> Result<Vec<usize>, SimError> {
    let bad = || SimError::GridSizes { rows, cols, sizes };
    if rows == 0 || cols == 0 {
        return Err(SimError::InvalidGrid("rows and cols must be positive"));
    }
    if sizes.iter().sum::<usize>() != rows * cols || sizes.contains(&0) {
        return Err(bad());
    }
    let top = sizes[0] + sizes[1];
    let (full, partial) = (top / cols, top % cols);
    let mut top_caps = vec![cols; full];
    if partial > 0 {
        top_caps.push(partial);
    }
    // full rows first so the partial row receives the smaller share
    let tl = spread(sizes[0], &top_caps).ok_or_else(bad)?;
    let bottom_rows = rows - top_caps.len();
    let bl = spread(sizes[2], &vec![cols; bottom_rows]).ok_or_else(bad)?;

    let mut labels = vec![3usize; rows * cols];
    for (r, (&cap, &left)) in top_caps.iter().zip(&tl).enumerate() {
        for c in 0..cap {
            labels[r * cols + c] = if c < left { 0 } else { 1 };
        }
    }
    for (k, &left) in bl.iter().enumerate() {
        let r = top_caps.len() + k;
        for c in 0..left {
            labels[r * cols + c] = 2;
        }
    }
    let mut counts = [0usize; 4];
    labels.iter().for_each(|&l| counts[l] += 1);
    if counts != sizes {
        return Err(bad());
    }
    Ok(labels)
}

fn check_ar(means: &[f64], psis: &[f64], variances: &[f64]) -> Result<(), SimError> {
    if means.len() != psis.len() || means.len() != variances.len() {
        return Err(SimError::ParameterMismatch);
    }
    for (k, (&psi, &var)) in psis.iter().zip(variances).enumerate() {
        if !(psi.abs() < 1.0) {
            return Err(SimError::NonStationary { cluster: k, psi });
        }
        if !(var > 0.0 && var.is_finite()) {
            return Err(SimError::NonPositiveVariance { cluster: k });
        }
    }
    Ok(())
}

fn check_labels(labels: &[usize], n_clusters: usize) -> Result<(), SimError> {
    match labels.iter().find(|&&l| l >= n_clusters) {
        Some(&label) => Err(SimError::LabelOutOfRange { label, n_clusters }),
        None => Ok(()),
    }
}

/// Independent AR(1) series `Y_t = mu_k + psi_k (Y_{t-1} - mu_k) + eps_t`
/// with `eps_t ~ N(0, var_k)` and `Y_1` drawn from the stationary law
/// `N(mu_k, var_k / (1 - psi_k^2))`.
pub fn gen_ar_series(
    labels: &[usize],
    means: &[f64],
    psis: &[f64],
    variances: &[f64],
    n: usize,
    seed: u64,
) -> Result<NodeSeries, SimError> {
    check_ar(means, psis, variances)?;
    check_labels(labels, means.len())?;
    if n == 0 {
        return Err(SimError::ZeroLength);
    }
    let mut values = Vec::with_capacity(labels.len() * n);
    for (i, &k) in labels.iter().enumerate() {
        let mut rng = RngStream::new(seed, Domain::Simulation).iteration(AR_STREAM).node(i).rng();
        let (mu, psi, sd) = (means[k], psis[k], libm::sqrt(variances[k]));
        let mut z: f64 = StandardNormal.sample(&mut rng);
        let mut y = mu + sd / libm::sqrt(1.0 - psi * psi) * z;
        values.push(y);
        for _ in 1..n {
            z = StandardNormal.sample(&mut rng);
            y = mu + psi * (y - mu) + sd * z;
            values.push(y);
        }
    }
    Ok(NodeSeries::from_flat(labels.len(), n, values).expect("finite draws"))
}

/// One draw of block-equicorrelated noise: unit variances, correlation
/// `rho` inside a cluster and 0 across clusters.
pub fn equicorrelated_noise<R: Rng + ?Sized>(labels: &[usize], n_clusters: usize, rho: f64, rng: &mut R, out: &mut [f64]) {
    let shared: Vec<f64> = (0..n_clusters).map(|_| StandardNormal.sample(rng)).collect();
    let (a, b) = (libm::sqrt(rho), libm::sqrt(1.0 - rho));
    for (o, &k) in out.iter_mut().zip(labels) {
        let e: f64 = StandardNormal.sample(rng);
        *o = a * shared[k] + b * e;
    }
}

/// VAR(1) series `Y_t = beta + phi (Y_{t-1} - beta) + xi_t` started at
/// `Y = 0`, with `burn_in` steps discarded. `beta_i` is the mean of node
/// `i`'s cluster and `xi_t` is block-equicorrelated.
pub fn gen_var_series(
    labels: &[usize],
    means: &[f64],
    phi: f64,
    rho: f64,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<NodeSeries, SimError> {
    if !(phi.abs() < 1.0) {
        return Err(SimError::NonStationary { cluster: 0, psi: phi });
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(SimError::InvalidCorrelation(rho));
    }
    check_labels(labels, means.len())?;
    if n == 0 {
        return Err(SimError::ZeroLength);
    }
    let n_nodes = labels.len();
    let beta: Vec<f64> = labels.iter().map(|&k| means[k]).collect();
    let mut rng = RngStream::new(seed, Domain::Simulation).iteration(VAR_STREAM).rng();
    let mut y = vec![0.0; n_nodes];
    let mut xi = vec![0.0; n_nodes];
    let mut values = vec![0.0; n_nodes * n];
    // t = 0 is the fixed start; burn_in steps follow before recording
    for t in 0..burn_in + n {
        if t > 0 {
            equicorrelated_noise(labels, means.len(), rho, &mut rng, &mut xi);
            for ((yi, &b), &x) in y.iter_mut().zip(&beta).zip(&xi) {
                *yi = b + phi * (*yi - b) + x;
            }
        }
        if t >= burn_in {
            for (i, &yi) in y.iter().enumerate() {
                values[i * n + (t - burn_in)] = yi;
            }
        }
    }
    Ok(NodeSeries::from_flat(n_nodes, n, values).expect("finite draws"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Block { p_in: f64, p_out: f64 },
    /// Lattice whose four regional clusters take `cluster_sizes` in the
    /// order top left, top right, bottom left, bottom right.
    Grid { rows: usize, cols: usize },
    /// Lattice with rectangular quadrants.
    GridSplit {
        rows: usize,
        cols: usize,
        row_split: usize,
        col_split: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesSpec {
    Ar { psis: Vec<f64>, variances: Vec<f64> },
    Var { phi: f64, rho: f64, burn_in: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: u8,
    pub cluster_sizes: Vec<usize>,
    /// Series length.
    pub n: usize,
    pub means: Vec<f64>,
    pub graph: GraphSpec,
    pub series: SeriesSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: Graph,
    pub series: NodeSeries,
    pub labels: Vec<usize>,
}

impl ScenarioSpec {
    /// Three-block graph with AR(1) series; `n_nodes` 120 or 210.
    pub fn scenario1(n_nodes: usize, seed: u64) -> Result<Self, SimError> {
        let sizes = match n_nodes {
            120 => vec![30, 40, 50],
            210 => vec![60, 70, 80],
            _ => return Err(SimError::NoPreset { scenario: 1, n_nodes }),
        };
        Ok(Self {
            scenario: 1,
            cluster_sizes: sizes,
            n: 100,
            means: vec![-1.0, 0.0, 1.0],
            graph: GraphSpec::Block { p_in: 0.30, p_out: 0.15 },
            series: SeriesSpec::Ar {
                psis: vec![0.5; 3],
                variances: vec![1.0; 3],
            },
            seed,
        })
    }

    /// Lattice with four unbalanced regions and AR(1) series; `side` 12 or 14.
    pub fn scenario2(side: usize, seed: u64) -> Result<Self, SimError> {
        let sizes = match side {
            12 => vec![25, 30, 42, 47],
            14 => vec![35, 40, 42, 79],
            _ => {
                return Err(SimError::NoPreset {
                    scenario: 2,
                    n_nodes: side * side,
                })
            }
        };
        Ok(Self {
            scenario: 2,
            cluster_sizes: sizes,
            n: 100,
            means: vec![-0.8, 0.0, 0.8, 1.6],
            graph: GraphSpec::Grid { rows: side, cols: side },
            series: SeriesSpec::Ar {
                psis: vec![0.5; 4],
                variances: vec![1.0; 4],
            },
            seed,
        })
    }

    /// Scenario 1's block graph with equicorrelated VAR(1) series.
    pub fn scenario3(n_nodes: usize, seed: u64) -> Result<Self, SimError> {
        let base = Self::scenario1(n_nodes, seed).map_err(|_| SimError::NoPreset { scenario: 3, n_nodes })?;
        Ok(Self {
            scenario: 3,
            series: SeriesSpec::Var {
                phi: 0.5,
                rho: 0.3,
                burn_in: 100,
            },
            ..base
        })
    }

    /// Preset lookup by scenario id; scenario 2 takes `n_nodes` 144 or 196.
    pub fn preset(scenario: u8, n_nodes: usize, seed: u64) -> Result<Self, SimError> {
        match scenario {
            1 => Self::scenario1(n_nodes, seed),
            2 => match n_nodes {
                144 => Self::scenario2(12, seed),
                196 => Self::scenario2(14, seed),
                _ => Err(SimError::NoPreset { scenario, n_nodes }),
            },
            3 => Self::scenario3(n_nodes, seed),
            _ => Err(SimError::NoPreset { scenario, n_nodes }),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Generates the graph, series and true labels of a scenario.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<Scenario, SimError> {
    if spec.cluster_sizes.len() != spec.means.len() {
        return Err(SimError::ParameterMismatch);
    }
    let (graph, labels) = match spec.graph {
        GraphSpec::Block { p_in, p_out } => gen_block_graph(&spec.cluster_sizes, p_in, p_out, spec.seed)?,
        GraphSpec::Grid { rows, cols } => {
            let sizes: [usize; 4] = spec.cluster_sizes.as_slice().try_into().map_err(|_| SimError::ParameterMismatch)?;
            (grid_graph(rows, cols)?, sized_grid_labels(rows, cols, sizes)?)
        }
        GraphSpec::GridSplit {
            rows,
            cols,
            row_split,
            col_split,
        } => gen_grid_graph(rows, cols, row_split, col_split)?,
    };
    let series = match &spec.series {
        SeriesSpec::Ar { psis, variances } => gen_ar_series(&labels, &spec.means, psis, variances, spec.n, spec.seed)?,
        SeriesSpec::Var { phi, rho, burn_in } => {
            gen_var_series(&labels, &spec.means, *phi, *rho, spec.n, *burn_in, spec.seed)?
        }
    };
    Ok(Scenario { graph, series, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(labels: &[usize]) -> Vec<usize> {
        let k = labels.iter().max().unwrap() + 1;
        let mut c = vec![0; k];
        labels.iter().for_each(|&l| c[l] += 1);
        c
    }

    #[test]
    fn block_graph_limits() {
        let (g, l) = gen_block_graph(&[2, 3], 1.0, 1.0, 0).unwrap();
        assert_eq!(g.n_edges(), 10);
        assert_eq!(l, vec![0, 0, 1, 1, 1]);
        let (g, _) = gen_block_graph(&[2, 3], 0.0, 0.0, 0).unwrap();
        assert_eq!(g.n_edges(), 0);
        assert!(gen_block_graph(&[2], 0.1, 0.2, 0).is_err());
    }

    #[test]
    fn smallest_grid() {
        let (g, l) = gen_grid_graph(2, 2, 1, 1).unwrap();
        assert_eq!(g.n_nodes(), 4);
        assert_eq!(g.n_edges(), 4);
        assert_eq!(l, vec![0, 1, 2, 3]);
        let g = grid_graph(5, 7).unwrap();
        assert_eq!(g.n_edges(), 5 * 6 + 7 * 4);
        assert!(gen_grid_graph(3, 3, 0, 1).is_err());
    }

    #[test]
    fn rectangular_split_sizes() {
        let (_, l) = gen_grid_graph(12, 12, 5, 5).unwrap();
        assert_eq!(counts(&l), vec![25, 35, 35, 49]);
    }

    #[test]
    fn unbalanced_regions() {
        assert_eq!(counts(&sized_grid_labels(12, 12, [25, 30, 42, 47]).unwrap()), vec![25, 30, 42, 47]);
        assert_eq!(counts(&sized_grid_labels(14, 14, [35, 40, 42, 79]).unwrap()), vec![35, 40, 42, 79]);
        let l = sized_grid_labels(12, 12, [25, 30, 42, 47]).unwrap();
        // the top-left region is the top-left corner
        assert_eq!(l[0], 0);
        assert_eq!(l[11], 1);
        assert_eq!(l[143 - 11], 2);
        assert_eq!(l[143], 3);
        assert!(sized_grid_labels(2, 2, [1, 1, 1, 2]).is_err());
    }

    #[test]
    fn ar_rejects_unit_root() {
        assert_eq!(
            gen_ar_series(&[0], &[0.0], &[1.0], &[1.0], 5, 0),
            Err(SimError::NonStationary { cluster: 0, psi: 1.0 })
        );
        assert!(gen_ar_series(&[1], &[0.0], &[0.5], &[1.0], 5, 0).is_err());
        assert!(gen_var_series(&[0], &[0.0], 0.5, 1.0, 5, 0, 0).is_err());
    }

    #[test]
    fn var_without_burn_in_starts_at_zero() {
        let s = gen_var_series(&[0, 1], &[3.0, -3.0], 0.5, 0.3, 4, 0, 1).unwrap();
        assert_eq!(s.row(0)[0], 0.0);
        assert_eq!(s.row(1)[0], 0.0);
    }

    #[test]
    fn scenarios_are_deterministic() {
        for spec in [
            ScenarioSpec::scenario1(120, 5).unwrap(),
            ScenarioSpec::scenario2(12, 5).unwrap(),
            ScenarioSpec::scenario3(120, 5).unwrap(),
        ] {
            let a = run_scenario(&spec).unwrap();
            let b = run_scenario(&spec).unwrap();
            assert_eq!(a, b);
            assert_eq!(counts(&a.labels), spec.cluster_sizes);
            assert_ne!(a, run_scenario(&spec.with_seed(6)).unwrap());
        }
        assert_eq!(ScenarioSpec::preset(2, 196, 0).unwrap().cluster_sizes, vec![35, 40, 42, 79]);
        assert_eq!(ScenarioSpec::preset(3, 210, 0).unwrap().cluster_sizes, vec![60, 70, 80]);
        assert!(ScenarioSpec::preset(1, 100, 0).is_err());
    }
}
