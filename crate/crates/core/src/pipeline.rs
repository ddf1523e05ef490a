//! End-to-end runs: choose `lambda`, refit on the full data, cluster the
//! learned prior means. Also the k-means baseline on raw series.

use alloc::vec::Vec;
use thiserror::Error;

use crate::admm::{fit, select_lambda, FitConfig, FitError, FitResult, LambdaSelection, SelectConfig};
use crate::clustering::{kmeans, select_k, ClusterError, ClusterResult, KScore, Points};
use crate::graph::{Graph, NodeSeries};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

impl PipelineError {
    /// True for failures caused by numerical blow-up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Fit(e) if e.is_numerical())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Fixed(usize),
    /// Highest silhouette over `2..=k_max`.
    Silhouette { k_max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Base fit settings; `lambda` is ignored when several candidates are given.
    pub fit: FitConfig,
    /// Candidate penalties. A single entry skips the held-out selection.
    pub lambdas: Vec<f64>,
    pub select: SelectConfig,
    pub k: KChoice,
    pub kmeans_restarts: usize,
}

impl PipelineConfig {
    pub fn new(fit: FitConfig, lambdas: Vec<f64>, k: KChoice) -> Self {
        Self {
            fit,
            lambdas,
            select: SelectConfig::default(),
            k,
            kmeans_restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GflRun {
    pub lambda: f64,
    pub selection: Option<LambdaSelection>,
    pub fit: FitResult,
    pub clusters: ClusterResult,
    /// Silhouette table when `k` was chosen by silhouette.
    pub k_table: Option<Vec<KScore>>,
}

/// Clusters the rows of an `N x d` matrix with a fixed or selected `k`.
pub fn cluster_points(
    data: &[f64],
    dim: usize,
    k: KChoice,
    restarts: usize,
    seed: u64,
) -> Result<(ClusterResult, Option<Vec<KScore>>), ClusterError> {
    let points = Points::new(data, dim)?;
    match k {
        KChoice::Fixed(k) => Ok((kmeans(points, k, restarts, seed)?, None)),
        KChoice::Silhouette { k_max } => {
            let sel = select_k(points, k_max, restarts, seed)?;
            Ok((sel.best, Some(sel.table)))
        }
    }
}

pub fn run_gfl(graph: &Graph, data: &NodeSeries, cfg: &PipelineConfig) -> Result<GflRun, PipelineError> {
    let (fit_cfg, selection) = match cfg.lambdas.as_slice() {
        [] => (cfg.fit.clone(), None),
        [lambda] => (FitConfig { lambda: *lambda, ..cfg.fit.clone() }, None),
        many => {
            let sel = select_lambda(graph, data, many, &cfg.select, &cfg.fit)?;
            (sel.config.clone(), Some(sel))
        }
    };
    let result = fit(graph, data, &fit_cfg)?;
    let (clusters, k_table) = cluster_points(
        &result.state.mu,
        fit_cfg.latent_dim,
        cfg.k,
        cfg.kmeans_restarts,
        fit_cfg.seed,
    )?;
    Ok(GflRun {
        lambda: fit_cfg.lambda,
        selection,
        fit: result,
        clusters,
        k_table,
    })
}

/// k-means directly on the raw series.
pub fn run_kmeans_baseline(data: &NodeSeries, k: KChoice, restarts: usize, seed: u64) -> Result<ClusterResult, ClusterError> {
    cluster_points(data.as_flat(), data.len(), k, restarts, seed).map(|(c, _)| c)
}
