//! Cross-validated choice of `lambda` over held-out nodes.

use alloc::vec::Vec;
use rand::seq::SliceRandom;

use super::{fit, FitConfig, FitError, FitResult};
use crate::graph::{Graph, NodeSeries};
use crate::inference::marginal_loglik_mc;
use crate::rng::{Domain, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectConfig {
    /// Fraction of nodes held out, in `(0, 1)`.
    pub holdout_frac: f64,
    /// Prior draws per held-out node for the Monte Carlo likelihood.
    pub score_samples: usize,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            holdout_frac: 0.1,
            score_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaScore {
    pub lambda: f64,
    /// Summed held-out log-likelihood; `-inf` when the fit failed.
    pub heldout_loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// `base` config with the chosen `lambda` (gamma coupling kept).
    pub config: FitConfig,
    pub scores: Vec<LambdaScore>,
    pub held_out: Vec<usize>,
}

/// Picks held-out nodes: `round(frac * N)` clamped to `[1, N - 1]`, sorted.
pub fn holdout_nodes(n_nodes: usize, frac: f64, seed: u64) -> Vec<usize> {
    let count = (libm::round(frac * n_nodes as f64) as usize).clamp(1, n_nodes.saturating_sub(1).max(1));
    let mut ids: Vec<usize> = (0..n_nodes).collect();
    ids.shuffle(&mut RngStream::new(seed, Domain::Holdout).rng());
    let mut chosen = ids[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Training copy of `data` in which every held-out node's series is replaced
/// by the average of its training neighbours' series, or by the average of
/// all training series when it has none.
pub fn training_series(graph: &Graph, data: &NodeSeries, held_out: &[usize]) -> NodeSeries {
    let n = data.len();
    let mut is_test = alloc::vec![false; data.n_nodes()];
    held_out.iter().for_each(|&i| is_test[i] = true);

    let mut global = alloc::vec![0.0; n];
    let mut n_train = 0usize;
    for (i, row) in data.rows().enumerate() {
        if !is_test[i] {
            global.iter_mut().zip(row).for_each(|(g, v)| *g += v);
            n_train += 1;
        }
    }
    global.iter_mut().for_each(|g| *g /= n_train.max(1) as f64);

    let mut values = data.as_flat().to_vec();
    for &i in held_out {
        let mut avg = alloc::vec![0.0; n];
        let mut count = 0usize;
        for nb in graph.neighbors(i) {
            if !is_test[nb.node] {
                avg.iter_mut().zip(data.row(nb.node)).for_each(|(a, v)| *a += v);
                count += 1;
            }
        }
        let surrogate = if count > 0 {
            avg.iter_mut().for_each(|a| *a /= count as f64);
            avg
        } else {
            global.clone()
        };
        values[i * n..(i + 1) * n].copy_from_slice(&surrogate);
    }
    NodeSeries::from_flat(data.n_nodes(), n, values).expect("averages of finite rows are finite")
}

/// Summed Monte Carlo marginal log-likelihood of the held-out nodes' original
/// series under a fitted model.
pub fn heldout_score(
    fit: &FitResult,
    data: &NodeSeries,
    held_out: &[usize],
    score_samples: usize,
    seed: u64,
) -> Result<f64, FitError> {
    let mut total = 0.0;
    for &i in held_out {
        let stream = RngStream::new(seed, Domain::Marginal).node(i);
        total += marginal_loglik_mc(&fit.state.decoder, data.row(i), fit.state.mu_row(i), score_samples, stream)?;
    }
    Ok(total)
}

/// Fits each candidate on the training copy and keeps the `lambda` with the
/// largest held-out log-likelihood; ties go to the larger `lambda`. A
/// candidate whose fit fails scores `-inf`.
pub fn select_lambda(
    graph: &Graph,
    data: &NodeSeries,
    lambdas: &[f64],
    select: &SelectConfig,
    base: &FitConfig,
) -> Result<LambdaSelection, FitError> {
    if lambdas.is_empty() {
        return Err(FitError::InvalidConfig("no candidate lambdas"));
    }
    if !(select.holdout_frac > 0.0 && select.holdout_frac < 1.0) {
        return Err(FitError::InvalidConfig("holdout fraction must lie in (0, 1)"));
    }
    if select.score_samples == 0 {
        return Err(FitError::InvalidConfig("score_samples must be at least 1"));
    }
    if data.n_nodes() < 2 {
        return Err(FitError::InvalidConfig("need at least two nodes to hold one out"));
    }
    if graph.n_nodes() != data.n_nodes() {
        return Err(FitError::DimensionMismatch {
            graph_nodes: graph.n_nodes(),
            series_rows: data.n_nodes(),
        });
    }
    let held_out = holdout_nodes(data.n_nodes(), select.holdout_frac, base.seed);
    let train = training_series(graph, data, &held_out);

    let mut scores = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = FitConfig { lambda, ..base.clone() };
        cfg.validate()?;
        let score = match fit(graph, &train, &cfg) {
            Ok(result) => heldout_score(&result, data, &held_out, select.score_samples, base.seed)?,
            Err(e) if e.is_numerical() => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        scores.push(LambdaScore {
            lambda,
            heldout_loglik: if score.is_nan() { f64::NEG_INFINITY } else { score },
        });
    }
    let best = best_candidate(&scores).ok_or(FitError::NoFiniteScore)?;
    Ok(LambdaSelection {
        lambda: best.lambda,
        config: FitConfig {
            lambda: best.lambda,
            ..base.clone()
        },
        scores,
        held_out,
    })
}

/// Argmax over finite scores, ties broken toward the larger `lambda`.
pub fn best_candidate(scores: &[LambdaScore]) -> Option<LambdaScore> {
    scores
        .iter()
        .copied()
        .filter(|s| s.heldout_loglik.is_finite())
        .fold(None, |best: Option<LambdaScore>, s| match best {
            None => Some(s),
            Some(b) if s.heldout_loglik > b.heldout_loglik => Some(s),
            Some(b) if s.heldout_loglik == b.heldout_loglik && s.lambda > b.lambda => Some(s),
            keep => keep,
        })
}
