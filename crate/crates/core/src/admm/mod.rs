//! ADMM for the graph-fused LASSO penalized likelihood.
//!
//! The penalty `lambda * sum_(i,j) ||mu_i - mu_j||_2` is split with one slack
//! `nu_e ~ mu_a - mu_b` per canonical edge `e = (a, b)`, `a < b`, and a scaled
//! dual `w_e`. One iteration runs, in order:
//!
//! 1. Langevin sampling of every node posterior,
//! 2. `adam_iters` Adam steps on the decoder,
//! 3. the closed-form prior-mean update for every node ([`update_mu`]),
//! 4. `bcd_iters` passes of the group-LASSO prox over edges ([`prox_group_lasso`]),
//! 5. the dual update ([`update_duals`]).
//!
//! The slack and dual are stored once per edge. Seen from the second
//! endpoint `b`, the pair enters with flipped sign (`nu_ba = -nu_ab`,
//! `w_ba = -w_ab`), which is what [`update_mu`] applies.

mod select;

pub use select::{select_lambda, LambdaScore, LambdaSelection, SelectConfig};

use alloc::vec::Vec;
use thiserror::Error;

use crate::decoder::{adam_step, AdamState, DecoderError, DecoderParams, DecoderShape, Workspace};
use crate::graph::{Graph, NodeSeries};
use crate::inference::{sample_all_nodes, InferenceError, InitMode, LangevinConfig, Samples};
use crate::math::{dist, norm2};
use crate::rng::{Domain, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("graph has {graph_nodes} nodes but the series matrix has {series_rows} rows")]
    DimensionMismatch { graph_nodes: usize, series_rows: usize },
    #[error("state does not match the problem: {0}")]
    StateMismatch(&'static str),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error("non-finite objective at ADMM iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    #[error("every candidate lambda produced a non-finite held-out score")]
    NoFiniteScore,
}

impl FitError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            FitError::Inference(InferenceError::Diverged { .. })
                | FitError::Decoder(DecoderError::NonFiniteGradient { .. })
                | FitError::NonFiniteObjective { .. }
                | FitError::NoFiniteScore
        )
    }
}

/// Order of the prior-mean sweep within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuSweep {
    /// Ascending node order, each update sees neighbours already updated.
    #[default]
    GaussSeidel,
    /// Every node reads the previous iteration's neighbour values.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub latent_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub lambda: f64,
    /// Augmentation weight. `None` couples it to `lambda` (or 1 when
    /// `lambda == 0`).
    pub gamma: Option<f64>,
    pub admm_iters: usize,
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub bcd_iters: usize,
    pub langevin: LangevinConfig,
    pub mu_sweep: MuSweep,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl FitConfig {
    /// Reduced settings that run on a desktop CPU in minutes.
    pub fn desk() -> Self {
        Self {
            latent_dim: 3,
            hidden1: 32,
            hidden2: 32,
            lambda: 0.5,
            gamma: None,
            admm_iters: 30,
            adam_iters: 20,
            adam_lr: 1e-4,
            bcd_iters: 1,
            langevin: LangevinConfig {
                delta: 0.4,
                mcmc_steps: 30,
                n_samples: 100,
                init_mode: InitMode::PriorMean,
            },
            mu_sweep: MuSweep::GaussSeidel,
            seed: 0,
        }
    }

    /// The full-scale simulation settings (50 ADMM iterations, 500 chains of
    /// 50 steps, 20 prox passes).
    pub fn paper() -> Self {
        Self {
            admm_iters: 50,
            bcd_iters: 20,
            langevin: LangevinConfig {
                delta: 0.4,
                mcmc_steps: 50,
                n_samples: 500,
                init_mode: InitMode::PriorMean,
            },
            ..Self::desk()
        }
    }

    pub fn effective_gamma(&self) -> f64 {
        match self.gamma {
            Some(g) => g,
            None if self.lambda > 0.0 => self.lambda,
            None => 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.latent_dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(FitError::InvalidConfig("latent and hidden dimensions must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(FitError::InvalidConfig("lambda must be finite and non-negative"));
        }
        let gamma = self.effective_gamma();
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FitError::InvalidConfig("gamma must be positive"));
        }
        if self.admm_iters == 0 || self.adam_iters == 0 || self.bcd_iters == 0 {
            return Err(FitError::InvalidConfig("iteration counts must be at least 1"));
        }
        if !(self.adam_lr > 0.0 && self.adam_lr.is_finite()) {
            return Err(FitError::InvalidConfig("learning rate must be positive"));
        }
        self.langevin.validate()?;
        Ok(())
    }

    pub fn decoder_shape(&self, series_len: usize) -> DecoderShape {
        DecoderShape::new(self.latent_dim, self.hidden1, self.hidden2, series_len)
    }
}

/// Everything the fit loop carries between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// `N x d` prior means, row-major.
    pub mu: Vec<f64>,
    /// `|E| x d` slacks, row `e` for canonical edge `e`.
    pub nu: Vec<f64>,
    /// `|E| x d` scaled duals.
    pub w: Vec<f64>,
    pub decoder: DecoderParams,
    pub adam: AdamState,
    /// Completed ADMM iterations.
    pub iteration: usize,
}

impl AdmmState {
    /// `mu = nu = w = 0` and a freshly initialized decoder.
    pub fn initial(graph: &Graph, series_len: usize, cfg: &FitConfig) -> Result<Self, FitError> {
        let d = cfg.latent_dim;
        let shape = cfg.decoder_shape(series_len);
        let mut rng = RngStream::new(cfg.seed, Domain::DecoderInit).rng();
        let decoder = DecoderParams::init(shape, &mut rng)?;
        Ok(Self {
            mu: alloc::vec![0.0; graph.n_nodes() * d],
            nu: alloc::vec![0.0; graph.n_edges() * d],
            w: alloc::vec![0.0; graph.n_edges() * d],
            adam: AdamState::new(shape),
            decoder,
            iteration: 0,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder.shape().latent_dim
    }

    pub fn mu_row(&self, i: usize) -> &[f64] {
        let d = self.latent_dim();
        &self.mu[i * d..(i + 1) * d]
    }

    pub fn nu_row(&self, e: usize) -> &[f64] {
        let d = self.latent_dim();
        &self.nu[e * d..(e + 1) * d]
    }

    pub fn w_row(&self, e: usize) -> &[f64] {
        let d = self.latent_dim();
        &self.w[e * d..(e + 1) * d]
    }

    /// `sum_e ||mu_a - mu_b - nu_e||_2`.
    pub fn primal_residual(&self, graph: &Graph) -> f64 {
        let d = self.latent_dim();
        let mut diff = alloc::vec![0.0; d];
        graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(a, b))| {
                for k in 0..d {
                    diff[k] = self.mu[a * d + k] - self.mu[b * d + k] - self.nu[e * d + k];
                }
                norm2(&diff)
            })
            .sum()
    }

    /// `sum_e ||mu_a - mu_b||_2`.
    pub fn fused_penalty(&self, graph: &Graph) -> f64 {
        graph
            .edges()
            .iter()
            .map(|&(a, b)| dist(self.mu_row(a), self.mu_row(b)))
            .sum()
    }

    fn check(&self, graph: &Graph, series_len: usize, cfg: &FitConfig) -> Result<(), FitError> {
        let d = cfg.latent_dim;
        if self.decoder.shape() != cfg.decoder_shape(series_len) {
            return Err(FitError::StateMismatch("decoder shape"));
        }
        if self.adam.moments().0.len() != self.decoder.n_params() {
            return Err(FitError::StateMismatch("optimizer state"));
        }
        if self.mu.len() != graph.n_nodes() * d {
            return Err(FitError::StateMismatch("prior mean matrix"));
        }
        if self.nu.len() != graph.n_edges() * d || self.w.len() != graph.n_edges() * d {
            return Err(FitError::StateMismatch("edge variables"));
        }
        if self.mu.iter().chain(&self.nu).chain(&self.w).any(|v| !v.is_finite()) {
            return Err(FitError::StateMismatch("non-finite entries"));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `sum_e ||mu_a - mu_b - nu_e||_2` after the slack update.
    pub primal_residual: f64,
    /// `-sum_i mean_u ln P(Y_i | Z_ui) + lambda * sum_e ||mu_a - mu_b||_2`.
    pub objective: f64,
    /// Largest `|w|` entry after the dual update.
    pub max_abs_dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub state: AdmmState,
    pub history: Vec<IterationRecord>,
}

/// Stages of one ADMM iteration, reported to a [`FitMonitor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Sampling,
    Decoder,
    Mu,
    Nu,
    Dual,
}

/// Hooks for progress reporting and timing. All methods default to no-ops.
pub trait FitMonitor {
    fn phase_started(&mut self, _iteration: usize, _phase: Phase) {}
    fn phase_finished(&mut self, _iteration: usize, _phase: Phase) {}
    fn iteration_finished(&mut self, _record: &IterationRecord) {}
}

impl FitMonitor for () {}

/// Closed-form prior-mean update for node `i`:
///
/// `mu_i = (post_mean + gamma * sum_j (mu_j + nu_ij - w_ij)) / (1 + gamma |B(i)|)`.
pub fn update_mu(i: usize, post_mean: &[f64], state: &AdmmState, graph: &Graph, gamma: f64) -> Vec<f64> {
    let d = post_mean.len();
    let mut acc = post_mean.to_vec();
    let neighbors = graph.neighbors(i);
    for nb in neighbors {
        let sign = if i < nb.node { 1.0 } else { -1.0 };
        let mu_j = state.mu_row(nb.node);
        let nu = state.nu_row(nb.edge);
        let w = state.w_row(nb.edge);
        for k in 0..d {
            acc[k] += gamma * (mu_j[k] + sign * (nu[k] - w[k]));
        }
    }
    let scale = 1.0 / (1.0 + gamma * neighbors.len() as f64);
    acc.iter_mut().for_each(|v| *v *= scale);
    acc
}

/// Block soft-thresholding `(1 - lambda / (gamma ||s||))_+ * s`.
pub fn prox_group_lasso(s: &[f64], lambda: f64, gamma: f64) -> Vec<f64> {
    let norm = norm2(s);
    if gamma * norm <= lambda {
        return alloc::vec![0.0; s.len()];
    }
    let factor = 1.0 - lambda / (gamma * norm);
    s.iter().map(|v| factor * v).collect()
}

/// Runs the slack update over every edge: `nu_e = prox(mu_a - mu_b + w_e)`.
pub fn update_slacks(state: &mut AdmmState, graph: &Graph, lambda: f64, gamma: f64) {
    let d = state.latent_dim();
    let mut s = alloc::vec![0.0; d];
    for (e, &(a, b)) in graph.edges().iter().enumerate() {
        for k in 0..d {
            s[k] = state.mu[a * d + k] - state.mu[b * d + k] + state.w[e * d + k];
        }
        let nu = prox_group_lasso(&s, lambda, gamma);
        state.nu[e * d..(e + 1) * d].copy_from_slice(&nu);
    }
}

/// `w_e <- (mu_a - mu_b + w_e) - nu_e` for every canonical edge `(a, b)`.
///
/// The bracket is evaluated exactly as in [`update_slacks`], so an unshrunk
/// slack leaves a dual of exactly zero.
pub fn update_duals(state: &mut AdmmState, graph: &Graph) {
    let d = state.latent_dim();
    for (e, &(a, b)) in graph.edges().iter().enumerate() {
        for k in 0..d {
            let s = state.mu[a * d + k] - state.mu[b * d + k] + state.w[e * d + k];
            state.w[e * d + k] = s - state.nu[e * d + k];
        }
    }
}

/// Nodes per partial-gradient block. Partial sums are always reduced in block
/// order so sequential and parallel builds agree bitwise.
const GRAD_BLOCK: usize = 16;

/// Gradient of `-sum_i (1/s) sum_u ln P(Y_i | Z_ui)`; also returns the sum of
/// the per-node average log-likelihoods.
fn decoder_gradient(
    decoder: &DecoderParams,
    data: &NodeSeries,
    samples: &[Samples],
) -> Result<(DecoderParams, f64), DecoderError> {
    let shape = decoder.shape();
    let n_nodes = data.n_nodes();
    let n_blocks = n_nodes.div_ceil(GRAD_BLOCK);
    let block = |b: usize| -> Result<(DecoderParams, f64), DecoderError> {
        let mut grad = DecoderParams::zeros(shape)?;
        let mut ws = Workspace::new(shape);
        let mut loglik = 0.0;
        for i in b * GRAD_BLOCK..((b + 1) * GRAD_BLOCK).min(n_nodes) {
            let y = data.row(i);
            let weight = 1.0 / samples[i].len() as f64;
            for z in samples[i].iter() {
                loglik += weight * decoder.accumulate_neg_loglik_grad(z, y, weight, &mut ws, &mut grad);
            }
        }
        Ok((grad, loglik))
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<_> = {
        use rayon::prelude::*;
        (0..n_blocks).into_par_iter().map(block).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<_> = (0..n_blocks).map(block).collect::<Result<_, _>>()?;

    let mut total = DecoderParams::zeros(shape)?;
    let mut loglik = 0.0;
    for (g, ll) in partials {
        for (t, v) in total.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *t += v;
        }
        loglik += ll;
    }
    Ok((total, loglik))
}

/// Fits from the initial state; see [`fit_from`].
pub fn fit(graph: &Graph, data: &NodeSeries, cfg: &FitConfig) -> Result<FitResult, FitError> {
    let state = AdmmState::initial(graph, data.len(), cfg)?;
    fit_from(state, graph, data, cfg, &mut ())
}

/// Runs `cfg.admm_iters` ADMM iterations starting from `state`.
///
/// The random streams are keyed by the absolute iteration counter, so a run
/// split into a checkpoint and a resume reproduces the uninterrupted run
/// (warm-started chains excepted, whose states are not checkpointed).
pub fn fit_from(
    mut state: AdmmState,
    graph: &Graph,
    data: &NodeSeries,
    cfg: &FitConfig,
    monitor: &mut dyn FitMonitor,
) -> Result<FitResult, FitError> {
    cfg.validate()?;
    if graph.n_nodes() != data.n_nodes() {
        return Err(FitError::DimensionMismatch {
            graph_nodes: graph.n_nodes(),
            series_rows: data.n_nodes(),
        });
    }
    state.check(graph, data.len(), cfg)?;
    let d = cfg.latent_dim;
    let gamma = cfg.effective_gamma();
    let mut history = Vec::with_capacity(cfg.admm_iters);
    let mut warm: Option<Vec<Samples>> = None;

    for _ in 0..cfg.admm_iters {
        let iteration = state.iteration;

        monitor.phase_started(iteration, Phase::Sampling);
        let samples = sample_all_nodes(
            &state.decoder,
            data,
            &state.mu,
            &cfg.langevin,
            cfg.seed,
            iteration,
            warm.as_deref(),
        )?;
        monitor.phase_finished(iteration, Phase::Sampling);

        monitor.phase_started(iteration, Phase::Decoder);
        let mut loglik = 0.0;
        for b in 0..cfg.adam_iters {
            let (grad, ll) = decoder_gradient(&state.decoder, data, &samples)?;
            if b == 0 {
                loglik = ll;
            }
            adam_step(&mut state.decoder, &mut state.adam, &grad, cfg.adam_lr)?;
        }
        monitor.phase_finished(iteration, Phase::Decoder);

        monitor.phase_started(iteration, Phase::Mu);
        let post_means: Vec<Vec<f64>> = samples.iter().map(Samples::mean).collect();
        match cfg.mu_sweep {
            MuSweep::GaussSeidel => {
                for (i, pm) in post_means.iter().enumerate() {
                    let mu_i = update_mu(i, pm, &state, graph, gamma);
                    state.mu[i * d..(i + 1) * d].copy_from_slice(&mu_i);
                }
            }
            MuSweep::Jacobi => {
                let updated: Vec<f64> = post_means
                    .iter()
                    .enumerate()
                    .flat_map(|(i, pm)| update_mu(i, pm, &state, graph, gamma))
                    .collect();
                state.mu = updated;
            }
        }
        monitor.phase_finished(iteration, Phase::Mu);

        monitor.phase_started(iteration, Phase::Nu);
        // The per-edge problems are independent, so every pass after the
        // first reproduces the first.
        for _ in 0..cfg.bcd_iters {
            update_slacks(&mut state, graph, cfg.lambda, gamma);
        }
        monitor.phase_finished(iteration, Phase::Nu);

        let primal_residual = state.primal_residual(graph);
        monitor.phase_started(iteration, Phase::Dual);
        update_duals(&mut state, graph);
        monitor.phase_finished(iteration, Phase::Dual);

        let objective = -loglik + cfg.lambda * state.fused_penalty(graph);
        if !objective.is_finite() || !primal_residual.is_finite() {
            return Err(FitError::NonFiniteObjective { iteration });
        }
        let record = IterationRecord {
            iteration,
            primal_residual,
            objective,
            max_abs_dual: state.w.iter().fold(0.0, |m, v| m.max(v.abs())),
        };
        monitor.iteration_finished(&record);
        history.push(record);
        state.iteration += 1;
        if cfg.langevin.init_mode == InitMode::WarmStart {
            warm = Some(samples);
        }
    }
    Ok(FitResult { state, history })
}
