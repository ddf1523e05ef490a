//! Posterior sampling with unadjusted Langevin dynamics and Monte Carlo
//! estimates built on it.
//!
//! For node `i` with prior `N(mu_i, I)` each chain iterates
//!
//! ```text
//! Z <- Z + delta * (grad_Z ln P(Y_i | Z) - (Z - mu_i)) + sqrt(2 delta) * eps
//! ```
//!
//! with `eps ~ N(0, I)`. There is no Metropolis correction. The `s` samples of
//! a node are the final states of `s` independent chains, each fed from its
//! own [`RngStream`] `(node, iteration, sample)`.

use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::decoder::{DecoderError, DecoderParams, Workspace};
use crate::graph::NodeSeries;
use crate::math::{log_mean_exp, LN_2PI};
use crate::rng::{Domain, RngStream};

/// Chains abort once any coordinate leaves `[-DIVERGENCE_BOUND, DIVERGENCE_BOUND]`.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("invalid Langevin configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error("Langevin chain diverged at node {node}, step {step}, chain {chain}; reduce the step size")]
    Diverged { node: usize, step: usize, chain: usize },
    #[error("posterior mean needs at least one sample")]
    NoSamples,
    #[error("sample {index} has dimension {found}, expected {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        found: usize,
    },
}

/// Where each chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Every chain starts at the node's current prior mean.
    #[default]
    PriorMean,
    /// Chains resume from the previous ADMM iteration's final states.
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinConfig {
    /// Step size `delta`.
    pub delta: f64,
    /// Number of Langevin steps per chain.
    pub mcmc_steps: usize,
    /// Number of chains (= samples) per node.
    pub n_samples: usize,
    pub init_mode: InitMode,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            delta: 0.4,
            mcmc_steps: 30,
            n_samples: 100,
            init_mode: InitMode::PriorMean,
        }
    }
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(InferenceError::InvalidConfig("delta must be positive"));
        }
        if self.mcmc_steps == 0 {
            return Err(InferenceError::InvalidConfig("mcmc_steps must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(InferenceError::InvalidConfig("n_samples must be at least 1"));
        }
        Ok(())
    }
}

/// `s` latent draws of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn iter(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise average of the samples.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for z in self.iter() {
            for (a, b) in m.iter_mut().zip(z) {
                *a += b;
            }
        }
        let s = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= s);
        m
    }
}

/// Elementwise average of a list of samples.
pub fn posterior_mean(samples: &[Vec<f64>]) -> Result<Vec<f64>, InferenceError> {
    let first = samples.first().ok_or(InferenceError::NoSamples)?;
    let mut m = alloc::vec![0.0; first.len()];
    for (index, z) in samples.iter().enumerate() {
        if z.len() != m.len() {
            return Err(InferenceError::Ragged {
                index,
                expected: m.len(),
                found: z.len(),
            });
        }
        for (a, b) in m.iter_mut().zip(z) {
            *a += b;
        }
    }
    let s = samples.len() as f64;
    m.iter_mut().for_each(|a| *a /= s);
    Ok(m)
}

/// One Langevin step with caller-supplied standard normal noise.
pub fn langevin_step(
    params: &DecoderParams,
    y: &[f64],
    mu: &[f64],
    z: &mut [f64],
    delta: f64,
    noise: &[f64],
) -> Result<(), InferenceError> {
    let shape = params.shape();
    check_dims(params, y, mu)?;
    if z.len() != shape.latent_dim || noise.len() != shape.latent_dim {
        return Err(DecoderError::ShapeMismatch {
            what: "latent state",
            expected: shape.latent_dim,
            found: z.len().min(noise.len()),
        }
        .into());
    }
    let mut ws = Workspace::new(shape);
    let mut grad = alloc::vec![0.0; shape.latent_dim];
    step_in_place(params, y, mu, z, delta, noise, &mut ws, &mut grad);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn step_in_place(
    params: &DecoderParams,
    y: &[f64],
    mu: &[f64],
    z: &mut [f64],
    delta: f64,
    noise: &[f64],
    ws: &mut Workspace,
    grad: &mut [f64],
) {
    params.grad_z_into(z, y, ws, grad);
    let noise_scale = libm::sqrt(2.0 * delta);
    for k in 0..z.len() {
        z[k] += delta * (grad[k] - (z[k] - mu[k])) + noise_scale * noise[k];
    }
}

fn check_dims(params: &DecoderParams, y: &[f64], mu: &[f64]) -> Result<(), InferenceError> {
    let shape = params.shape();
    if y.len() != shape.output_dim {
        return Err(DecoderError::ShapeMismatch {
            what: "observation",
            expected: shape.output_dim,
            found: y.len(),
        }
        .into());
    }
    if mu.len() != shape.latent_dim {
        return Err(DecoderError::ShapeMismatch {
            what: "prior mean",
            expected: shape.latent_dim,
            found: mu.len(),
        }
        .into());
    }
    Ok(())
}

/// Runs `cfg.n_samples` independent chains for one node and returns their
/// final states.
///
/// `stream` supplies seed, node and iteration; the chain index fills the
/// sample slot. `warm` holds previous final states and is used only when
/// `cfg.init_mode` is [`InitMode::WarmStart`] and it has the right size.
pub fn langevin_chain(
    params: &DecoderParams,
    y: &[f64],
    mu: &[f64],
    cfg: &LangevinConfig,
    stream: RngStream,
    warm: Option<&Samples>,
) -> Result<Samples, InferenceError> {
    cfg.validate()?;
    check_dims(params, y, mu)?;
    let d = mu.len();
    let s = cfg.n_samples;
    let mut data = Vec::with_capacity(s * d);
    let warm = match (cfg.init_mode, warm) {
        (InitMode::WarmStart, Some(w)) if w.len() == s && w.dim() == d => Some(w),
        _ => None,
    };
    let mut ws = Workspace::new(params.shape());
    let mut grad = alloc::vec![0.0; d];
    let mut noise = alloc::vec![0.0; d];
    let mut z = alloc::vec![0.0; d];
    for chain in 0..s {
        match warm {
            Some(w) => z.copy_from_slice(w.get(chain)),
            None => z.copy_from_slice(mu),
        }
        let mut rng = stream.sample(chain).rng();
        for step in 0..cfg.mcmc_steps {
            for e in noise.iter_mut() {
                *e = StandardNormal.sample(&mut rng);
            }
            step_in_place(params, y, mu, &mut z, cfg.delta, &noise, &mut ws, &mut grad);
            if z.iter().any(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
                return Err(InferenceError::Diverged {
                    node: stream.node as usize,
                    step,
                    chain,
                });
            }
        }
        data.extend_from_slice(&z);
    }
    Ok(Samples { dim: d, data })
}

/// Samples every node's posterior at one ADMM iteration.
///
/// `mu` is the `N x d` row-major prior-mean matrix. Results are ordered by
/// node regardless of how the work is scheduled.
pub fn sample_all_nodes(
    params: &DecoderParams,
    data: &NodeSeries,
    mu: &[f64],
    cfg: &LangevinConfig,
    seed: u64,
    iteration: usize,
    warm: Option<&[Samples]>,
) -> Result<Vec<Samples>, InferenceError> {
    let d = params.shape().latent_dim;
    let n_nodes = data.n_nodes();
    let run = |i: usize| {
        let stream = RngStream::new(seed, Domain::Langevin).node(i).iteration(iteration);
        langevin_chain(
            params,
            data.row(i),
            &mu[i * d..(i + 1) * d],
            cfg,
            stream,
            warm.and_then(|w| w.get(i)),
        )
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_nodes).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_nodes).map(run).collect()
    }
}

/// `ln[(1/s) sum_u N(y; h(Z_u), I)]` with `Z_u ~ N(mu, I)`, stabilized by a
/// max shift.
pub fn marginal_loglik_mc(
    params: &DecoderParams,
    y: &[f64],
    mu: &[f64],
    s: usize,
    stream: RngStream,
) -> Result<f64, InferenceError> {
    if s == 0 {
        return Err(InferenceError::InvalidConfig("need at least one Monte Carlo sample"));
    }
    check_dims(params, y, mu)?;
    let values = prior_loglik_draws(params, y, mu, s, stream);
    Ok(log_mean_exp(&values))
}

/// The `s` per-draw values `ln N(y; h(Z_u), I)` behind [`marginal_loglik_mc`].
pub fn prior_loglik_draws(
    params: &DecoderParams,
    y: &[f64],
    mu: &[f64],
    s: usize,
    stream: RngStream,
) -> Vec<f64> {
    let d = mu.len();
    let mut ws = Workspace::new(params.shape());
    let mut rng = stream.rng();
    let mut z = alloc::vec![0.0; d];
    let const_term = -0.5 * y.len() as f64 * LN_2PI;
    (0..s)
        .map(|_| {
            for (zk, m) in z.iter_mut().zip(mu) {
                let e: f64 = StandardNormal.sample(&mut rng);
                *zk = m + e;
            }
            params.forward_into(&z, &mut ws);
            let ss: f64 = ws.out.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            const_term - 0.5 * ss
        })
        .collect()
}
