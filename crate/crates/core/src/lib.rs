//! Decoder-only latent space clustering of graph nodes that carry a time
//! series.
//!
//! Every node `i` owns a latent `Z_i ~ N(mu_i, I_d)` and its series is
//! modelled as `Y_i | Z_i ~ N(h(Z_i), I_n)` with `h` a three-layer ReLU
//! network shared by all nodes. The prior means are learned under a
//! graph-fused LASSO penalty `lambda * sum_(i,j) ||mu_i - mu_j||_2`, solved with
//! ADMM; posterior expectations come from unadjusted Langevin dynamics. The
//! learned means are clustered with k-means, with the number of clusters
//! picked by silhouette score.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | [`Graph`], [`NodeSeries`] and the two series standardizations |
//! | [`decoder`] | ReLU decoder, Gaussian log-likelihood, gradients, Adam |
//! | [`inference`] | Langevin sampler, posterior mean, Monte Carlo marginal likelihood |
//! | [`admm`] | closed-form updates, the fit loop, cross-validated `lambda` selection |
//! | [`clustering`] | k-means++, silhouette, selection of `k` |
//! | [`metrics`] | NMI, ARI, ACC, homogeneity, completeness, purity |
//! | [`simgen`] | block/grid graphs, AR(1) and VAR(1) generators, scenarios |
//! | [`pipeline`] | end-to-end runs used by the CLI and the acceptance suite |
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. The `parallel` feature spreads per-node sampling over rayon.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod admm;
pub mod clustering;
pub mod decoder;
pub mod graph;
pub mod inference;
mod math;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod simgen;

pub use admm::{fit, select_lambda, AdmmState, FitConfig, FitError, FitResult, MuSweep};
pub use clustering::{kmeans, select_k, silhouette, ClusterError, ClusterResult};
pub use decoder::{AdamState, DecoderError, DecoderParams, DecoderShape};
pub use graph::{Graph, GraphError, NodeSeries, SeriesError};
pub use inference::{InferenceError, InitMode, LangevinConfig};
pub use metrics::{evaluate, ContingencyTable, MetricsError, Scores};
pub use rng::RngStream;
