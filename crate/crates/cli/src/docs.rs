//! JSON documents written and read by the CLI.

use std::collections::BTreeMap;
use std::path::Path;

use latent_gfl_core::admm::{AdmmState, FitConfig, IterationRecord, MuSweep};
use latent_gfl_core::decoder::{AdamState, DecoderParams, DecoderShape};
use latent_gfl_core::inference::{InitMode, LangevinConfig};
use latent_gfl_core::simgen::{GraphSpec, ScenarioSpec, SeriesSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepDoc {
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDoc {
    pub latent_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub admm_iters: usize,
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub bcd_iters: usize,
    pub delta: f64,
    pub mcmc_steps: usize,
    pub n_samples: usize,
    pub warm_start: bool,
    pub mu_sweep: SweepDoc,
    pub seed: u64,
}

impl From<&FitConfig> for ConfigDoc {
    fn from(c: &FitConfig) -> Self {
        Self {
            latent_dim: c.latent_dim,
            hidden1: c.hidden1,
            hidden2: c.hidden2,
            lambda: c.lambda,
            gamma: c.gamma,
            admm_iters: c.admm_iters,
            adam_iters: c.adam_iters,
            adam_lr: c.adam_lr,
            bcd_iters: c.bcd_iters,
            delta: c.langevin.delta,
            mcmc_steps: c.langevin.mcmc_steps,
            n_samples: c.langevin.n_samples,
            warm_start: c.langevin.init_mode == InitMode::WarmStart,
            mu_sweep: match c.mu_sweep {
                MuSweep::GaussSeidel => SweepDoc::GaussSeidel,
                MuSweep::Jacobi => SweepDoc::Jacobi,
            },
            seed: c.seed,
        }
    }
}

impl From<&ConfigDoc> for FitConfig {
    fn from(d: &ConfigDoc) -> Self {
        Self {
            latent_dim: d.latent_dim,
            hidden1: d.hidden1,
            hidden2: d.hidden2,
            lambda: d.lambda,
            gamma: d.gamma,
            admm_iters: d.admm_iters,
            adam_iters: d.adam_iters,
            adam_lr: d.adam_lr,
            bcd_iters: d.bcd_iters,
            langevin: LangevinConfig {
                delta: d.delta,
                mcmc_steps: d.mcmc_steps,
                n_samples: d.n_samples,
                init_mode: if d.warm_start { InitMode::WarmStart } else { InitMode::PriorMean },
            },
            mu_sweep: match d.mu_sweep {
                SweepDoc::GaussSeidel => MuSweep::GaussSeidel,
                SweepDoc::Jacobi => MuSweep::Jacobi,
            },
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphDoc {
    Block { p_in: f64, p_out: f64 },
    Grid { rows: usize, cols: usize },
    GridSplit { rows: usize, cols: usize, row_split: usize, col_split: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeriesDoc {
    Ar { psis: Vec<f64>, variances: Vec<f64> },
    Var { phi: f64, rho: f64, burn_in: usize },
}

/// Scenario description; also accepted as a `simulate --spec` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub scenario: u8,
    pub cluster_sizes: Vec<usize>,
    pub series_len: usize,
    pub means: Vec<f64>,
    pub graph: GraphDoc,
    pub series: SeriesDoc,
    pub seed: u64,
}

impl From<&ScenarioSpec> for ScenarioDoc {
    fn from(s: &ScenarioSpec) -> Self {
        Self {
            scenario: s.scenario,
            cluster_sizes: s.cluster_sizes.clone(),
            series_len: s.n,
            means: s.means.clone(),
            graph: match s.graph {
                GraphSpec::Block { p_in, p_out } => GraphDoc::Block { p_in, p_out },
                GraphSpec::Grid { rows, cols } => GraphDoc::Grid { rows, cols },
                GraphSpec::GridSplit {
                    rows,
                    cols,
                    row_split,
                    col_split,
                } => GraphDoc::GridSplit {
                    rows,
                    cols,
                    row_split,
                    col_split,
                },
            },
            series: match &s.series {
                SeriesSpec::Ar { psis, variances } => SeriesDoc::Ar {
                    psis: psis.clone(),
                    variances: variances.clone(),
                },
                SeriesSpec::Var { phi, rho, burn_in } => SeriesDoc::Var {
                    phi: *phi,
                    rho: *rho,
                    burn_in: *burn_in,
                },
            },
            seed: s.seed,
        }
    }
}

impl From<&ScenarioDoc> for ScenarioSpec {
    fn from(d: &ScenarioDoc) -> Self {
        Self {
            scenario: d.scenario,
            cluster_sizes: d.cluster_sizes.clone(),
            n: d.series_len,
            means: d.means.clone(),
            graph: match d.graph {
                GraphDoc::Block { p_in, p_out } => GraphSpec::Block { p_in, p_out },
                GraphDoc::Grid { rows, cols } => GraphSpec::Grid { rows, cols },
                GraphDoc::GridSplit {
                    rows,
                    cols,
                    row_split,
                    col_split,
                } => GraphSpec::GridSplit {
                    rows,
                    cols,
                    row_split,
                    col_split,
                },
            },
            series: match &d.series {
                SeriesDoc::Ar { psis, variances } => SeriesSpec::Ar {
                    psis: psis.clone(),
                    variances: variances.clone(),
                },
                SeriesDoc::Var { phi, rho, burn_in } => SeriesSpec::Var {
                    phi: *phi,
                    rho: *rho,
                    burn_in: *burn_in,
                },
            },
            seed: d.seed,
        }
    }
}

/// Learned prior means, one row per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuDoc {
    pub n_nodes: usize,
    pub latent_dim: usize,
    pub lambda: f64,
    pub mu: Vec<Vec<f64>>,
}

impl MuDoc {
    pub fn flat(&self) -> Result<Vec<f64>> {
        if self.mu.len() != self.n_nodes || self.mu.iter().any(|r| r.len() != self.latent_dim) {
            return Err(CliError::invalid("mu matrix does not match n_nodes x latent_dim"));
        }
        Ok(self.mu.concat())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeDoc {
    pub latent_dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub output_dim: usize,
}

/// Decoder weights in the flat order `W1, b1, W2, b2, W3, b3` (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderDoc {
    pub shape: ShapeDoc,
    pub params: Vec<f64>,
}

impl From<&DecoderParams> for DecoderDoc {
    fn from(p: &DecoderParams) -> Self {
        let s = p.shape();
        Self {
            shape: ShapeDoc {
                latent_dim: s.latent_dim,
                hidden1: s.hidden1,
                hidden2: s.hidden2,
                output_dim: s.output_dim,
            },
            params: p.as_slice().to_vec(),
        }
    }
}

impl DecoderDoc {
    pub fn params(&self) -> Result<DecoderParams> {
        let s = self.shape;
        let shape = DecoderShape::new(s.latent_dim, s.hidden1, s.hidden2, s.output_dim);
        DecoderParams::from_flat(shape, self.params.clone()).map_err(|e| CliError::invalid(e.to_string()))
    }
}

/// Everything needed to resume a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub config: ConfigDoc,
    pub iteration: usize,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub w: Vec<f64>,
    pub decoder: DecoderDoc,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_step: u64,
}

impl StateDoc {
    pub fn new(state: &AdmmState, cfg: &FitConfig) -> Self {
        let (m, v) = state.adam.moments();
        Self {
            config: cfg.into(),
            iteration: state.iteration,
            mu: state.mu.clone(),
            nu: state.nu.clone(),
            w: state.w.clone(),
            decoder: (&state.decoder).into(),
            adam_m: m.to_vec(),
            adam_v: v.to_vec(),
            adam_step: state.adam.step_count(),
        }
    }

    pub fn state(&self) -> Result<AdmmState> {
        let adam = AdamState::from_parts(self.adam_m.clone(), self.adam_v.clone(), self.adam_step)
            .map_err(|e| CliError::invalid(e.to_string()))?;
        Ok(AdmmState {
            mu: self.mu.clone(),
            nu: self.nu.clone(),
            w: self.w.clone(),
            decoder: self.decoder.params()?,
            adam,
            iteration: self.iteration,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub primal_residual: f64,
    pub objective: f64,
    pub max_abs_dual: f64,
}

impl From<&IterationRecord> for HistoryRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iteration: r.iteration,
            primal_residual: r.primal_residual,
            objective: r.objective,
            max_abs_dual: r.max_abs_dual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let hash = Sha256::digest(&bytes);
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

/// Written next to every output: what ran, with which settings and inputs,
/// what it produced and how long each phase took.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioDoc>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config: None,
            scenario: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(digest(path)?);
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }
}
