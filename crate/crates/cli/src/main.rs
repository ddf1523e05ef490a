//! `latent-gfl`: simulate scenarios, fit the latent graph-fused model,
//! choose `lambda`, cluster learned means and score labelings.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! failure during fitting.

mod commands;
mod docs;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latent_gfl_core::admm::{FitConfig, MuSweep};
use latent_gfl_core::inference::InitMode;

#[derive(Debug, Parser)]
#[command(name = "latent-gfl", version, about = "Latent-space graph-fused LASSO clustering of node time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a simulated graph, node series and true labels.
    Simulate(SimulateArgs),
    /// Fit prior means, decoder and ADMM variables for one lambda.
    Fit(FitArgs),
    /// Pick lambda by held-out marginal likelihood.
    SelectLambda(SelectArgs),
    /// Cluster learned prior means with k-means.
    Cluster(ClusterArgs),
    /// Score predicted labels against true labels.
    Evaluate(EvaluateArgs),
    /// Run replications of a scenario end to end and tabulate metrics.
    Batch(BatchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Reduced settings for a desktop CPU.
    Desk,
    /// Full-scale simulation settings.
    Paper,
}

/// Model and optimizer settings; unset flags come from the profile.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Width of both hidden layers.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Augmentation weight; defaults to lambda.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub admm_iters: Option<usize>,
    #[arg(long)]
    pub adam_iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Slack-update passes per ADMM iteration.
    #[arg(long)]
    pub bcd_iters: Option<usize>,
    /// Langevin step size.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub mcmc_steps: Option<usize>,
    /// Langevin chains per node.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Start each chain from its previous final state.
    #[arg(long)]
    pub warm_start: bool,
    /// Update every prior mean from the previous iteration's neighbours.
    #[arg(long)]
    pub jacobi: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn config(&self) -> FitConfig {
        let mut c = match self.profile {
            Profile::Desk => FitConfig::desk(),
            Profile::Paper => FitConfig::paper(),
        };
        if let Some(v) = self.latent_dim {
            c.latent_dim = v;
        }
        if let Some(v) = self.hidden {
            c.hidden1 = v;
            c.hidden2 = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        c.gamma = self.gamma;
        if let Some(v) = self.admm_iters {
            c.admm_iters = v;
        }
        if let Some(v) = self.adam_iters {
            c.adam_iters = v;
        }
        if let Some(v) = self.lr {
            c.adam_lr = v;
        }
        if let Some(v) = self.bcd_iters {
            c.bcd_iters = v;
        }
        if let Some(v) = self.delta {
            c.langevin.delta = v;
        }
        if let Some(v) = self.mcmc_steps {
            c.langevin.mcmc_steps = v;
        }
        if let Some(v) = self.samples {
            c.langevin.n_samples = v;
        }
        if self.warm_start {
            c.langevin.init_mode = InitMode::WarmStart;
        }
        if self.jacobi {
            c.mu_sweep = MuSweep::Jacobi;
        }
        c.seed = self.seed;
        c
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Tab-separated edge list.
    #[arg(long)]
    pub edges: PathBuf,
    /// Comma-separated series, one node per row.
    #[arg(long)]
    pub series: PathBuf,
    /// Both input files start with a header line.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario id (1 block/AR, 2 grid/AR, 3 block/VAR).
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Node count for block scenarios (presets: 120, 210).
    #[arg(long)]
    pub n_nodes: Option<usize>,
    /// Grid size for scenario 2, e.g. `12x12`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Override the preset cluster sizes, e.g. `30,40,50`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Series length.
    #[arg(long)]
    pub series_len: Option<usize>,
    /// JSON scenario description instead of the flags above.
    #[arg(long, conflicts_with_all = ["scenario", "n_nodes", "grid", "sizes"])]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Continue from a saved `state.json`; its configuration is used as is
    /// except for the iteration count.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Candidate penalties.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75,1.0")]
    pub lambdas: Vec<f64>,
    /// Fraction of nodes held out.
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    /// Prior draws per held-out node.
    #[arg(long, default_value_t = 1000)]
    pub score_samples: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// `mu.json` written by `fit`.
    #[arg(long)]
    pub mu: PathBuf,
    /// Largest k tried by silhouette selection (capped at the node count).
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// Fixed number of clusters; skips selection.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// True labels, `node,label`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Predicted labels, `node,label`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Values echoed into the output row.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "")]
    pub scenario: String,
    #[arg(long, default_value = "")]
    pub method: String,
    /// Append the row to this CSV file (header written once).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Candidate penalties.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    #[arg(long, default_value_t = 1000)]
    pub score_samples: usize,
    /// Choose k by silhouette up to this value instead of using the true k.
    #[arg(long)]
    pub select_k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::SelectLambda(a) => commands::select_lambda(&a),
        Command::Cluster(a) => commands::cluster(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Batch(a) => commands::batch(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
