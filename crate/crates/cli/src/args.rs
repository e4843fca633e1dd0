//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_seeds, Command, Grid, Params, RunConfig};
use crate::datasets::default_data_dir;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "uncq", version, about = "Uncertainty-quantification experiment harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Prediction-interval benchmark (PICP / MPIW with validation-band selection).
    #[command(name = "pi_eval", alias = "pi-eval")]
    PiEval(RunArgs),
    /// Out-of-domain detection AUCs on a five/five class split.
    #[command(name = "ood_eval", alias = "ood-eval")]
    OodEval(RunArgs),
    /// Monte Carlo check of the certificate tail bounds.
    #[command(name = "verify_theorem1", alias = "verify-theorem1")]
    VerifyTheorem1(RunArgs),
    /// Causal-direction accuracy on generated pairs.
    Causal(RunArgs),
    /// Write generated datasets as fixtures.
    Synth(RunArgs),
    /// Binary classification with the quantile median (abalone by default).
    Classify(RunArgs),
    /// Replay a run from its manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset name or path.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// `N` for seeds 0..N, `a..b`, or `s1,s2,…`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// `full`, or `lr=a:b,wd=c:d`.
    #[arg(long, default_value = "full", conflicts_with = "grid_point")]
    pub grid: String,
    /// One configuration, `lr=a,wd=b`.
    #[arg(long)]
    pub grid_point: Option<String>,
    /// Parallel jobs (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Desk-scale epochs (500 instead of 5000) and fewer default seeds.
    #[arg(long)]
    pub fast: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Output directory (default `runs/<command>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Data root; falls back to `UNCQ_DATA_DIR`, then `./data`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Target column when `--dataset` is a CSV path.
    #[arg(long)]
    pub target: Option<String>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Tail deviations for verify_theorem1.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub t: Option<Vec<f64>>,
    /// Monte Carlo draws per law for verify_theorem1.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Multiply the bounds by this factor (values below 1 are a self-test).
    #[arg(long)]
    pub bound_scale: Option<f64>,
    /// Gaussian pair JSON for verify_theorem1.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Pair kinds for causal (AN, AN-S, LS, LS-S, MN).
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    /// Pooled level counts for causal.
    #[arg(long, value_delimiter = ',')]
    pub ms: Option<Vec<usize>>,
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Points per causal pair.
    #[arg(long)]
    pub points: Option<usize>,
    /// Rows for synth.
    #[arg(long)]
    pub n: Option<usize>,
}

fn default_seeds(command: Command, fast: bool) -> Vec<u64> {
    let n = match (command, fast) {
        (Command::VerifyTheorem1 | Command::Synth, _) => 1,
        (Command::Classify, _) => 30,
        (Command::Causal, _) => 1,
        (_, true) => 5,
        (_, false) => 20,
    };
    (0..n).collect()
}

impl RunArgs {
    pub fn into_config(self, command: Command) -> CliResult<RunConfig> {
        let defaults = Params::default();
        let grid = match &self.grid_point {
            Some(p) => Grid::parse_point(p)?,
            None => Grid::parse(&self.grid)?,
        };
        let seeds = match &self.seeds {
            Some(s) => parse_seeds(s)?,
            None => default_seeds(command, self.fast),
        };
        Ok(RunConfig {
            command,
            dataset: self.dataset,
            method: self.method,
            alpha: self.alpha,
            seeds,
            grid,
            jobs: self.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            fast: self.fast,
            epochs: self.epochs,
            out: self.out.unwrap_or_else(|| PathBuf::from("runs").join(command.name())),
            data_dir: self.data_dir.unwrap_or_else(default_data_dir),
            params: Params {
                target: self.target,
                hidden: self.hidden,
                batch_size: self.batch_size,
                t: self.t.unwrap_or(defaults.t),
                samples: self.samples.unwrap_or(defaults.samples),
                bound_scale: self.bound_scale.unwrap_or(defaults.bound_scale),
                spec: self.spec,
                kinds: self.kinds.unwrap_or(defaults.kinds),
                ms: self.ms.unwrap_or(defaults.ms),
                pairs: self.pairs.unwrap_or(defaults.pairs),
                points: self.points.unwrap_or(defaults.points),
                n: self.n.unwrap_or(defaults.n),
            },
        })
    }
}
