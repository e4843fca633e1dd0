//! Experiment harness around the `uncq` library: interval benchmarks,
//! out-of-domain detection, the tail-bound check, causal direction and
//! binary classification, each writing NDJSON records, CSV tables and a
//! replayable manifest.

pub mod args;
pub mod commands;
pub mod config;
pub mod datasets;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

pub use config::{Command, Grid, Params, RunConfig};
pub use error::{CliError, CliResult};
pub use output::{Artifacts, Manifest, MANIFEST_FILE};

/// Validates `cfg`, runs it on a pool of `cfg.jobs` threads and writes all
/// artifacts plus the manifest into `cfg.out`.
pub fn run(cfg: &RunConfig) -> CliResult<Manifest> {
    cfg.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    let mut artifacts = Artifacts::create(&cfg.out)?;
    info!("{} → {}", cfg.command.name(), cfg.out.display());
    pool.install(|| dispatch(cfg, &mut artifacts))?;
    output::write_manifest(&mut artifacts, cfg, started)
}

fn dispatch(cfg: &RunConfig, artifacts: &mut Artifacts) -> CliResult<()> {
    use commands::*;
    match cfg.command {
        Command::PiEval => pi_eval::write(&pi_eval::run(cfg)?, artifacts),
        Command::OodEval => ood_eval::write(&ood_eval::run(cfg)?, artifacts),
        Command::VerifyTheorem1 => theorem1::write(&theorem1::run(cfg)?, artifacts),
        Command::Causal => causal::write(&causal::run(cfg)?, artifacts),
        Command::Synth => synth::run(cfg, artifacts).map(|_| ()),
        Command::Classify => {
            let (records, summary) = classify::run(cfg)?;
            classify::write(&records, &summary, artifacts)
        }
    }
}

/// Replays a manifest's configuration, optionally into another directory or
/// with a different thread count (neither changes any record).
pub fn rerun(manifest: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> CliResult<Manifest> {
    let mut cfg = Manifest::load(manifest)?.config;
    if let Some(out) = out {
        cfg.out = out;
    }
    if let Some(jobs) = jobs {
        cfg.jobs = jobs;
    }
    run(&cfg)
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harness.md")]
mod harness_chapter {}
