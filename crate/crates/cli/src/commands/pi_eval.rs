//! Prediction-interval benchmark: grid × seeds per method, then the
//! validation-band selection.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uncq::baselines::train_gaussian;
use uncq::data::{LabeledTable, Partition};
use uncq::metrics::{mpiw, picp, select_calibrated, ConfigResult, Selection};
use uncq::net::{Activation, TrainConfig};
use uncq::sqr::{quantile_intervals, train_sqr, PredictionInterval};

use crate::config::RunConfig;
use crate::datasets::load_table;
use crate::error::{CliError, CliResult};
use crate::output::{num, Artifacts};

/// Train/validation/test fractions.
pub const SPLIT: (f64, f64, f64) = (0.7, 0.15, 0.15);
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];
pub const DEFAULT_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiRecord {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub config: PiConfig,
    pub val_picp: f64,
    pub test_picp: f64,
    pub test_mpiw: f64,
    /// Inverted interval endpoints swapped on validation and test rows.
    pub crossings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiSummary {
    pub dataset: String,
    pub method: String,
    pub selection: Selection,
    /// Configurations dropped after a training failure.
    pub skipped: usize,
}

pub struct PiOutcome {
    pub records: Vec<PiRecord>,
    pub summaries: Vec<PiSummary>,
}

fn methods(cfg: &RunConfig) -> Vec<&'static str> {
    match cfg.method.as_deref() {
        Some("sqr") => vec!["sqr"],
        Some("gaussian") => vec!["gaussian"],
        _ => vec!["sqr", "gaussian"],
    }
}

/// MPIW normalizer; a constant training target falls back to 1 so that
/// degenerate data still reports a width.
fn normalizer(table: &LabeledTable) -> f64 {
    let r = table.target_range();
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

fn evaluate(method: &str, table: &LabeledTable, train: &TrainConfig, alpha: f64) -> uncq::Result<(Vec<PredictionInterval>, Vec<PredictionInterval>, usize)> {
    let val_x = table.raw_columns(&table.indices(Partition::Val));
    let test_x = table.raw_columns(&table.indices(Partition::Test));
    let (val, test) = match method {
        "sqr" => {
            let model = train_sqr(table, train)?;
            (quantile_intervals(&model, &val_x, alpha)?, quantile_intervals(&model, &test_x, alpha)?)
        }
        _ => {
            let model = train_gaussian(table, train)?;
            (model.intervals(&val_x, alpha)?, model.intervals(&test_x, alpha)?)
        }
    };
    let crossings = val.crossings + test.crossings;
    Ok((val.intervals, test.intervals, crossings))
}

pub fn run(cfg: &RunConfig) -> CliResult<PiOutcome> {
    let dataset = cfg.dataset.clone().expect("validated");
    let table = load_table(&dataset, &cfg.data_dir, cfg.params.target.as_deref())?;
    info!("{dataset}: {} rows, {} features", table.n_rows(), table.n_features());
    let hidden = cfg.params.hidden.clone().unwrap_or_else(|| DEFAULT_HIDDEN.to_vec());
    let batch_size = cfg.params.batch_size.unwrap_or(DEFAULT_BATCH);
    let epochs = cfg.train_epochs();

    let mut jobs = Vec::new();
    for method in methods(cfg) {
        for (lr, wd) in cfg.grid.configs() {
            for &seed in &cfg.seeds {
                jobs.push((method, lr, wd, seed));
            }
        }
    }
    let results: Vec<CliResult<Option<PiRecord>>> = jobs
        .par_iter()
        .map(|&(method, lr, wd, seed)| {
            let split = table.split(SPLIT, seed)?;
            let train = TrainConfig {
                learning_rate: lr,
                weight_decay: wd,
                epochs,
                batch_size,
                seed,
                hidden: hidden.clone(),
                activation: Activation::Relu,
            };
            let (val, test, crossings) = match evaluate(method, &split, &train, cfg.alpha) {
                Ok(v) => v,
                Err(e @ uncq::Error::TrainingDiverged { .. }) => {
                    warn!("{dataset} {method} lr={lr} wd={wd} seed={seed}: {e}; skipped");
                    return Ok(None);
                }
                Err(e) => return Err(e.into()),
            };
            let ys = |part| split.raw_targets(&split.indices(part));
            let record = PiRecord {
                dataset: dataset.clone(),
                method: method.to_string(),
                seed,
                config: PiConfig { learning_rate: lr, weight_decay: wd, epochs, batch_size, hidden: hidden.clone() },
                val_picp: picp(&val, &ys(Partition::Val))?,
                test_picp: picp(&test, &ys(Partition::Test))?,
                test_mpiw: mpiw(&test, normalizer(&split))?,
                crossings,
            };
            if ![record.val_picp, record.test_picp, record.test_mpiw].iter().all(|v| v.is_finite()) {
                warn!("{dataset} {method} lr={lr} wd={wd} seed={seed}: non-finite metrics; skipped");
                return Ok(None);
            }
            Ok(Some(record))
        })
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r? {
            Some(rec) => records.push(rec),
            None => skipped.push(job.0),
        }
    }
    if records.is_empty() {
        return Err(CliError::Numeric("every configuration failed to train".into()));
    }
    let summaries = methods(cfg)
        .into_iter()
        .map(|method| {
            let results: Vec<ConfigResult> = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| ConfigResult { val_picp: r.val_picp, test_picp: r.test_picp, test_mpiw: r.test_mpiw })
                .collect();
            PiSummary {
                dataset: dataset.clone(),
                method: method.to_string(),
                selection: select_calibrated(&results),
                skipped: skipped.iter().filter(|&&m| m == method).count(),
            }
        })
        .collect();
    Ok(PiOutcome { records, summaries })
}

pub fn write(out: &PiOutcome, artifacts: &mut Artifacts) -> CliResult<()> {
    artifacts.ndjson("records.ndjson", &out.records)?;
    let rows: Vec<Vec<String>> = out
        .summaries
        .iter()
        .map(|s| {
            let mut row = vec![s.dataset.clone(), s.method.clone()];
            match s.selection.summary() {
                Some(c) => row.extend([
                    num(c.picp.mean),
                    num(c.picp.std),
                    num(c.mpiw.mean),
                    num(c.mpiw.std),
                    c.survivors.to_string(),
                    c.total.to_string(),
                ]),
                None => row.extend(["none", "none", "none", "none", "0"].map(String::from).into_iter().chain([
                    out.records.iter().filter(|r| r.method == s.method).count().to_string(),
                ])),
            }
            row.push(s.skipped.to_string());
            row.push(s.selection.to_string());
            row
        })
        .collect();
    artifacts.csv(
        "table1.csv",
        &["dataset", "method", "picp_mean", "picp_std", "mpiw_mean", "mpiw_std", "survivors", "total", "skipped", "display"],
        &rows,
    )?;
    artifacts.json("summary.json", &out.summaries)?;
    for s in &out.summaries {
        println!("{} {}: {}", s.dataset, s.method, s.selection);
    }
    Ok(())
}
