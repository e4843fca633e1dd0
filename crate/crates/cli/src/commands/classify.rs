//! Binary classification with the median of a quantile network.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uncq::data::{LabeledTable, Partition, Split};
use uncq::metrics::{accuracy, roc_auc, MeanStd};
use uncq::net::{Activation, TrainConfig};
use uncq::rng::seeded;
use uncq::sqr::{classify_binary_batch, train_sqr};

use crate::config::RunConfig;
use crate::datasets::load_table;
use crate::error::{CliError, CliResult};
use crate::output::{num, Artifacts};

/// Rings above this count are labelled 1.
pub const RINGS_THRESHOLD: f64 = 10.0;
pub const HIDDEN: [usize; 2] = [100, 100];
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRecord {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub accuracy: f64,
    pub auc: f64,
    pub n_test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub dataset: String,
    pub accuracy: MeanStd,
    pub auc: MeanStd,
    pub repeats: usize,
}

/// Epochs: 100 with `fast`, 500 otherwise.
fn epochs(cfg: &RunConfig) -> usize {
    cfg.epochs.unwrap_or(if cfg.fast { 100 } else { 500 })
}

fn binary_targets(table: &LabeledTable) -> CliResult<LabeledTable> {
    let labels: Vec<f64> = table.targets.iter().map(|&r| f64::from(u8::from(r > RINGS_THRESHOLD))).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(CliError::input("binarized target has a single class"));
    }
    Ok(table.with_targets(labels)?)
}

pub fn run(cfg: &RunConfig) -> CliResult<(Vec<ClassifyRecord>, ClassifySummary)> {
    let dataset = cfg.dataset.clone().unwrap_or_else(|| "abalone".into());
    let table = binary_targets(&load_table(&dataset, &cfg.data_dir, cfg.params.target.as_deref())?)?;
    let (lr, wd) = if cfg.grid.configs().len() == 1 { cfg.grid.configs()[0] } else { (1e-3, 1e-3) };
    let records: Vec<CliResult<ClassifyRecord>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut order: Vec<usize> = (0..table.n_rows()).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seeded(seed));
            let n_test = (table.n_rows() as f64 * TEST_FRACTION).round() as usize;
            let split = Split { train: order[n_test..].to_vec(), val: Vec::new(), test: order[..n_test].to_vec(), seed };
            let data = table.with_split(split)?;
            let train = TrainConfig {
                learning_rate: lr,
                weight_decay: wd,
                epochs: epochs(cfg),
                batch_size: cfg.params.batch_size.unwrap_or(64),
                seed,
                hidden: cfg.params.hidden.clone().unwrap_or_else(|| HIDDEN.to_vec()),
                activation: Activation::Relu,
            };
            let model = train_sqr(&data, &train)?;
            let rows = data.indices(Partition::Test);
            let preds = classify_binary_batch(&model, &data.raw_columns(&rows))?;
            let truth: Vec<u8> = rows.iter().map(|&i| data.targets[i] as u8).collect();
            let labels: Vec<u8> = preds.iter().map(|p| p.0).collect();
            let scores: Vec<f64> = preds.iter().map(|p| p.1).collect();
            let positives: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
            Ok(ClassifyRecord {
                dataset: dataset.clone(),
                method: "sqr".into(),
                seed,
                accuracy: accuracy(&labels, &truth)?,
                auc: roc_auc(&scores, &positives)?.auc,
                n_test: rows.len(),
            })
        })
        .collect();
    let records = records.into_iter().collect::<CliResult<Vec<_>>>()?;
    let acc: Vec<f64> = records.iter().map(|r| r.accuracy).collect();
    let auc: Vec<f64> = records.iter().map(|r| r.auc).collect();
    let summary = ClassifySummary {
        dataset,
        accuracy: MeanStd::of(&acc).expect("seeds are nonempty"),
        auc: MeanStd::of(&auc).expect("seeds are nonempty"),
        repeats: records.len(),
    };
    Ok((records, summary))
}

pub fn write(records: &[ClassifyRecord], summary: &ClassifySummary, artifacts: &mut Artifacts) -> CliResult<()> {
    artifacts.ndjson("records.ndjson", records)?;
    artifacts.json("summary.json", summary)?;
    artifacts.csv(
        "classify.csv",
        &["dataset", "accuracy_mean", "accuracy_std", "auc_mean", "auc_std", "repeats"],
        &[vec![
            summary.dataset.clone(),
            num(summary.accuracy.mean),
            num(summary.accuracy.std),
            num(summary.auc.mean),
            num(summary.auc.std),
            summary.repeats.to_string(),
        ]],
    )?;
    println!("{}: accuracy {} auc {}", summary.dataset, summary.accuracy, summary.auc);
    Ok(())
}
