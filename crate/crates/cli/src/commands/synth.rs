//! Writes generated datasets to disk as reproducible fixtures.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use uncq::certs::GaussianSpec;
use uncq::data::{gen_causal_pair, gen_gaussian_pair, gen_sinusoid, write_csv, write_idx_images, write_idx_labels, CausalKind, IdxImages, LabeledTable};
use uncq::rng::seeded;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub dataset: String,
    pub file: String,
    pub rows: usize,
    pub seed: u64,
}

/// Generates `cfg.dataset` (`sinusoid`, `gaussian_pair`, `causal-<KIND>` or
/// `idx`) with `params.n` rows per seed.
pub fn run(cfg: &RunConfig, artifacts: &mut Artifacts) -> CliResult<Vec<SynthRecord>> {
    let dataset = cfg.dataset.clone().unwrap_or_else(|| "sinusoid".into());
    let n = cfg.params.n;
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let suffix = if cfg.seeds.len() > 1 { format!("-{seed}") } else { String::new() };
        let mut emit = |file: String, artifacts: &mut Artifacts| {
            artifacts.register(&file);
            records.push(SynthRecord { dataset: dataset.clone(), file, rows: n, seed });
        };
        let csv_out = |table: &LabeledTable, file: &str| write_csv(table, artifacts.dir().join(file));
        match dataset.as_str() {
            "sinusoid" => {
                let file = format!("sinusoid{suffix}.csv");
                csv_out(&gen_sinusoid(n, seed), &file)?;
                emit(file, artifacts);
            }
            "gaussian_pair" => {
                let (inside, outside) = gen_gaussian_pair(&GaussianSpec::disjoint_null_space(), n, seed)?;
                let d = inside.ncols();
                let x = DMatrix::from_fn(2 * n, d, |i, j| if i < n { inside[(i, j)] } else { outside[(i - n, j)] });
                let domain = (0..2 * n).map(|i| f64::from(u8::from(i >= n))).collect();
                let names = (1..=d).map(|j| format!("x{j}")).collect();
                let file = format!("gaussian_pair{suffix}.csv");
                csv_out(&LabeledTable::new(names, "domain", x, domain)?, &file)?;
                emit(file, artifacts);
            }
            "idx" => {
                let mut rng = seeded(seed);
                let pixels: Vec<u8> = (0..n * 28 * 28).map(|_| rng.gen()).collect();
                let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
                let images = IdxImages { count: n, rows: 28, cols: 28, pixels };
                let (img, lab) = (format!("synth{suffix}-images-idx3-ubyte"), format!("synth{suffix}-labels-idx1-ubyte"));
                write_idx_images(artifacts.dir().join(&img), &images)?;
                write_idx_labels(artifacts.dir().join(&lab), &labels)?;
                emit(img, artifacts);
                emit(lab, artifacts);
            }
            other => {
                let kind_text = other
                    .strip_prefix("causal-")
                    .ok_or_else(|| CliError::usage(format!("unknown synthetic dataset {other:?}")))?;
                let kind: CausalKind = kind_text.parse().map_err(|e: uncq::Error| CliError::usage(e.to_string()))?;
                let pair = gen_causal_pair(kind, n, seed)?;
                let table = LabeledTable::new(vec!["x".into()], "y", DMatrix::from_column_slice(n, 1, &pair.x), pair.y)?;
                let file = format!("causal-{}{suffix}.csv", kind.name());
                csv_out(&table, &file)?;
                emit(file, artifacts);
            }
        }
    }
    artifacts.ndjson("records.ndjson", &records)?;
    Ok(records)
}
