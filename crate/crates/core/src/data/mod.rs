//! Datasets: numeric tables with train/validation/test splits, file formats,
//! and the synthetic generators used in experiments.

pub mod causal_pairs;
pub mod classes;
pub mod csv_io;
pub mod idx;
pub mod synth;

pub use causal_pairs::{gen_causal_pair, gen_causal_pair_with, CausalKind, CausalPair, Mechanism, NoiseModel, PairSpec};
pub use classes::{class_split, ClassSplit, ClassSplitSpec, ClassSubset};
pub use csv_io::{load_csv, write_csv, CategoricalPolicy};
pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use synth::{gen_gaussian_pair, gen_sinusoid, gen_sinusoid_with, sinusoid_median, SINUSOID_DIM, SINUSOID_NOISE_VARIANCE};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Which rows a statistic or a design matrix is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
    All,
}

/// Per-column affine standardization `z = (v − mean) / std`.
///
/// `fitted_on` records which partition produced the statistics so callers can
/// check that nothing outside the training rows leaked into them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: Partition,
    pub rows: usize,
}

impl Scaler {
    /// Fits on the given rows of an `n × d` matrix. Zero-variance columns get
    /// unit scale.
    pub fn fit(data: &DMatrix<f64>, rows: &[usize], fitted_on: Partition) -> Result<Scaler> {
        if rows.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on zero rows"));
        }
        let n = rows.len() as f64;
        let d = data.ncols();
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for j in 0..d {
            let m = rows.iter().map(|&i| data[(i, j)]).sum::<f64>() / n;
            let var = rows.iter().map(|&i| (data[(i, j)] - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            std[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Scaler { mean, std, fitted_on, rows: rows.len() })
    }

    pub fn fit_values(values: &[f64], rows: &[usize], fitted_on: Partition) -> Result<Scaler> {
        let column = DMatrix::from_column_slice(values.len(), 1, values);
        Scaler::fit(&column, rows, fitted_on)
    }

    pub fn identity(dim: usize) -> Scaler {
        Scaler { mean: vec![0.0; dim], std: vec![1.0; dim], fitted_on: Partition::All, rows: 0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, j: usize, v: f64) -> f64 {
        (v - self.mean[j]) / self.std[j]
    }

    pub fn inverse(&self, j: usize, z: f64) -> f64 {
        z * self.std[j] + self.mean[j]
    }

    /// Standardizes a raw feature vector into a new vector.
    pub fn transform_vec(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, &v)| self.transform(j, v)).collect()
    }

    /// Standardizes a `d × m` column batch in place.
    pub fn transform_columns(&self, batch: &mut DMatrix<f64>) {
        for mut col in batch.column_iter_mut() {
            for (j, v) in col.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
    }
}

/// Row indices of a three-way split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Standardized inputs (`d × m`, one column per example) and targets.
#[derive(Clone, Debug)]
pub struct Design {
    pub inputs: DMatrix<f64>,
    pub targets: Vec<f64>,
    pub rows: Vec<usize>,
}

/// A numeric dataset: `n × d` features, `n` targets, an optional split and
/// standardization statistics.
///
/// The scalers are fitted on all rows until a split is attached, then refit
/// on the training rows only.
#[derive(Clone, Debug)]
pub struct LabeledTable {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub features: DMatrix<f64>,
    pub targets: Vec<f64>,
    /// Rows discarded while loading (missing values).
    pub dropped_rows: usize,
    split: Option<Split>,
    feature_scaler: Scaler,
    target_scaler: Scaler,
}

impl LabeledTable {
    pub fn new(
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        features: DMatrix<f64>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), got: targets.len() });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch { expected: features.ncols(), got: feature_names.len() });
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("table contains non-finite values"));
        }
        let all: Vec<usize> = (0..targets.len()).collect();
        let (feature_scaler, target_scaler) = if all.is_empty() {
            (Scaler::identity(features.ncols()), Scaler::identity(1))
        } else {
            (Scaler::fit(&features, &all, Partition::All)?, Scaler::fit_values(&targets, &all, Partition::All)?)
        };
        Ok(LabeledTable {
            feature_names,
            target_name: target_name.into(),
            features,
            targets,
            dropped_rows: 0,
            split: None,
            feature_scaler,
            target_scaler,
        })
    }

    /// Names features `x1..xd`.
    pub fn from_matrix(features: DMatrix<f64>, targets: Vec<f64>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        LabeledTable::new(names, "y", features, targets)
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn split_indices(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn feature_scaler(&self) -> &Scaler {
        &self.feature_scaler
    }

    pub fn target_scaler(&self) -> &Scaler {
        &self.target_scaler
    }

    /// Deterministic shuffled train/val/test partition.
    ///
    /// Sizes are `floor(n·fᵢ)` with the leftover rows handed out by largest
    /// fractional remainder; every part gets at least one row.
    pub fn split(&self, fractions: (f64, f64, f64), seed: u64) -> Result<LabeledTable> {
        let n = self.n_rows();
        if n < 3 {
            return Err(Error::invalid(format!("need at least 3 rows to split, have {n}")));
        }
        let sizes = split_sizes(n, fractions)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded(seed));
        let train = order[..sizes[0]].to_vec();
        let val = order[sizes[0]..sizes[0] + sizes[1]].to_vec();
        let test = order[sizes[0] + sizes[1]..].to_vec();
        self.with_split(Split { train, val, test, seed })
    }

    /// Attaches an explicit split and refits the scalers on its training rows.
    pub fn with_split(&self, split: Split) -> Result<LabeledTable> {
        let n = self.n_rows();
        let mut seen = vec![false; n];
        for &i in split.train.iter().chain(&split.val).chain(&split.test) {
            if i >= n || seen[i] {
                return Err(Error::invalid("split indices must partition the rows"));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) || split.train.is_empty() {
            return Err(Error::invalid("split indices must partition the rows with a nonempty train part"));
        }
        let mut out = self.clone();
        out.feature_scaler = Scaler::fit(&self.features, &split.train, Partition::Train)?;
        out.target_scaler = Scaler::fit_values(&self.targets, &split.train, Partition::Train)?;
        out.split = Some(split);
        Ok(out)
    }

    /// Row indices of a partition. Without a split, `Train` and `All` are every
    /// row and `Val`/`Test` are empty.
    pub fn indices(&self, part: Partition) -> Vec<usize> {
        match (&self.split, part) {
            (_, Partition::All) | (None, Partition::Train) => (0..self.n_rows()).collect(),
            (None, _) => Vec::new(),
            (Some(s), Partition::Train) => s.train.clone(),
            (Some(s), Partition::Val) => s.val.clone(),
            (Some(s), Partition::Test) => s.test.clone(),
        }
    }

    /// Raw features of the given rows as a `d × m` column batch.
    pub fn raw_columns(&self, rows: &[usize]) -> DMatrix<f64> {
        let d = self.n_features();
        DMatrix::from_fn(d, rows.len(), |j, c| self.features[(rows[c], j)])
    }

    pub fn raw_row(&self, row: usize) -> Vec<f64> {
        self.features.row(row).iter().copied().collect()
    }

    pub fn raw_targets(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.targets[i]).collect()
    }

    /// Standardized design for a partition.
    pub fn design(&self, part: Partition) -> Design {
        let rows = self.indices(part);
        let mut inputs = self.raw_columns(&rows);
        self.feature_scaler.transform_columns(&mut inputs);
        let targets = rows.iter().map(|&i| self.target_scaler.transform(0, self.targets[i])).collect();
        Design { inputs, targets, rows }
    }

    /// `max − min` of the training targets; the MPIW normalizer.
    pub fn target_range(&self) -> f64 {
        let rows = self.indices(Partition::Train);
        let (lo, hi) = rows
            .iter()
            .map(|&i| self.targets[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Copy with targets replaced (same rows, same split).
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<LabeledTable> {
        let mut t = LabeledTable::new(self.feature_names.clone(), self.target_name.clone(), self.features.clone(), targets)?;
        t.dropped_rows = self.dropped_rows;
        match &self.split {
            Some(s) => t.with_split(s.clone()),
            None => Ok(t),
        }
    }
}

fn split_sizes(n: usize, (a, b, c): (f64, f64, f64)) -> Result<[usize; 3]> {
    let fr = [a, b, c];
    if fr.iter().any(|f| !(*f > 0.0)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must be positive and sum to 1"));
    }
    let exact: Vec<f64> = fr.iter().map(|f| f * n as f64).collect();
    let mut sizes = [exact[0].floor() as usize, exact[1].floor() as usize, exact[2].floor() as usize];
    let mut by_remainder = [0usize, 1, 2];
    by_remainder.sort_by(|&i, &j| (exact[j] - exact[j].floor()).total_cmp(&(exact[i] - exact[i].floor())));
    let mut left = n - sizes.iter().sum::<usize>();
    for &i in by_remainder.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    for i in 0..3 {
        if sizes[i] == 0 {
            let donor = (0..3).max_by_key(|&j| sizes[j]).unwrap();
            sizes[donor] -= 1;
            sizes[i] = 1;
        }
    }
    Ok(sizes)
}
