use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabeledTable;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Partition of the class labels into in-domain and out-of-domain sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSplitSpec {
    pub in_classes: Vec<usize>,
    pub out_classes: Vec<usize>,
    pub seed: u64,
    /// Fraction of rows (of every class) held out for testing.
    pub test_fraction: f64,
}

impl ClassSplitSpec {
    /// Random half/half partition of `0..n_classes`.
    pub fn random(n_classes: usize, seed: u64) -> ClassSplitSpec {
        let mut classes: Vec<usize> = (0..n_classes).collect();
        classes.shuffle(&mut seeded(seed));
        let half = n_classes / 2;
        let mut in_classes = classes[..half].to_vec();
        let mut out_classes = classes[half..].to_vec();
        in_classes.sort();
        out_classes.sort();
        ClassSplitSpec { in_classes, out_classes, seed, test_fraction: 0.3 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_classes.is_empty() || self.out_classes.is_empty() {
            return Err(Error::invalid("both class sets must be nonempty"));
        }
        if self.in_classes.iter().any(|c| self.out_classes.contains(c)) {
            return Err(Error::invalid("in-domain and out-of-domain classes overlap"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid("test_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Rows of one pool, as a `d × m` column batch.
#[derive(Clone, Debug)]
pub struct ClassSubset {
    pub inputs: DMatrix<f64>,
    /// In-domain pools: position of the class in `in_classes`. Out-domain:
    /// the original label.
    pub labels: Vec<usize>,
    pub original_labels: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ClassSplit {
    pub in_train: ClassSubset,
    pub in_test: ClassSubset,
    pub out_test: ClassSubset,
}

/// Splits a labelled table into the in-domain training pool and the in/out
/// test pools. Each class is divided into train and test at
/// `spec.test_fraction`; out-domain training rows are discarded so that both
/// test pools come from the same held-out slice.
pub fn class_split(table: &LabeledTable, spec: &ClassSplitSpec) -> Result<ClassSplit> {
    spec.validate()?;
    let labels: Vec<usize> = table
        .targets
        .iter()
        .map(|&y| {
            if y >= 0.0 && y.fract() == 0.0 {
                Ok(y as usize)
            } else {
                Err(Error::invalid(format!("class labels must be nonnegative integers, found {y}")))
            }
        })
        .collect::<Result<_>>()?;
    if let Some(stray) = labels.iter().find(|l| !spec.in_classes.contains(l) && !spec.out_classes.contains(l)) {
        return Err(Error::invalid(format!("label {stray} is in neither class set")));
    }

    let mut rng = seeded(spec.seed);
    let mut test_rows = Vec::new();
    let mut train_rows = Vec::new();
    let mut classes: Vec<usize> = labels.clone();
    classes.sort_unstable();
    classes.dedup();
    for class in classes {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        rows.shuffle(&mut rng);
        let n_test = ((rows.len() as f64) * spec.test_fraction).round() as usize;
        test_rows.extend_from_slice(&rows[..n_test]);
        train_rows.extend_from_slice(&rows[n_test..]);
    }
    let (test_rows, train_rows) = (&test_rows[..], &train_rows[..]);

    let in_pos = |l: usize| spec.in_classes.iter().position(|&c| c == l);
    let pick = |rows: &[usize], keep: &dyn Fn(usize) -> bool, remap: bool| {
        let mut chosen: Vec<usize> = rows.iter().copied().filter(|&r| keep(labels[r])).collect();
        chosen.sort_unstable();
        let original: Vec<usize> = chosen.iter().map(|&r| labels[r]).collect();
        let mapped = if remap { original.iter().map(|&l| in_pos(l).unwrap()).collect() } else { original.clone() };
        ClassSubset { inputs: table.raw_columns(&chosen), labels: mapped, original_labels: original, rows: chosen }
    };
    let is_in = |l: usize| in_pos(l).is_some();
    let is_out = |l: usize| in_pos(l).is_none();
    Ok(ClassSplit {
        in_train: pick(train_rows, &is_in, true),
        in_test: pick(test_rows, &is_in, true),
        out_test: pick(test_rows, &is_out, false),
    })
}
