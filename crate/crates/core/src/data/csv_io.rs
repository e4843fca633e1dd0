use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LabeledTable;
use crate::error::{Error, Result};

/// What to do with non-numeric feature columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalPolicy {
    /// Expand into one 0/1 column per distinct value (sorted), named `col=value`.
    #[default]
    OneHot,
    /// Fail on any non-numeric column.
    Reject,
}

const MISSING: [&str; 6] = ["", "NA", "N/A", "?", "nan", "NaN"];

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell.trim())
}

/// Reads a header-first CSV file into a table.
///
/// Rows with any missing cell are dropped and counted in
/// [`LabeledTable::dropped_rows`]. The target column must be numeric.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, policy: CategoricalPolicy) -> Result<LabeledTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_owned).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::malformed(path, format!("no column named {target_column:?}")))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(Error::malformed(path, "no complete rows"));
    }

    let parsed: Vec<Vec<Option<f64>>> =
        rows.iter().map(|r| r.iter().map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite())).collect()).collect();
    let numeric: Vec<bool> = (0..header.len()).map(|j| parsed.iter().all(|r| r[j].is_some())).collect();
    if !numeric[target_idx] {
        return Err(Error::malformed(path, format!("target column {target_column:?} is not numeric")));
    }

    // (name, column source)
    enum Source {
        Numeric(usize),
        Level(usize, String),
    }
    let mut columns: Vec<(String, Source)> = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        if numeric[j] {
            columns.push((name.clone(), Source::Numeric(j)));
        } else {
            if policy == CategoricalPolicy::Reject {
                return Err(Error::malformed(path, format!("column {name:?} is not numeric")));
            }
            let levels: BTreeSet<&str> = rows.iter().map(|r| r[j].as_str()).collect();
            for level in levels {
                columns.push((format!("{name}={level}"), Source::Level(j, level.to_owned())));
            }
        }
    }

    let features = DMatrix::from_fn(rows.len(), columns.len(), |i, c| match &columns[c].1 {
        Source::Numeric(j) => parsed[i][*j].unwrap(),
        Source::Level(j, level) => f64::from(u8::from(rows[i][*j] == *level)),
    });
    let targets = parsed.iter().map(|r| r[target_idx].unwrap()).collect();
    let names = columns.into_iter().map(|(n, _)| n).collect();
    let mut table = LabeledTable::new(names, target_column, features, targets)?;
    table.dropped_rows = dropped;
    Ok(table)
}

/// Writes features then the target, with a header row. Values use the
/// shortest decimal form that parses back to the same `f64`.
pub fn write_csv(table: &LabeledTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = table.feature_names.clone();
    header.push(table.target_name.clone());
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..table.n_rows() {
        let record: Vec<String> = table
            .features
            .row(i)
            .iter()
            .chain(std::iter::once(&table.targets[i]))
            .map(|v| v.to_string())
            .collect();
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::malformed(path, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn numeric_file_loads_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,b,y\n1.5,2,3\n-4,0.25,6e-3\n");
        let t = load_csv(&p, "y", CategoricalPolicy::OneHot).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.features, DMatrix::from_row_slice(2, 2, &[1.5, 2.0, -4.0, 0.25]));
        assert_eq!(t.targets, vec![3.0, 6e-3]);
        assert_eq!(t.dropped_rows, 0);
    }

    #[test]
    fn categorical_columns_are_one_hot() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "b.csv", "sex,len,rings\nM,0.4,10\nF,0.5,9\nI,0.3,7\nM,0.2,3\n");
        let t = load_csv(&p, "rings", CategoricalPolicy::OneHot).unwrap();
        assert_eq!(t.feature_names, vec!["sex=F", "sex=I", "sex=M", "len"]);
        assert_eq!(t.features.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.4]);
        assert!(load_csv(&p, "rings", CategoricalPolicy::Reject).is_err());
    }

    #[test]
    fn rows_with_missing_cells_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.csv", "a,y\n1,2\n,3\n4,5\n");
        let t = load_csv(&p, "y", CategoricalPolicy::OneHot).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.dropped_rows, 1);
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "a,y\n1,2\n");
        assert!(matches!(load_csv(&p, "z", CategoricalPolicy::OneHot), Err(Error::Malformed { .. })));
        let p = write(&dir, "e.csv", "a,y\n1,2,3\n");
        assert!(load_csv(&p, "y", CategoricalPolicy::OneHot).is_err());
        let p = write(&dir, "f.csv", "a,y\n,\n");
        assert!(load_csv(&p, "y", CategoricalPolicy::OneHot).is_err());
        assert!(matches!(
            load_csv(dir.path().join("missing.csv"), "y", CategoricalPolicy::OneHot),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn write_then_load_is_exact() {
        let x = DMatrix::from_fn(7, 3, |i, j| ((i * 31 + j * 7) as f64).sin() * 1e3 / 7.0);
        let y = (0..7).map(|i| 1.0 / (i as f64 + 3.0)).collect();
        let t = LabeledTable::from_matrix(x, y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&t, &p).unwrap();
        let back = load_csv(&p, "y", CategoricalPolicy::Reject).unwrap();
        assert_eq!(back.features, t.features);
        assert_eq!(back.targets, t.targets);
        assert_eq!(back.feature_names, t.feature_names);
    }
}
