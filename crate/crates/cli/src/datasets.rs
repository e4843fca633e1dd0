//! Dataset lookup under the data directory.

use std::path::{Path, PathBuf};

use uncq::data::{load_csv, load_idx, CategoricalPolicy, LabeledTable};

use crate::error::{CliError, CliResult};

/// Bundled regression tables and their target columns.
pub const KNOWN_TABLES: [(&str, &str); 3] = [("concrete", "compressive_strength"), ("boston", "medv"), ("abalone", "rings")];

/// Data root: `--data-dir`, then `UNCQ_DATA_DIR`, then `./data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("UNCQ_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

/// Loads a named table (`concrete`, `boston`, `abalone`) from `data_dir`, or
/// any CSV path with an explicit target column.
pub fn load_table(name: &str, data_dir: &Path, target: Option<&str>) -> CliResult<LabeledTable> {
    let known = KNOWN_TABLES.iter().find(|(n, _)| n.eq_ignore_ascii_case(name));
    let (path, target) = match (known, target) {
        (_, Some(t)) if name.ends_with(".csv") => (PathBuf::from(name), t.to_string()),
        (Some((n, t)), None) => (data_dir.join(format!("{n}.csv")), t.to_string()),
        (Some((n, _)), Some(t)) => (data_dir.join(format!("{n}.csv")), t.to_string()),
        (None, _) => {
            return Err(CliError::input(format!(
                "unknown dataset {name:?}; use one of concrete, boston, abalone or a .csv path with --target"
            )))
        }
    };
    if !path.is_file() {
        return Err(CliError::input(format!("dataset file {} not found", path.display())));
    }
    Ok(load_csv(&path, &target, CategoricalPolicy::OneHot)?)
}

fn idx_file(data_dir: &Path, name: &str, kind: &str) -> CliResult<PathBuf> {
    let stem = data_dir.join(format!("{name}-{kind}"));
    for candidate in [stem.with_extension("gz"), stem.clone()] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(CliError::input(format!("dataset file {}[.gz] not found", stem.display())))
}

/// Loads `<name>-images-idx3-ubyte[.gz]` with its labels and checks for ten
/// classes.
pub fn load_images(name: &str, data_dir: &Path) -> CliResult<LabeledTable> {
    let table = load_idx(idx_file(data_dir, name, "images-idx3-ubyte")?, idx_file(data_dir, name, "labels-idx1-ubyte")?)?;
    let mut seen = [false; 256];
    for &y in &table.targets {
        seen[y as usize] = true;
    }
    if seen.iter().filter(|&&s| s).count() != 10 || seen[10..].iter().any(|&s| s) {
        return Err(CliError::input(format!("{name} must have exactly the labels 0..9")));
    }
    Ok(table)
}
