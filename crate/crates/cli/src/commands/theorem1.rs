//! Monte Carlo check of the certificate tail bounds.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use uncq::certs::{empirical_tail_check, GaussianSpec, TailCheckReport, TailCheckRow};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, Artifacts};

/// User-supplied Gaussian pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub out_mean: Vec<f64>,
    pub out_cov: Vec<Vec<f64>>,
    pub k: usize,
}

fn square(rows: &[Vec<f64>], d: usize, what: &str) -> CliResult<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::input(format!("{what} must be {d}×{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub fn load_spec(path: &Path) -> CliResult<GaussianSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let f: SpecFile = serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let d = f.mean.len();
    if f.out_mean.len() != d {
        return Err(CliError::input("out_mean has the wrong length"));
    }
    Ok(GaussianSpec::from_covariances(
        DVector::from_vec(f.mean),
        square(&f.cov, d, "cov")?,
        DVector::from_vec(f.out_mean),
        square(&f.out_cov, d, "out_cov")?,
        f.k,
    )?)
}

pub fn run(cfg: &RunConfig) -> CliResult<TailCheckReport> {
    let spec = match &cfg.params.spec {
        Some(path) => load_spec(path)?,
        None => GaussianSpec::disjoint_null_space(),
    };
    let c = spec.certificates();
    let report = empirical_tail_check(&spec, &c, &cfg.params.t, cfg.params.samples, cfg.seeds[0], cfg.params.bound_scale)?;
    if report.rows.iter().any(|r| !r.empirical_freq.is_finite() || !r.bound.is_finite()) {
        return Err(CliError::Numeric("non-finite tail frequency or bound".into()));
    }
    Ok(report)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn write(report: &TailCheckReport, artifacts: &mut Artifacts) -> CliResult<()> {
    artifacts.ndjson("records.ndjson", &report.rows)?;
    artifacts.json("theorem1.json", report)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r: &TailCheckRow| {
            vec![r.domain.clone(), num(r.t), num(r.empirical_freq), num(r.bound), verdict(r.satisfied).to_string()]
        })
        .collect();
    artifacts.csv("theorem1.csv", &["domain", "t", "empirical_freq", "bound", "verdict"], &rows)?;
    for r in &report.rows {
        println!("{} {:<3} t={:<4} freq={:.6} bound={:.6}", verdict(r.satisfied), r.domain, r.t, r.empirical_freq, r.bound);
    }
    println!(
        "mean score in={:.6} out={:.6} ratio={:.2}",
        report.in_mean_score,
        report.out_mean_score,
        report.mean_ratio()
    );
    Ok(())
}
