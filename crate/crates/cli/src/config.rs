use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Harness subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    PiEval,
    OodEval,
    VerifyTheorem1,
    Causal,
    Synth,
    Classify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PiEval => "pi_eval",
            Command::OodEval => "ood_eval",
            Command::VerifyTheorem1 => "verify_theorem1",
            Command::Causal => "causal",
            Command::Synth => "synth",
            Command::Classify => "classify",
        }
    }
}

/// Learning-rate × weight-decay grid for the network trainers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
}

impl Grid {
    /// The hyperparameter grid used for every network method in the
    /// interval experiments.
    pub fn full() -> Grid {
        Grid { learning_rates: vec![1e-2, 1e-3, 1e-4], weight_decays: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0] }
    }

    pub fn point(learning_rate: f64, weight_decay: f64) -> Grid {
        Grid { learning_rates: vec![learning_rate], weight_decays: vec![weight_decay] }
    }

    /// Parses `full`, or `lr=a:b:…,wd=c:d:…` (either key may be omitted
    /// and then takes the full-grid values).
    pub fn parse(text: &str) -> CliResult<Grid> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("full") {
            return Ok(Grid::full());
        }
        let mut grid = Grid::full();
        for part in text.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("grid entry {part:?} is not key=values")))?;
            let values = values
                .split(':')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad grid value {v:?}"))))
                .collect::<CliResult<Vec<f64>>>()?;
            match key.trim() {
                "lr" | "learning_rate" => grid.learning_rates = values,
                "wd" | "weight_decay" => grid.weight_decays = values,
                other => return Err(CliError::usage(format!("unknown grid key {other:?}"))),
            }
        }
        Ok(grid)
    }

    /// Single point `lr=a,wd=b`.
    pub fn parse_point(text: &str) -> CliResult<Grid> {
        let g = Grid::parse(text)?;
        if g.learning_rates.len() != 1 || g.weight_decays.len() != 1 {
            return Err(CliError::usage("a grid point needs exactly one lr and one wd"));
        }
        Ok(g)
    }

    /// `(learning_rate, weight_decay)` pairs in row-major order.
    pub fn configs(&self) -> Vec<(f64, f64)> {
        self.learning_rates.iter().flat_map(|&lr| self.weight_decays.iter().map(move |&wd| (lr, wd))).collect()
    }

    fn validate(&self) -> CliResult<()> {
        if self.learning_rates.is_empty() || self.weight_decays.is_empty() {
            return Err(CliError::usage("grid is empty"));
        }
        if self.learning_rates.iter().any(|&lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(CliError::usage("learning rates must be positive"));
        }
        if self.weight_decays.iter().any(|&wd| !(wd >= 0.0 && wd.is_finite())) {
            return Err(CliError::usage("weight decays must be nonnegative"));
        }
        Ok(())
    }
}

/// Settings only some subcommands read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Target column for CSV datasets given by path.
    pub target: Option<String>,
    pub hidden: Option<Vec<usize>>,
    pub batch_size: Option<usize>,
    /// Deviations checked by `verify_theorem1`.
    pub t: Vec<f64>,
    /// Monte Carlo draws per law for `verify_theorem1`.
    pub samples: usize,
    /// Multiplier on the theoretical bounds; below 1 it is a self-test.
    pub bound_scale: f64,
    /// JSON file with `{mean, cov, out_mean, out_cov, k}`.
    pub spec: Option<PathBuf>,
    pub kinds: Vec<String>,
    pub ms: Vec<usize>,
    pub pairs: usize,
    pub points: usize,
    /// Rows written by `synth`.
    pub n: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            target: None,
            hidden: None,
            batch_size: None,
            t: vec![0.5, 1.0, 2.0],
            samples: 1_000_000,
            bound_scale: 1.0,
            spec: None,
            kinds: vec!["AN".into(), "LS".into(), "MN".into()],
            ms: vec![1, 3, 5],
            pairs: 100,
            points: 1000,
            n: 1000,
        }
    }
}

/// Everything a run depends on. Written verbatim into the manifest, so a
/// manifest can be replayed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub dataset: Option<String>,
    pub method: Option<String>,
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub grid: Grid,
    pub jobs: usize,
    pub fast: bool,
    /// Overrides the epoch count implied by `fast`.
    pub epochs: Option<usize>,
    pub out: PathBuf,
    pub data_dir: PathBuf,
    #[serde(default)]
    pub params: Params,
}

impl RunConfig {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            command,
            dataset: None,
            method: None,
            alpha: 0.05,
            seeds: vec![0],
            grid: Grid::full(),
            jobs: 1,
            fast: true,
            epochs: None,
            out: out.into(),
            data_dir: PathBuf::from("data"),
            params: Params::default(),
        }
    }

    /// Network epochs: 500 with `fast`, 5000 otherwise, unless overridden.
    pub fn train_epochs(&self) -> usize {
        self.epochs.unwrap_or(if self.fast { 500 } else { 5000 })
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::usage(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.seeds.is_empty() {
            return Err(CliError::usage("no seeds given"));
        }
        if self.jobs == 0 {
            return Err(CliError::usage("jobs must be at least 1"));
        }
        if self.epochs == Some(0) {
            return Err(CliError::usage("epochs must be positive"));
        }
        self.grid.validate()?;
        let p = &self.params;
        match self.command {
            Command::PiEval => {
                if self.dataset.is_none() {
                    return Err(CliError::usage("pi_eval needs --dataset"));
                }
                self.check_method(&["sqr", "gaussian", "all"])?;
            }
            Command::OodEval => self.check_method(&[
                "all",
                "ocs",
                "unregularized_ocs",
                "pca",
                "distance",
                "entropy",
                "largest",
                "functional",
                "geometrical",
                "random",
                "oracle",
            ])?,
            Command::VerifyTheorem1 => {
                if p.t.is_empty() {
                    return Err(CliError::usage("the t list is empty"));
                }
                if p.t.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                    return Err(CliError::usage("every t must be positive"));
                }
                if p.samples < 100_000 {
                    return Err(CliError::usage("need at least 100000 samples"));
                }
                if !(p.bound_scale > 0.0) {
                    return Err(CliError::usage("bound scale must be positive"));
                }
            }
            Command::Causal => {
                self.check_method(&["sqr", "random", "oracle"])?;
                if p.kinds.is_empty() || p.ms.is_empty() {
                    return Err(CliError::usage("need at least one kind and one m"));
                }
                if p.pairs < 20 {
                    return Err(CliError::usage("need at least 20 pairs"));
                }
            }
            Command::Synth | Command::Classify => {}
        }
        if let Some(h) = &p.hidden {
            if h.iter().any(|&w| w == 0) {
                return Err(CliError::usage("hidden widths must be positive"));
            }
        }
        if p.batch_size == Some(0) {
            return Err(CliError::usage("batch size must be positive"));
        }
        Ok(())
    }

    fn check_method(&self, allowed: &[&str]) -> CliResult<()> {
        match &self.method {
            Some(m) if !allowed.contains(&m.as_str()) => {
                Err(CliError::usage(format!("unknown method {m:?} for {}; expected one of {allowed:?}", self.command.name())))
            }
            _ => Ok(()),
        }
    }
}

/// Parses `N` (seeds `0..N`), `a..b`, or a comma list.
pub fn parse_seeds(text: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::usage(format!("cannot read seeds from {text:?}"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return if a < b { Ok((a..b).collect()) } else { Err(bad()) };
    }
    if text.contains(',') {
        return text.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse().map_err(|_| bad())).collect();
    }
    let n: u64 = text.parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok((0..n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(Grid::full().configs().len(), 15);
        let g = Grid::parse("lr=1e-3,wd=0:0.1").unwrap();
        assert_eq!(g.configs(), vec![(1e-3, 0.0), (1e-3, 0.1)]);
        assert!(Grid::parse_point("lr=1e-3").is_err());
        assert_eq!(Grid::parse_point("lr=1e-3,wd=0").unwrap().configs().len(), 1);
        assert!(Grid::parse("momentum=1").is_err());
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4..6").unwrap(), vec![4, 5]);
        assert_eq!(parse_seeds("7,2").unwrap(), vec![7, 2]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = RunConfig::new(Command::Synth, "out");
        let mut v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(serde_json::from_value::<RunConfig>(v.clone()).unwrap(), cfg);
        v["colour"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(v.clone()).is_err());
        v.as_object_mut().unwrap().remove("colour");
        v["params"]["colour"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::new(Command::VerifyTheorem1, "out");
        cfg.validate().unwrap();
        cfg.params.t.clear();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let mut cfg = RunConfig::new(Command::PiEval, "out");
        assert!(cfg.validate().is_err());
        cfg.dataset = Some("concrete".into());
        cfg.method = Some("dropout".into());
        assert!(cfg.validate().is_err());
    }
}
