//! Bivariate causal direction from quantile regression.
//!
//! Both variables are standardized, a quantile network is fitted in each
//! direction on the same 80% of the points, and the mean held-out pinball loss
//! over `m` quantile levels is compared. The direction with the lower pooled
//! loss is taken as causal; exact ties resolve to `YtoX`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::causal_pairs::{gen_causal_pair, CausalKind, CausalPair};
use crate::data::{LabeledTable, Split};
use crate::error::{Error, Result};
use crate::net::{Activation, TrainConfig};
use crate::rng::{derive_seed, seeded};
use crate::sqr::{pinball, train_sqr, QuantileModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    XtoY,
    YtoX,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::XtoY => Direction::YtoX,
            Direction::YtoX => Direction::XtoY,
        }
    }
}

/// Relative gap below which a verdict is flagged as low confidence.
pub const LOW_CONFIDENCE_GAP: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalVerdict {
    /// Pooled held-out pinball loss of the `x → y` model.
    pub score_xy: f64,
    pub score_yx: f64,
    pub direction: Direction,
    pub m: usize,
    /// The two scores were exactly equal.
    pub tie: bool,
    /// `|score_xy − score_yx|` is at most [`LOW_CONFIDENCE_GAP`] times the
    /// larger score.
    pub low_confidence: bool,
}

impl CausalVerdict {
    fn from_scores(score_xy: f64, score_yx: f64, m: usize) -> CausalVerdict {
        let direction = if score_xy < score_yx { Direction::XtoY } else { Direction::YtoX };
        let tie = score_xy == score_yx;
        let low_confidence = (score_xy - score_yx).abs() <= LOW_CONFIDENCE_GAP * score_xy.max(score_yx);
        CausalVerdict { score_xy, score_yx, direction, m, tie, low_confidence }
    }
}

/// Quantile levels pooled for `m ∈ {1, 3, 5}`.
pub fn pooled_levels(m: usize) -> Result<&'static [f64]> {
    match m {
        1 => Ok(&[0.5]),
        3 => Ok(&[0.25, 0.5, 0.75]),
        5 => Ok(&[0.1, 0.3, 0.5, 0.7, 0.9]),
        _ => Err(Error::invalid(format!("m must be 1, 3 or 5, got {m}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalConfig {
    pub train: TrainConfig,
    /// Fraction of points held out for scoring.
    pub holdout_fraction: f64,
}

impl Default for CausalConfig {
    fn default() -> Self {
        CausalConfig {
            train: TrainConfig {
                learning_rate: 1e-2,
                weight_decay: 0.0,
                epochs: 100,
                batch_size: 64,
                seed: 0,
                hidden: vec![32, 32],
                activation: Activation::Relu,
            },
            holdout_fraction: 0.2,
        }
    }
}

fn standardize(v: &[f64], name: &str) -> Result<Vec<f64>> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Undecided(format!("variable {name} is constant or non-finite")));
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|a| (a - mean) / sd).collect())
}

/// Held-out pinball loss of a `cause → effect` model at each level.
fn directional_losses(cause: &[f64], effect: &[f64], split: &Split, levels: &[f64], cfg: &CausalConfig) -> Result<Vec<f64>> {
    let n = cause.len();
    let table = LabeledTable::from_matrix(DMatrix::from_column_slice(n, 1, cause), effect.to_vec())?
        .with_split(split.clone())?;
    let model = train_sqr(&table, &cfg.train)?;
    let xs = table.raw_columns(&split.test);
    let ys = table.raw_targets(&split.test);
    levels
        .iter()
        .map(|&tau| {
            let preds = model.predict_quantiles(&xs, tau)?;
            Ok(preds.iter().zip(&ys).map(|(&p, &y)| pinball(tau, y, p)).sum::<f64>() / ys.len() as f64)
        })
        .collect()
}

/// Verdicts for several `m` from one pair of trained models.
pub fn causal_scores(x: &[f64], y: &[f64], ms: &[usize], cfg: &CausalConfig) -> Result<Vec<CausalVerdict>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("x has {} values, y has {}", x.len(), y.len())));
    }
    if x.len() < 100 {
        return Err(Error::invalid(format!("need at least 100 points, have {}", x.len())));
    }
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) {
        return Err(Error::invalid("holdout_fraction must be in (0, 1)"));
    }
    let grids: Vec<&[f64]> = ms.iter().map(|&m| pooled_levels(m)).collect::<Result<_>>()?;
    let mut levels: Vec<f64> = grids.iter().flat_map(|g| g.iter().copied()).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let xs = standardize(x, "x")?;
    let ys = standardize(y, "y")?;
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(derive_seed(cfg.train.seed, 0x5eed)));
    let n_test = ((n as f64) * cfg.holdout_fraction).round().max(1.0) as usize;
    let split = Split { train: order[n_test..].to_vec(), val: Vec::new(), test: order[..n_test].to_vec(), seed: cfg.train.seed };

    // Same seed in both directions, so symmetric inputs give identical models.
    let lxy = directional_losses(&xs, &ys, &split, &levels, cfg)?;
    let lyx = directional_losses(&ys, &xs, &split, &levels, cfg)?;
    let pooled = |losses: &[f64], grid: &[f64]| {
        grid.iter().map(|t| losses[levels.iter().position(|l| l == t).unwrap()]).sum::<f64>() / grid.len() as f64
    };
    Ok(ms
        .iter()
        .zip(&grids)
        .map(|(&m, grid)| CausalVerdict::from_scores(pooled(&lxy, grid), pooled(&lyx, grid), m))
        .collect())
}

/// Direction verdict from pooled held-out pinball losses at `m` levels.
pub fn causal_score(x: &[f64], y: &[f64], m: usize, cfg: &CausalConfig) -> Result<CausalVerdict> {
    Ok(causal_scores(x, y, &[m], cfg)?.remove(0))
}

/// Anything that decides a direction for a pair, for several `m` at once.
pub trait DirectionScorer: Sync {
    fn decide(&self, pair: &CausalPair, ms: &[usize], seed: u64) -> Result<Vec<Direction>>;
}

/// The quantile-regression scorer.
pub struct SqrScorer(pub CausalConfig);

impl DirectionScorer for SqrScorer {
    fn decide(&self, pair: &CausalPair, ms: &[usize], seed: u64) -> Result<Vec<Direction>> {
        let mut cfg = self.0.clone();
        cfg.train.seed = seed;
        Ok(causal_scores(&pair.x, &pair.y, ms, &cfg)?.into_iter().map(|v| v.direction).collect())
    }
}

/// Coin flip, ignoring the data.
pub struct RandomScorer;

impl DirectionScorer for RandomScorer {
    fn decide(&self, _: &CausalPair, ms: &[usize], seed: u64) -> Result<Vec<Direction>> {
        let mut rng = seeded(seed);
        Ok(ms.iter().map(|_| if rng.gen() { Direction::XtoY } else { Direction::YtoX }).collect())
    }
}

/// Returns the ground truth.
pub struct OracleScorer;

impl DirectionScorer for OracleScorer {
    fn decide(&self, pair: &CausalPair, ms: &[usize], _: u64) -> Result<Vec<Direction>> {
        Ok(vec![pair.direction; ms.len()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub truth: Direction,
    pub verdict: Direction,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub kind: CausalKind,
    pub m: usize,
    pub n_pairs: usize,
    pub accuracy: f64,
    pub verdicts: Vec<PairOutcome>,
}

/// Scores `n_pairs` generated pairs of `kind` (each of `n_samples` points,
/// presented in a random orientation) for every `m` in `ms`.
pub fn benchmark_with<S: DirectionScorer>(
    scorer: &S,
    kind: CausalKind,
    n_pairs: usize,
    n_samples: usize,
    ms: &[usize],
    seed: u64,
) -> Result<Vec<BenchmarkReport>> {
    if n_pairs < 20 {
        return Err(Error::invalid(format!("need at least 20 pairs, asked for {n_pairs}")));
    }
    let outcomes: Vec<Vec<PairOutcome>> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let pair_seed = derive_seed(seed, i);
            let mut pair = gen_causal_pair(kind, n_samples, pair_seed)?;
            if seeded(derive_seed(pair_seed, 1)).gen::<bool>() {
                pair = pair.swapped();
            }
            let verdicts = scorer.decide(&pair, ms, derive_seed(pair_seed, 2))?;
            Ok(verdicts
                .into_iter()
                .map(|v| PairOutcome { truth: pair.direction, verdict: v, correct: v == pair.direction })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(ms
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let verdicts: Vec<PairOutcome> = outcomes.iter().map(|o| o[j].clone()).collect();
            let accuracy = verdicts.iter().filter(|o| o.correct).count() as f64 / n_pairs as f64;
            BenchmarkReport { kind, m, n_pairs, accuracy, verdicts }
        })
        .collect())
}

/// Accuracy report of the quantile-regression scorer on generated pairs.
pub fn causal_benchmark(
    kind: CausalKind,
    n_pairs: usize,
    m: usize,
    seed: u64,
    n_samples: usize,
    cfg: &CausalConfig,
) -> Result<BenchmarkReport> {
    pooled_levels(m)?;
    Ok(benchmark_with(&SqrScorer(cfg.clone()), kind, n_pairs, n_samples, &[m], seed)?.remove(0))
}
