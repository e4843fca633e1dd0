//! Synthetic cause–effect pairs.
//!
//! These are stand-in mechanisms, not a reproduction of any published
//! benchmark files: the cause is drawn from a random Gaussian mixture and
//! standardized, mechanisms are random cubics or random sigmoid-type curves,
//! and the effect follows an additive, location-scale or multiplicative noise
//! model. The label is always `X → Y`; callers that want balanced labels swap
//! the pair themselves.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::causal::Direction;
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// Pair family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalKind {
    /// additive noise, cubic mechanism
    #[serde(rename = "AN")]
    An,
    /// additive noise, sigmoid-type mechanism
    #[serde(rename = "AN-S")]
    AnS,
    /// location-scale noise, cubic mechanisms
    #[serde(rename = "LS")]
    Ls,
    /// location-scale noise, sigmoid-type mechanisms
    #[serde(rename = "LS-S")]
    LsS,
    /// multiplicative uniform noise
    #[serde(rename = "MN")]
    MnU,
}

impl CausalKind {
    pub const ALL: [CausalKind; 5] = [CausalKind::An, CausalKind::AnS, CausalKind::Ls, CausalKind::LsS, CausalKind::MnU];

    pub fn name(self) -> &'static str {
        match self {
            CausalKind::An => "AN",
            CausalKind::AnS => "AN-S",
            CausalKind::Ls => "LS",
            CausalKind::LsS => "LS-S",
            CausalKind::MnU => "MN",
        }
    }
}

impl std::str::FromStr for CausalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AN" => Ok(CausalKind::An),
            "AN-S" | "ANS" => Ok(CausalKind::AnS),
            "LS" => Ok(CausalKind::Ls),
            "LS-S" | "LSS" => Ok(CausalKind::LsS),
            "MN" | "MN-U" | "MNU" => Ok(CausalKind::MnU),
            other => Err(Error::invalid(format!("unknown pair kind {other:?}"))),
        }
    }
}

/// Scalar mechanism applied to the (standardized) cause.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Mechanism {
    Identity,
    Constant(f64),
    /// `c₁x + c₂x² + c₃x³`
    Cubic([f64; 3]),
    /// `a·b(x+c) / (1 + |b(x+c)|)`
    Sigmoid { a: f64, b: f64, c: f64 },
    /// `exp(inner(x) / 2)`, a positive mechanism
    Exp(Box<Mechanism>),
    /// `offset + 1/(1 + exp(−inner(x)))`, a positive scale
    PositiveScale { offset: f64, inner: Box<Mechanism> },
}

impl Mechanism {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Mechanism::Identity => x,
            Mechanism::Constant(c) => *c,
            Mechanism::Cubic([c1, c2, c3]) => x * (c1 + x * (c2 + x * c3)),
            Mechanism::Sigmoid { a, b, c } => {
                let u = b * (x + c);
                a * u / (1.0 + u.abs())
            }
            Mechanism::Exp(inner) => (0.5 * inner.eval(x)).exp(),
            Mechanism::PositiveScale { offset, inner } => offset + 1.0 / (1.0 + (-inner.eval(x)).exp()),
        }
    }

    fn random_cubic(rng: &mut Rng) -> Mechanism {
        Mechanism::Cubic([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
    }

    fn random_sigmoid(rng: &mut Rng) -> Mechanism {
        let a = 1.0 + rng.gen_range(0.0..2.0);
        let b = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let c = rng.gen_range(-1.0..1.0);
        Mechanism::Sigmoid { a, b, c }
    }
}

/// How noise enters the effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// `y = f(x) + σε`, `ε ~ N(0,1)`
    Additive { sigma: f64 },
    /// `y = f(x) + g(x)·σε`, `ε ~ N(0,1)`
    LocationScale { scale: Mechanism, sigma: f64 },
    /// `y = f(x)·ε`, `ε ~ U[lo, hi]`
    Multiplicative { lo: f64, hi: f64 },
}

/// Full description of a pair generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub mechanism: Mechanism,
    pub noise: NoiseModel,
    /// Mixture components of the cause as (weight, mean, sd); empty means N(0,1).
    pub cause_mixture: Vec<(f64, f64, f64)>,
    /// Standardize the cause before applying the mechanism.
    pub standardize_cause: bool,
}

impl PairSpec {
    /// Draws a random spec of the given family.
    pub fn random(kind: CausalKind, rng: &mut Rng) -> PairSpec {
        let components = rng.gen_range(1..=4);
        let cause_mixture = (0..components)
            .map(|_| (rng.gen_range(0.5..1.5), rng.gen_range(-2.0..2.0), rng.gen_range(0.3..1.0)))
            .collect();
        let noise_level = rng.gen_range(0.2..0.6);
        let (mechanism, noise) = match kind {
            CausalKind::An => (Mechanism::random_cubic(rng), NoiseModel::Additive { sigma: noise_level }),
            CausalKind::AnS => (Mechanism::random_sigmoid(rng), NoiseModel::Additive { sigma: noise_level }),
            CausalKind::Ls => (
                Mechanism::random_cubic(rng),
                NoiseModel::LocationScale {
                    scale: Mechanism::PositiveScale { offset: 0.25, inner: Box::new(Mechanism::random_cubic(rng)) },
                    sigma: noise_level,
                },
            ),
            CausalKind::LsS => (
                Mechanism::random_sigmoid(rng),
                NoiseModel::LocationScale {
                    scale: Mechanism::PositiveScale { offset: 0.25, inner: Box::new(Mechanism::random_sigmoid(rng)) },
                    sigma: noise_level,
                },
            ),
            CausalKind::MnU => (
                Mechanism::Exp(Box::new(Mechanism::random_sigmoid(rng))),
                NoiseModel::Multiplicative { lo: 0.5, hi: 1.5 },
            ),
        };
        PairSpec { mechanism, noise, cause_mixture, standardize_cause: true }
    }
}

/// A generated sample with its ground-truth direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub direction: Direction,
}

impl CausalPair {
    /// Exchanges the roles of the two variables.
    pub fn swapped(self) -> CausalPair {
        CausalPair { x: self.y, y: self.x, direction: self.direction.flipped() }
    }
}

/// Random pair of the given family. The mechanism is drawn from `seed`.
pub fn gen_causal_pair(kind: CausalKind, n: usize, seed: u64) -> Result<CausalPair> {
    if n < 100 {
        return Err(Error::invalid(format!("need at least 100 samples per pair, asked for {n}")));
    }
    let mut rng = seeded(seed);
    let spec = PairSpec::random(kind, &mut rng);
    Ok(sample_pair(&spec, n, &mut rng))
}

/// Pair from an explicit mechanism.
pub fn gen_causal_pair_with(spec: &PairSpec, n: usize, seed: u64) -> Result<CausalPair> {
    if n < 100 {
        return Err(Error::invalid(format!("need at least 100 samples per pair, asked for {n}")));
    }
    Ok(sample_pair(spec, n, &mut seeded(seed)))
}

fn sample_pair(spec: &PairSpec, n: usize, rng: &mut Rng) -> CausalPair {
    let total: f64 = spec.cause_mixture.iter().map(|c| c.0).sum();
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            if spec.cause_mixture.is_empty() {
                return StandardNormal.sample(rng);
            }
            let mut u = rng.gen_range(0.0..total);
            let mut chosen = spec.cause_mixture.last().unwrap();
            for comp in &spec.cause_mixture {
                if u < comp.0 {
                    chosen = comp;
                    break;
                }
                u -= comp.0;
            }
            Normal::new(chosen.1, chosen.2).unwrap().sample(rng)
        })
        .collect();
    if spec.standardize_cause {
        let m = x.iter().sum::<f64>() / n as f64;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt().max(f64::MIN_POSITIVE);
        x.iter_mut().for_each(|v| *v = (*v - m) / sd);
    }
    let fx: Vec<f64> = x.iter().map(|&v| spec.mechanism.eval(v)).collect();
    let f_sd = {
        let m = fx.iter().sum::<f64>() / n as f64;
        (fx.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    // noise levels are relative to the spread of the mechanism
    let unit = if f_sd > 1e-12 { f_sd } else { 1.0 };
    let y = x
        .iter()
        .zip(&fx)
        .map(|(&xi, &f)| match &spec.noise {
            NoiseModel::Additive { sigma } => f + sigma * unit * Distribution::<f64>::sample(&StandardNormal, rng),
            NoiseModel::LocationScale { scale, sigma } => {
                f + scale.eval(xi) * sigma * unit * Distribution::<f64>::sample(&StandardNormal, rng)
            }
            NoiseModel::Multiplicative { lo, hi } => f * if lo < hi { rng.gen_range(*lo..*hi) } else { *lo },
        })
        .collect();
    CausalPair { x, y, direction: Direction::XtoY }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_identity_is_exact() {
        let spec = PairSpec {
            mechanism: Mechanism::Identity,
            noise: NoiseModel::Additive { sigma: 0.0 },
            cause_mixture: vec![],
            standardize_cause: false,
        };
        let p = gen_causal_pair_with(&spec, 200, 3).unwrap();
        assert_eq!(p.x, p.y);
        assert_eq!(p.direction, Direction::XtoY);
    }

    #[test]
    fn constant_multiplicative_is_pure_noise() {
        let spec = PairSpec {
            mechanism: Mechanism::Constant(1.0),
            noise: NoiseModel::Multiplicative { lo: 0.5, hi: 1.5 },
            cause_mixture: vec![(1.0, 0.0, 1.0)],
            standardize_cause: true,
        };
        let p = gen_causal_pair_with(&spec, 5000, 1).unwrap();
        assert!(p.y.iter().all(|&v| (0.5..1.5).contains(&v)));
        // independent of the cause
        let corr = pearson(&p.x, &p.y);
        assert!(corr.abs() < 0.05, "{corr}");
    }

    #[test]
    fn additive_residuals_uncorrelated_with_cause() {
        let mut rng = seeded(12);
        let spec = PairSpec::random(CausalKind::An, &mut rng);
        let p = gen_causal_pair_with(&spec, 20_000, 5).unwrap();
        let resid: Vec<f64> = p.x.iter().zip(&p.y).map(|(&x, &y)| y - spec.mechanism.eval(x)).collect();
        assert!(pearson(&p.x, &resid).abs() < 0.03);
    }

    #[test]
    fn generator_is_pure_in_seed() {
        for kind in CausalKind::ALL {
            assert_eq!(gen_causal_pair(kind, 150, 9).unwrap(), gen_causal_pair(kind, 150, 9).unwrap());
            assert!(gen_causal_pair(kind, 150, 9).unwrap().y.iter().all(|v| v.is_finite()));
        }
        assert!(gen_causal_pair(CausalKind::An, 50, 0).is_err());
    }

    #[test]
    fn kind_names_parse() {
        for kind in CausalKind::ALL {
            assert_eq!(kind.name().parse::<CausalKind>().unwrap(), kind);
        }
        assert!("XY".parse::<CausalKind>().is_err());
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
