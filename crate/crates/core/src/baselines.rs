//! Single-model comparison methods: conditional-Gaussian prediction
//! intervals, softmax-derived out-of-domain scores, a random score and a
//! supervised logistic oracle.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{LabeledTable, Partition, Scaler};
use crate::error::{check_dim, Error, Result};
use crate::net::{fit, AdamConfig, FitOptions, Gradients, Mlp, TrainConfig};
use crate::rng::{seeded, Rng};
use crate::sqr::{check_alpha, IntervalBatch, PredictionInterval};

/// Standard normal quantile `Φ⁻¹(p)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability {p} outside (0, 1)")));
    }
    Ok(Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p))
}

/// `μ ± z_{1−α/2}·σ`.
pub fn interval_from_moments(mean: f64, sigma: f64, alpha: f64) -> Result<PredictionInterval> {
    check_alpha(alpha)?;
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma must be nonnegative"));
    }
    let half = normal_quantile(1.0 - alpha / 2.0)? * sigma;
    Ok(PredictionInterval { lower: mean - half, upper: mean + half, alpha, repaired: false })
}

/// Network with two outputs read as `(μ, log σ²)` in standardized units.
#[derive(Clone, Debug)]
pub struct GaussianHeadNet {
    net: Mlp,
    input_scaler: Scaler,
    target_scaler: Scaler,
}

impl GaussianHeadNet {
    pub fn from_parts(net: Mlp, input_scaler: Scaler, target_scaler: Scaler) -> Result<Self> {
        check_dim(input_scaler.dim(), net.input_dim())?;
        check_dim(2, net.output_dim())?;
        Ok(GaussianHeadNet { net, input_scaler, target_scaler })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Predictive mean and standard deviation in target units for each column
    /// of a raw `d × m` batch.
    pub fn predict_batch(&self, xs: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
        check_dim(self.input_scaler.dim(), xs.nrows())?;
        let mut input = xs.clone();
        self.input_scaler.transform_columns(&mut input);
        let out = self.net.forward_batch(&input)?;
        let sd = self.target_scaler.std[0];
        Ok(out
            .column_iter()
            .map(|c| (self.target_scaler.inverse(0, c[0]), (0.5 * c[1]).exp() * sd))
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.input_scaler.dim(), x.len())?;
        Ok(self.predict_batch(&DMatrix::from_column_slice(x.len(), 1, x))?[0])
    }

    pub fn intervals(&self, xs: &DMatrix<f64>, alpha: f64) -> Result<IntervalBatch> {
        let intervals = self
            .predict_batch(xs)?
            .into_iter()
            .map(|(m, s)| interval_from_moments(m, s, alpha))
            .collect::<Result<_>>()?;
        Ok(IntervalBatch { intervals, crossings: 0 })
    }
}

/// `μ(x) ± z_{1−α/2}·σ(x)` in target units.
pub fn gaussian_interval(model: &GaussianHeadNet, x: &[f64], alpha: f64) -> Result<PredictionInterval> {
    let (m, s) = model.predict(x)?;
    interval_from_moments(m, s, alpha)
}

/// Mean Gaussian negative log-likelihood `½(s + (y − μ)²e^{−s})`, `s = log σ²`,
/// over a `d × b` batch and its parameter gradient.
pub fn gaussian_nll_objective(net: &Mlp, inputs: DMatrix<f64>, targets: &[f64]) -> Result<(f64, Gradients)> {
    let b = inputs.ncols();
    check_dim(b, targets.len())?;
    check_dim(2, net.output_dim())?;
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let trace = net.forward_trace(inputs)?;
    let out = trace.output();
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(2, b);
    for c in 0..b {
        let (mu, s) = (out[(0, c)], out[(1, c)]);
        let r = targets[c] - mu;
        let prec = (-s).exp();
        loss += 0.5 * (s + r * r * prec);
        grad[(0, c)] = -r * prec / b as f64;
        grad[(1, c)] = 0.5 * (1.0 - r * r * prec) / b as f64;
    }
    Ok((loss / b as f64, net.backward_trace(&trace, &grad)?))
}

/// Fits the conditional-Gaussian baseline on the training partition.
pub fn train_gaussian(data: &LabeledTable, cfg: &TrainConfig) -> Result<GaussianHeadNet> {
    Ok(train_gaussian_with_history(data, cfg)?.0)
}

pub fn train_gaussian_with_history(data: &LabeledTable, cfg: &TrainConfig) -> Result<(GaussianHeadNet, Vec<f64>)> {
    cfg.validate()?;
    let design = data.design(Partition::Train);
    let n = design.targets.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 training rows, have {n}")));
    }
    let mut rng = seeded(cfg.seed);
    let mut net = Mlp::new(&cfg.layer_dims(data.n_features(), 2), cfg.activation, &mut rng)?;
    let history = fit(&mut net, n, &cfg.fit_options(), &mut rng, |net: &Mlp, batch, _| {
        let targets: Vec<f64> = batch.iter().map(|&i| design.targets[i]).collect();
        gaussian_nll_objective(net, design.inputs.select_columns(batch), &targets)
    })?;
    let model = GaussianHeadNet::from_parts(net, data.feature_scaler().clone(), data.target_scaler().clone())?;
    Ok((model, history))
}

/// Mean softmax cross-entropy of a `classes × b` logit batch against integer
/// labels, with its parameter gradient.
pub fn softmax_cross_entropy_objective(net: &Mlp, inputs: DMatrix<f64>, labels: &[usize]) -> Result<(f64, Gradients)> {
    let b = inputs.ncols();
    check_dim(b, labels.len())?;
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let classes = net.output_dim();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    let trace = net.forward_trace(inputs)?;
    let out = trace.output();
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(classes, b);
    for (c, &label) in labels.iter().enumerate() {
        let p = softmax(out.column(c).as_slice());
        loss -= p[label].max(f64::MIN_POSITIVE).ln();
        for (k, pk) in p.into_iter().enumerate() {
            grad[(k, c)] = (pk - f64::from(u8::from(k == label))) / b as f64;
        }
    }
    Ok((loss / b as f64, net.backward_trace(&trace, &grad)?))
}

/// Trains a softmax classifier on the columns of a `d × n` input batch.
pub fn train_softmax_classifier(inputs: &DMatrix<f64>, labels: &[usize], classes: usize, cfg: &TrainConfig) -> Result<Mlp> {
    cfg.validate()?;
    check_dim(inputs.ncols(), labels.len())?;
    if classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    let mut rng = seeded(cfg.seed);
    let mut net = Mlp::new(&cfg.layer_dims(inputs.nrows(), classes), cfg.activation, &mut rng)?;
    fit(&mut net, labels.len(), &cfg.fit_options(), &mut rng, |net: &Mlp, batch, _| {
        let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
        softmax_cross_entropy_objective(net, inputs.select_columns(batch), &ys)
    })?;
    Ok(net)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftmaxKind {
    Entropy,
    Largest,
    Functional,
    Geometrical,
}

impl SoftmaxKind {
    pub const ALL: [SoftmaxKind; 4] =
        [SoftmaxKind::Entropy, SoftmaxKind::Largest, SoftmaxKind::Functional, SoftmaxKind::Geometrical];

    pub fn name(self) -> &'static str {
        match self {
            SoftmaxKind::Entropy => "entropy",
            SoftmaxKind::Largest => "largest",
            SoftmaxKind::Functional => "functional",
            SoftmaxKind::Geometrical => "geometrical",
        }
    }
}

/// Classifier-output score oriented so that larger means more uncertain.
///
/// With `use_logits`, `largest` and `functional` act on the tempered logits
/// instead of the probabilities. `entropy` always uses probabilities and
/// `geometrical` always uses logit margins, so the flag does not affect them.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxScorer {
    pub kind: SoftmaxKind,
    pub temperature: f64,
    pub use_logits: bool,
    /// Output-layer weights (one row per class), needed by `geometrical`.
    pub last_layer: Option<DMatrix<f64>>,
}

impl SoftmaxScorer {
    pub fn new(kind: SoftmaxKind, temperature: f64, use_logits: bool) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid("temperature must be positive"));
        }
        Ok(SoftmaxScorer { kind, temperature, use_logits, last_layer: None })
    }

    pub fn with_last_layer(mut self, weights: DMatrix<f64>) -> Self {
        self.last_layer = Some(weights);
        self
    }

    pub fn score(&self, logits: &[f64]) -> Result<f64> {
        if logits.len() < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        let z: Vec<f64> = logits.iter().map(|l| l / self.temperature).collect();
        let p = softmax(&z);
        let (i1, i2) = top_two(&z);
        Ok(match (self.kind, self.use_logits) {
            (SoftmaxKind::Entropy, _) => -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>(),
            (SoftmaxKind::Largest, false) => 1.0 - p[i1],
            (SoftmaxKind::Largest, true) => -z[i1],
            (SoftmaxKind::Functional, false) => -(p[i1] - p[i2]).abs(),
            (SoftmaxKind::Functional, true) => -(z[i1] - z[i2]).abs(),
            (SoftmaxKind::Geometrical, _) => {
                let w = self
                    .last_layer
                    .as_ref()
                    .ok_or_else(|| Error::invalid("geometrical score needs the output-layer weights"))?;
                check_dim(logits.len(), w.nrows())?;
                let norm = (w.row(i1) - w.row(i2)).norm();
                let margin = z[i1] - z[i2];
                if norm > 0.0 {
                    -margin / norm
                } else {
                    -margin
                }
            }
        })
    }

    /// Scores for every column of a `classes × m` logit matrix.
    pub fn score_batch(&self, logits: &DMatrix<f64>) -> Result<Vec<f64>> {
        logits.column_iter().map(|c| self.score(c.as_slice())).collect()
    }
}

/// Free-function form of [`SoftmaxScorer::score`].
pub fn softmax_score(scorer: &SoftmaxScorer, logits: &[f64]) -> Result<f64> {
    scorer.score(logits)
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn top_two(z: &[f64]) -> (usize, usize) {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z[b].total_cmp(&z[a]));
    (idx[0], idx[1])
}

/// A `U[0, 1]` score independent of the input.
pub fn random_score(rng: &mut Rng) -> f64 {
    rng.gen()
}

pub fn random_scores(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| random_score(rng)).collect()
}

/// Settings of the logistic oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub folds: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { folds: 5, epochs: 200, learning_rate: 1e-2, weight_decay: 1e-4, seed: 0 }
    }
}

/// Supervised ceiling: a logistic separator trained on the true in/out labels
/// (`true` = out-of-domain) of the evaluation pool. Each point is scored by a
/// model fitted on the other folds.
pub fn oracle_scores(features: &DMatrix<f64>, labels: &[bool], cfg: &OracleConfig) -> Result<Vec<f64>> {
    let (n, h) = features.shape();
    check_dim(n, labels.len())?;
    if cfg.folds < 2 || n < cfg.folds {
        return Err(Error::invalid("need at least two folds and one row per fold"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(cfg.seed));
    let mut scores = vec![0.0; n];
    for fold in 0..cfg.folds {
        let test: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % cfg.folds == fold).map(|(_, &i)| i).collect();
        let train: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % cfg.folds != fold).map(|(_, &i)| i).collect();
        let scaler = Scaler::fit(features, &train, Partition::Train)?;
        let design = |rows: &[usize]| {
            let mut x = DMatrix::from_fn(h + 1, rows.len(), |j, c| if j < h { features[(rows[c], j)] } else { 1.0 });
            for mut col in x.column_iter_mut() {
                for j in 0..h {
                    col[j] = scaler.transform(j, col[j]);
                }
            }
            x
        };
        let xtr = design(&train);
        let ytr: Vec<f64> = train.iter().map(|&i| f64::from(u8::from(labels[i]))).collect();
        let mut w = DMatrix::<f64>::zeros(1, h + 1);
        let opts = FitOptions {
            epochs: cfg.epochs,
            batch_size: 256,
            adam: AdamConfig::new(cfg.learning_rate, cfg.weight_decay),
        };
        let mut rng = seeded(cfg.seed.wrapping_add(fold as u64));
        fit(&mut w, train.len(), &opts, &mut rng, |w: &DMatrix<f64>, batch, _| {
            let x = xtr.select_columns(batch);
            let z = w * &x;
            let mut loss = 0.0;
            let mut g = DMatrix::zeros(1, batch.len());
            for (c, &i) in batch.iter().enumerate() {
                let (zc, y) = (z[(0, c)], ytr[i]);
                loss += zc.max(0.0) - zc * y + (-zc.abs()).exp().ln_1p();
                g[(0, c)] = (sigmoid(zc) - y) / batch.len() as f64;
            }
            Ok((loss / batch.len() as f64, g * x.transpose()))
        })?;
        let z = &w * design(&test);
        for (c, &i) in test.iter().enumerate() {
            scores[i] = z[(0, c)];
        }
    }
    Ok(scores)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use proptest::prelude::*;

    #[test]
    fn classifier_separates_two_blobs() {
        let mut rng = seeded(2);
        let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let x = DMatrix::from_fn(2, 200, |r, c| if r == 0 { labels[c] as f64 * 4.0 - 2.0 } else { 0.0 } + rng.gen::<f64>() - 0.5);
        let cfg = TrainConfig { learning_rate: 1e-2, epochs: 30, hidden: vec![8], ..TrainConfig::default() };
        let net = train_softmax_classifier(&x, &labels, 2, &cfg).unwrap();
        let out = net.forward_batch(&x).unwrap();
        let hits = (0..200).filter(|&c| usize::from(out[(1, c)] > out[(0, c)]) == labels[c]).count();
        assert_eq!(hits, 200);
        assert!(softmax_cross_entropy_objective(&net, x.clone(), &vec![2; 200]).is_err());
    }

    #[test]
    fn normal_quantile_values() {
        assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-5);
        assert!(normal_quantile(0.5).unwrap().abs() < 1e-12);
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn moment_intervals() {
        let iv = interval_from_moments(2.0, 0.0, 0.05).unwrap();
        assert_eq!((iv.lower, iv.upper), (2.0, 2.0));
        let a = interval_from_moments(0.0, 1.5, 0.05).unwrap();
        let b = interval_from_moments(0.0, 3.0, 0.05).unwrap();
        assert_eq!(b.width(), 2.0 * a.width());
        assert!(interval_from_moments(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn softmax_examples() {
        let ent = SoftmaxScorer::new(SoftmaxKind::Entropy, 1.0, false).unwrap();
        assert!((ent.score(&[0.0; 5]).unwrap() - 5f64.ln()).abs() < 1e-12);
        let p = [0.7f64, 0.2, 0.1];
        let logits: Vec<f64> = p.iter().map(|v| v.ln()).collect();
        assert!((ent.score(&logits).unwrap() - 0.8018185525433373).abs() < 1e-12);
        let onehot = [0.0, 1000.0, 0.0];
        assert_eq!(ent.score(&onehot).unwrap(), 0.0);
        assert_eq!(SoftmaxScorer::new(SoftmaxKind::Largest, 1.0, false).unwrap().score(&onehot).unwrap(), 0.0);
        assert_eq!(SoftmaxScorer::new(SoftmaxKind::Functional, 1.0, false).unwrap().score(&onehot).unwrap(), -1.0);
        assert!(ent.score(&[1.0]).is_err());
        assert!(SoftmaxScorer::new(SoftmaxKind::Entropy, 0.0, false).is_err());
    }

    #[test]
    fn geometrical_margin() {
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let s = SoftmaxScorer::new(SoftmaxKind::Geometrical, 1.0, true).unwrap().with_last_layer(w);
        // margin 2 between classes 0 and 1, weight difference norm √2
        assert!((s.score(&[3.0, 1.0, 0.0]).unwrap() + 2.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(SoftmaxScorer::new(SoftmaxKind::Geometrical, 1.0, true).unwrap().score(&[1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_scores_shift_invariant(l in proptest::collection::vec(-5.0f64..5.0, 2..8), c in -50.0f64..50.0, t in 0.5f64..5.0) {
            let shifted: Vec<f64> = l.iter().map(|v| v + c).collect();
            for kind in [SoftmaxKind::Entropy, SoftmaxKind::Largest, SoftmaxKind::Functional] {
                let s = SoftmaxScorer::new(kind, t, false).unwrap();
                prop_assert!((s.score(&l).unwrap() - s.score(&shifted).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nll_gradient_signs() {
        let net = Mlp::from_parts(
            vec![DMatrix::zeros(2, 1)],
            vec![nalgebra::DVector::from_vec(vec![0.0, 0.0])],
            crate::net::Activation::Relu,
        )
        .unwrap();
        let (loss, g) = gaussian_nll_objective(&net, DMatrix::from_element(1, 1, 1.0), &[2.0]).unwrap();
        assert!((loss - 2.0).abs() < 1e-12);
        assert!((g.biases[0][0] + 2.0).abs() < 1e-12);
        assert!((g.biases[0][1] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn random_is_chance() {
        let mut rng = seeded(11);
        let labels: Vec<bool> = (0..10_000).map(|i| i % 2 == 0).collect();
        let scores = random_scores(labels.len(), &mut rng);
        let auc = roc_auc(&scores, &labels).unwrap().auc;
        assert!((0.47..=0.53).contains(&auc), "{auc}");
    }

    #[test]
    fn oracle_separates_separable_data() {
        let n = 200;
        let f = DMatrix::from_fn(n, 2, |i, j| if j == 0 { (i % 2) as f64 * 4.0 - 2.0 + (i as f64 * 0.01).sin() } else { (i as f64).cos() });
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 1).collect();
        let s = oracle_scores(&f, &labels, &OracleConfig::default()).unwrap();
        assert_eq!(roc_auc(&s, &labels).unwrap().auc, 1.0);
    }
}
