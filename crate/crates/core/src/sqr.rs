//! Simultaneous quantile regression.
//!
//! A single network `f(x, τ)` receives the quantile level as an extra input
//! coordinate and is trained on the pinball loss with an independent
//! `τ ~ U[0, 1]` drawn for every example of every minibatch. After training,
//! `f(x, ·)` approximates the whole conditional quantile function, and the
//! `1 − α` prediction interval is `[f(x, α/2), f(x, 1 − α/2)]`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledTable, Partition, Scaler};
use crate::error::{check_dim, Error, Result};
use crate::net::{fit, Gradients, Mlp, MlpDocument, TrainConfig};
use crate::rng::{seeded, Rng};

/// Optimizer and architecture settings for quantile networks.
pub type SqrTrainConfig = TrainConfig;

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::invalid(format!("quantile level {tau} outside [0, 1]")))
    }
}

/// Pinball loss `ℓ_τ(y, ŷ)`: `τ(y − ŷ)` when `y ≥ ŷ`, else `(1 − τ)(ŷ − y)`.
pub fn pinball_loss(tau: f64, y: f64, y_hat: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(pinball(tau, y, y_hat))
}

/// Subgradient of the pinball loss with respect to `ŷ`. At `y = ŷ` the
/// `(1 − τ)` branch is used.
pub fn pinball_grad(tau: f64, y: f64, y_hat: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(pinball_slope(tau, y, y_hat))
}

#[inline]
pub(crate) fn pinball(tau: f64, y: f64, y_hat: f64) -> f64 {
    let r = y - y_hat;
    if r >= 0.0 {
        tau * r
    } else {
        (tau - 1.0) * r
    }
}

#[inline]
pub(crate) fn pinball_slope(tau: f64, y: f64, y_hat: f64) -> f64 {
    if y - y_hat > 0.0 {
        -tau
    } else {
        1.0 - tau
    }
}

/// Anything that can report conditional quantiles for a batch of raw inputs.
pub trait QuantileModel {
    fn feature_dim(&self) -> usize;

    /// Quantile `tau` at every column of `xs` (`d × m`, raw feature units),
    /// in target units.
    fn predict_quantiles(&self, xs: &DMatrix<f64>, tau: f64) -> Result<Vec<f64>>;
}

/// `1 − α` prediction interval in target units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    /// The endpoints came out inverted and were swapped.
    #[serde(default)]
    pub repaired: bool,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    /// Builds an interval, swapping inverted endpoints.
    pub fn ordered(a: f64, b: f64, alpha: f64) -> PredictionInterval {
        if b < a {
            PredictionInterval { lower: b, upper: a, alpha, repaired: true }
        } else {
            PredictionInterval { lower: a, upper: b, alpha, repaired: false }
        }
    }
}

/// Intervals for a batch plus the number of swaps the repair performed.
#[derive(Clone, Debug)]
pub struct IntervalBatch {
    pub intervals: Vec<PredictionInterval>,
    pub crossings: usize,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("significance level {alpha} outside (0, 1)")))
    }
}

/// Intervals `[q(α/2), q(1 − α/2)]` for any quantile model.
pub fn quantile_intervals<M: QuantileModel + ?Sized>(model: &M, xs: &DMatrix<f64>, alpha: f64) -> Result<IntervalBatch> {
    check_alpha(alpha)?;
    let lo = model.predict_quantiles(xs, alpha / 2.0)?;
    let hi = model.predict_quantiles(xs, 1.0 - alpha / 2.0)?;
    let intervals: Vec<_> = lo.iter().zip(&hi).map(|(&a, &b)| PredictionInterval::ordered(a, b, alpha)).collect();
    let crossings = intervals.iter().filter(|iv| iv.repaired).count();
    Ok(IntervalBatch { intervals, crossings })
}

/// Fraction of `(x, adjacent level pair)` events where the higher level's
/// prediction falls strictly below the lower level's.
pub fn crossing_rate<M: QuantileModel + ?Sized>(model: &M, xs: &DMatrix<f64>, taus: &[f64]) -> Result<f64> {
    if taus.len() < 2 {
        return Err(Error::invalid("need at least two quantile levels"));
    }
    if taus.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("quantile levels must be strictly increasing"));
    }
    if xs.ncols() == 0 {
        return Err(Error::invalid("need at least one query point"));
    }
    let preds: Vec<Vec<f64>> = taus.iter().map(|&t| model.predict_quantiles(xs, t)).collect::<Result<_>>()?;
    let mut crossings = 0usize;
    for pair in preds.windows(2) {
        crossings += pair[0].iter().zip(&pair[1]).filter(|(lo, hi)| hi < lo).count();
    }
    Ok(crossings as f64 / ((taus.len() - 1) * xs.ncols()) as f64)
}

/// Network `f(x, τ)` with its input and target standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileNet {
    net: Mlp,
    feature_dim: usize,
    input_scaler: Scaler,
    target_scaler: Scaler,
}

impl QuantileNet {
    pub fn from_parts(net: Mlp, input_scaler: Scaler, target_scaler: Scaler) -> Result<Self> {
        let feature_dim = input_scaler.dim();
        check_dim(feature_dim + 1, net.input_dim())?;
        check_dim(1, net.output_dim())?;
        check_dim(1, target_scaler.dim())?;
        Ok(QuantileNet { net, feature_dim, input_scaler, target_scaler })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input_scaler(&self) -> &Scaler {
        &self.input_scaler
    }

    pub fn target_scaler(&self) -> &Scaler {
        &self.target_scaler
    }

    /// Quantile `tau` at a raw feature vector, in target units.
    pub fn predict_quantile(&self, x: &[f64], tau: f64) -> Result<f64> {
        check_dim(self.feature_dim, x.len())?;
        let xs = DMatrix::from_column_slice(x.len(), 1, x);
        Ok(self.predict_quantiles(&xs, tau)?[0])
    }

    /// Quantile in standardized target units (no de-standardization).
    pub fn predict_standardized(&self, x_std: &[f64], tau: f64) -> Result<f64> {
        check_tau(tau)?;
        check_dim(self.feature_dim, x_std.len())?;
        let mut input = x_std.to_vec();
        input.push(tau);
        Ok(self.net.forward(&input)?[0])
    }

    pub fn prediction_interval(&self, x: &[f64], alpha: f64) -> Result<PredictionInterval> {
        check_dim(self.feature_dim, x.len())?;
        let xs = DMatrix::from_column_slice(x.len(), 1, x);
        Ok(quantile_intervals(self, &xs, alpha)?.intervals[0])
    }

    pub fn prediction_intervals(&self, xs: &DMatrix<f64>, alpha: f64) -> Result<IntervalBatch> {
        quantile_intervals(self, xs, alpha)
    }

    pub fn to_document(&self) -> QuantileNetDocument {
        QuantileNetDocument {
            network: MlpDocument::from(&self.net),
            feature_dim: self.feature_dim,
            feature_mean: self.input_scaler.mean.clone(),
            feature_std: self.input_scaler.std.clone(),
            target_mean: self.target_scaler.mean[0],
            target_std: self.target_scaler.std[0],
        }
    }

    pub fn from_document(doc: QuantileNetDocument) -> Result<Self> {
        if doc.feature_mean.len() != doc.feature_dim || doc.feature_std.len() != doc.feature_dim {
            return Err(Error::invalid("feature statistics disagree with feature_dim"));
        }
        let input_scaler =
            Scaler { mean: doc.feature_mean, std: doc.feature_std, fitted_on: Partition::Train, rows: 0 };
        let target_scaler =
            Scaler { mean: vec![doc.target_mean], std: vec![doc.target_std], fitted_on: Partition::Train, rows: 0 };
        QuantileNet::from_parts(doc.network.try_into()?, input_scaler, target_scaler)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_document())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        QuantileNet::from_document(serde_json::from_str(&text)?)
    }
}

/// Persisted form of a [`QuantileNet`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuantileNetDocument {
    pub network: MlpDocument,
    pub feature_dim: usize,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl QuantileModel for QuantileNet {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn predict_quantiles(&self, xs: &DMatrix<f64>, tau: f64) -> Result<Vec<f64>> {
        check_tau(tau)?;
        check_dim(self.feature_dim, xs.nrows())?;
        let mut input = xs.clone().insert_row(self.feature_dim, tau);
        for mut col in input.columns_mut(0, xs.ncols()).column_iter_mut() {
            for j in 0..self.feature_dim {
                col[j] = self.input_scaler.transform(j, col[j]);
            }
        }
        let out = self.net.forward_batch(&input)?;
        Ok(out.iter().map(|&z| self.target_scaler.inverse(0, z)).collect())
    }
}

/// Mean pinball loss of a single-output network over a batch (`inputs` is
/// `d × b`, one level per column) and its parameter gradient.
pub fn pinball_objective(net: &Mlp, inputs: DMatrix<f64>, targets: &[f64], taus: &[f64]) -> Result<(f64, Gradients)> {
    let b = inputs.ncols();
    check_dim(b, targets.len())?;
    check_dim(b, taus.len())?;
    check_dim(1, net.output_dim())?;
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let trace = net.forward_trace(inputs)?;
    let out = trace.output();
    let mut loss = 0.0;
    let mut grad = DMatrix::zeros(1, b);
    for c in 0..b {
        loss += pinball(taus[c], targets[c], out[(0, c)]);
        grad[(0, c)] = pinball_slope(taus[c], targets[c], out[(0, c)]) / b as f64;
    }
    Ok((loss / b as f64, net.backward_trace(&trace, &grad)?))
}

/// Trains `f(x, τ)` on the training partition of `data`.
///
/// Features and targets are standardized with the table's training-split
/// statistics.
pub fn train_sqr(data: &LabeledTable, cfg: &SqrTrainConfig) -> Result<QuantileNet> {
    Ok(train_sqr_with_history(data, cfg)?.0)
}

/// Like [`train_sqr`], also returning the per-epoch mean pinball loss.
pub fn train_sqr_with_history(data: &LabeledTable, cfg: &SqrTrainConfig) -> Result<(QuantileNet, Vec<f64>)> {
    cfg.validate()?;
    let design = data.design(Partition::Train);
    let n = design.targets.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 training rows, have {n}")));
    }
    let d = data.n_features();
    let mut rng = seeded(cfg.seed);
    let mut net = Mlp::new(&cfg.layer_dims(d + 1, 1), cfg.activation, &mut rng)?;
    let history = fit(&mut net, n, &cfg.fit_options(), &mut rng, |net: &Mlp, batch, rng: &mut Rng| {
        let b = batch.len();
        let mut input = DMatrix::zeros(d + 1, b);
        let mut taus = Vec::with_capacity(b);
        for (c, &i) in batch.iter().enumerate() {
            input.view_mut((0, c), (d, 1)).copy_from(&design.inputs.column(i));
            let tau: f64 = rng.gen();
            input[(d, c)] = tau;
            taus.push(tau);
        }
        let targets: Vec<f64> = batch.iter().map(|&i| design.targets[i]).collect();
        pinball_objective(net, input, &targets, &taus)
    })?;
    let model = QuantileNet::from_parts(net, data.feature_scaler().clone(), data.target_scaler().clone())?;
    Ok((model, history))
}

/// Network trained for one fixed quantile level (input is `x` only).
#[derive(Clone, Debug)]
pub struct FixedQuantileNet {
    pub tau: f64,
    net: Mlp,
    input_scaler: Scaler,
    target_scaler: Scaler,
}

impl FixedQuantileNet {
    pub fn predict(&self, xs: &DMatrix<f64>) -> Result<Vec<f64>> {
        let mut input = xs.clone();
        self.input_scaler.transform_columns(&mut input);
        let out = self.net.forward_batch(&input)?;
        Ok(out.iter().map(|&z| self.target_scaler.inverse(0, z)).collect())
    }
}

/// Trains a conventional single-level quantile regressor.
pub fn train_fixed_quantile(data: &LabeledTable, tau: f64, cfg: &TrainConfig) -> Result<FixedQuantileNet> {
    check_tau(tau)?;
    cfg.validate()?;
    let design = data.design(Partition::Train);
    let n = design.targets.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 training rows, have {n}")));
    }
    let d = data.n_features();
    let mut rng = seeded(cfg.seed);
    let mut net = Mlp::new(&cfg.layer_dims(d, 1), cfg.activation, &mut rng)?;
    fit(&mut net, n, &cfg.fit_options(), &mut rng, |net: &Mlp, batch, _| {
        let input = design.inputs.select_columns(batch);
        let targets: Vec<f64> = batch.iter().map(|&i| design.targets[i]).collect();
        pinball_objective(net, input, &targets, &vec![tau; batch.len()])
    })?;
    Ok(FixedQuantileNet {
        tau,
        net,
        input_scaler: data.feature_scaler().clone(),
        target_scaler: data.target_scaler().clone(),
    })
}

/// Independently trained per-level networks, one per quantile level.
#[derive(Clone, Debug)]
pub struct QuantileEnsemble {
    pub members: Vec<FixedQuantileNet>,
}

impl QuantileEnsemble {
    pub fn train(data: &LabeledTable, taus: &[f64], cfg: &TrainConfig) -> Result<Self> {
        let members = taus.iter().map(|&t| train_fixed_quantile(data, t, cfg)).collect::<Result<_>>()?;
        Ok(QuantileEnsemble { members })
    }
}

impl QuantileModel for QuantileEnsemble {
    fn feature_dim(&self) -> usize {
        self.members.first().map_or(0, |m| m.input_scaler.dim())
    }

    fn predict_quantiles(&self, xs: &DMatrix<f64>, tau: f64) -> Result<Vec<f64>> {
        let member = self
            .members
            .iter()
            .find(|m| (m.tau - tau).abs() < 1e-12)
            .ok_or_else(|| Error::invalid(format!("no member trained for level {tau}")))?;
        member.predict(xs)
    }
}

/// Binary decision from a quantile network trained on 0/1 targets: the score
/// is the predicted median and the label is `score > ½`.
pub fn classify_binary(model: &QuantileNet, x: &[f64]) -> Result<(u8, f64)> {
    let score = model.predict_quantile(x, 0.5)?;
    Ok((u8::from(score > 0.5), score))
}

/// Batch form of [`classify_binary`] over columns of `xs`.
pub fn classify_binary_batch(model: &QuantileNet, xs: &DMatrix<f64>) -> Result<Vec<(u8, f64)>> {
    Ok(model.predict_quantiles(xs, 0.5)?.into_iter().map(|s| (u8::from(s > 0.5), s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;
    use proptest::prelude::*;

    #[test]
    fn pinball_examples() {
        assert!((pinball_loss(0.9, 1.0, 0.0).unwrap() - 0.9).abs() < 1e-15);
        assert!((pinball_loss(0.3, 0.0, 1.0).unwrap() - 0.7).abs() < 1e-15);
        assert!((pinball_loss(0.5, 2.0, 5.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(pinball_loss(1.1, 0.0, 0.0).is_err());
        assert!(pinball_loss(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn pinball_grad_examples() {
        assert_eq!(pinball_grad(0.9, 1.0, 0.0).unwrap(), -0.9);
        assert!((pinball_grad(0.3, 0.0, 1.0).unwrap() - 0.7).abs() < 1e-15);
        // tie-break
        assert!((pinball_grad(0.3, 2.0, 2.0).unwrap() - 0.7).abs() < 1e-15);
        assert!(pinball_grad(2.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn pinball_grad_matches_finite_difference(tau in 0.0f64..=1.0, y in -5.0f64..5.0, y_hat in -5.0f64..5.0) {
            prop_assume!((y - y_hat).abs() > 1e-3);
            let h = 1e-6;
            let fd = (pinball(tau, y, y_hat + h) - pinball(tau, y, y_hat - h)) / (2.0 * h);
            prop_assert!((fd - pinball_grad(tau, y, y_hat).unwrap()).abs() < 1e-6);
        }

        #[test]
        fn pinball_nonnegative_and_zero_only_at_target(tau in 0.01f64..0.99, y in -5.0f64..5.0, y_hat in -5.0f64..5.0) {
            let l = pinball_loss(tau, y, y_hat).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, y == y_hat);
        }
    }

    struct Affine {
        slope_tau: f64,
    }

    impl QuantileModel for Affine {
        fn feature_dim(&self) -> usize {
            1
        }
        fn predict_quantiles(&self, xs: &DMatrix<f64>, tau: f64) -> Result<Vec<f64>> {
            Ok(xs.iter().map(|x| x.sin() + self.slope_tau * tau).collect())
        }
    }

    #[test]
    fn crossing_rate_extremes() {
        let xs = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, -2.0, 3.0]);
        let taus = [0.1, 0.3, 0.5, 0.9];
        assert_eq!(crossing_rate(&Affine { slope_tau: 1.0 }, &xs, &taus).unwrap(), 0.0);
        assert_eq!(crossing_rate(&Affine { slope_tau: -1.0 }, &xs, &taus).unwrap(), 1.0);
        assert!(crossing_rate(&Affine { slope_tau: 1.0 }, &xs, &[0.5]).is_err());
        assert!(crossing_rate(&Affine { slope_tau: 1.0 }, &xs, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn intervals_repair_inversions() {
        let xs = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        let batch = quantile_intervals(&Affine { slope_tau: -1.0 }, &xs, 0.1).unwrap();
        assert_eq!(batch.crossings, 3);
        assert!(batch.intervals.iter().all(|iv| iv.upper >= iv.lower && iv.repaired));
        // no widening: width equals |u_a|
        assert!((batch.intervals[0].width() - 0.9).abs() < 1e-12);
        assert!(quantile_intervals(&Affine { slope_tau: 1.0 }, &xs, 0.0).is_err());
        assert!(quantile_intervals(&Affine { slope_tau: 1.0 }, &xs, 1.0).is_err());
    }

    fn tiny_model() -> QuantileNet {
        let mut rng = seeded(1);
        let net = Mlp::new(&[3, 5, 1], Activation::Tanh, &mut rng).unwrap();
        let input = Scaler { mean: vec![1.0, -1.0], std: vec![2.0, 0.5], fitted_on: Partition::Train, rows: 10 };
        let target = Scaler { mean: vec![10.0], std: vec![3.0], fitted_on: Partition::Train, rows: 10 };
        QuantileNet::from_parts(net, input, target).unwrap()
    }

    #[test]
    fn prediction_is_destandardized_and_deterministic() {
        let m = tiny_model();
        let x = [2.0, 0.0];
        let z = m.predict_standardized(&[(2.0 - 1.0) / 2.0, (0.0 + 1.0) / 0.5], 0.3).unwrap();
        let y = m.predict_quantile(&x, 0.3).unwrap();
        assert!((y - (z * 3.0 + 10.0)).abs() < 1e-12);
        assert_eq!(y, m.predict_quantile(&x, 0.3).unwrap());
        assert!(m.predict_quantile(&x, 1.5).is_err());
        assert!(m.predict_quantile(&[1.0], 0.5).is_err());
    }

    #[test]
    fn alpha_near_one_gives_zero_width() {
        let m = tiny_model();
        let iv = m.prediction_interval(&[0.3, 0.4], 1.0 - 1e-12).unwrap();
        assert!(iv.width().abs() < 1e-9);
    }

    #[test]
    fn document_round_trip() {
        let m = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.json");
        m.save(&p).unwrap();
        let back = QuantileNet::load(&p).unwrap();
        assert_eq!(back.predict_quantile(&[0.1, 0.2], 0.7).unwrap(), m.predict_quantile(&[0.1, 0.2], 0.7).unwrap());
    }

    #[test]
    fn training_needs_two_rows() {
        let t = LabeledTable::from_matrix(DMatrix::from_element(1, 1, 1.0), vec![1.0]).unwrap();
        assert!(train_sqr(&t, &TrainConfig::default()).is_err());
    }

    #[test]
    fn all_zero_targets_classify_as_zero() {
        let x = DMatrix::from_fn(60, 2, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let t = LabeledTable::from_matrix(x.clone(), vec![0.0; 60]).unwrap();
        let cfg = TrainConfig { epochs: 300, learning_rate: 1e-2, hidden: vec![8], ..Default::default() };
        let m = train_sqr(&t, &cfg).unwrap();
        for i in 0..60 {
            let (label, _) = classify_binary(&m, &t.raw_row(i)).unwrap();
            assert_eq!(label, 0);
        }
    }
}
