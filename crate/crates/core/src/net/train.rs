use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Activation, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Upper bound accepted for `epochs`.
pub const MAX_EPOCHS: usize = 100_000;

/// Anything Adam can update: a list of flat parameter tensors.
pub trait Parameters {
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;
}

/// Gradients laid out like the matching [`Parameters`].
pub trait GradSlices {
    fn grad_slices(&self) -> Vec<&[f64]>;
}

impl Parameters for DMatrix<f64> {
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

impl GradSlices for DMatrix<f64> {
    fn grad_slices(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }
}

/// Optimization and architecture settings shared by every network trainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 0.0,
            epochs: 500,
            batch_size: 64,
            seed: 0,
            hidden: default_hidden(),
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be nonnegative"));
        }
        if self.epochs == 0 || self.epochs > MAX_EPOCHS {
            return Err(Error::invalid(format!("epochs must be in 1..={MAX_EPOCHS}")));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig::new(self.learning_rate, self.weight_decay)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { epochs: self.epochs, batch_size: self.batch_size, adam: self.adam() }
    }

    /// `input → hidden… → output` widths.
    pub fn layer_dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(&self.hidden);
        dims.push(output);
        dims
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

/// Minibatch Adam over `n_rows` examples.
///
/// Each epoch shuffles the row indices and hands consecutive chunks to
/// `batch_step`, which returns the batch's mean loss and the gradient of that
/// mean loss. Returns the per-epoch mean loss. A non-finite loss or gradient
/// aborts with [`Error::TrainingDiverged`] carrying the (zero-based) epoch.
pub fn fit<P, G, F>(
    model: &mut P,
    n_rows: usize,
    opts: &FitOptions,
    rng: &mut Rng,
    mut batch_step: F,
) -> Result<Vec<f64>>
where
    P: Parameters,
    G: GradSlices,
    F: FnMut(&P, &[usize], &mut Rng) -> Result<(f64, G)>,
{
    if n_rows == 0 {
        return Err(Error::invalid("cannot train on zero rows"));
    }
    let mut adam = AdamState::new(opts.adam.clone())?;
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size.max(1)) {
            let (loss, grads) = batch_step(model, batch, rng)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, reason: format!("loss became {loss}") });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut model.param_slices_mut(), &grads.grad_slices()).map_err(|e| match e {
                Error::TrainingDiverged { reason, .. } => Error::TrainingDiverged { epoch, reason },
                other => other,
            })?;
        }
        history.push(total / n_rows as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Mlp;
    use crate::rng::seeded;

    fn toy_fit(seed: u64) -> Mlp {
        let mut rng = seeded(seed);
        let mut net = Mlp::new(&[1, 8, 1], Activation::Tanh, &mut rng).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 20.0 - 1.0).collect();
        let opts = FitOptions { epochs: 30, batch_size: 8, adam: AdamConfig::new(1e-2, 0.0) };
        fit(&mut net, xs.len(), &opts, &mut rng, |net: &Mlp, idx, _| {
            let x = DMatrix::from_iterator(1, idx.len(), idx.iter().map(|&i| xs[i]));
            let trace = net.forward_trace(x.clone())?;
            let r = trace.output() - x.map(|v| v * v);
            let loss = r.norm_squared() / idx.len() as f64;
            let g = net.backward_trace(&trace, &(r * (2.0 / idx.len() as f64)))?;
            Ok((loss, g))
        })
        .unwrap();
        net
    }

    #[test]
    fn fixed_seed_gives_identical_parameters() {
        assert_eq!(toy_fit(5), toy_fit(5));
        assert_ne!(toy_fit(5), toy_fit(6));
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut w = DMatrix::from_element(1, 1, 1.0);
        let opts = FitOptions { epochs: 5, batch_size: 2, adam: AdamConfig::default() };
        let mut calls = 0;
        let err = fit(&mut w, 4, &opts, &mut seeded(0), |_: &DMatrix<f64>, _, _| {
            calls += 1;
            let loss = if calls > 5 { f64::INFINITY } else { 1.0 };
            Ok((loss, DMatrix::from_element(1, 1, 0.1)))
        })
        .unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { epoch: 2, .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { epochs: MAX_EPOCHS + 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(TrainConfig::default().layer_dims(3, 1), vec![3, 64, 64, 1]);
    }
}
