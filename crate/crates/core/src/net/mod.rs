//! Dense feedforward networks with hand-written backpropagation.
//!
//! Batches are stored column-wise: an input batch is a `d × b` matrix whose
//! columns are samples. Hidden layers apply the configured activation; the
//! output layer is affine.

mod adam;
mod gradcheck;
mod persist;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::max_relative_error;
pub use persist::{MlpDocument, MLP_SCHEMA_VERSION};
pub use train::{fit, FitOptions, GradSlices, Parameters, TrainConfig, MAX_EPOCHS};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Multilayer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    activation: Activation,
}

/// Gradients with the same layout as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Layer outputs recorded by [`Mlp::forward_trace`], consumed by
/// [`Mlp::backward_trace`]. `activations[0]` is the input batch and the last
/// entry is the network output.
#[derive(Clone, Debug)]
pub struct Trace {
    pub activations: Vec<DMatrix<f64>>,
}

impl Trace {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("trace always holds the input")
    }

    /// Post-activation outputs of the last hidden layer.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.activations[self.activations.len() - 2]
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_dims: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        validate_dims(layer_dims)?;
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-limit..=limit)));
            biases.push(DVector::zeros(fan_out));
        }
        Ok(Mlp { layer_dims: layer_dims.to_vec(), weights, biases, activation })
    }

    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        validate_dims(layer_dims)?;
        let weights = layer_dims.windows(2).map(|p| DMatrix::zeros(p[1], p[0])).collect();
        let biases = layer_dims[1..].iter().map(|&d| DVector::zeros(d)).collect();
        Ok(Mlp { layer_dims: layer_dims.to_vec(), weights, biases, activation })
    }

    /// Assembles a network from explicit parameters, checking that shapes chain.
    pub fn from_parts(
        weights: Vec<DMatrix<f64>>,
        biases: Vec<DVector<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::invalid("need one bias vector per weight matrix"));
        }
        let mut layer_dims = vec![weights[0].ncols()];
        for (w, b) in weights.iter().zip(&biases) {
            check_dim(*layer_dims.last().unwrap(), w.ncols())?;
            check_dim(w.nrows(), b.len())?;
            layer_dims.push(w.nrows());
        }
        validate_dims(&layer_dims)?;
        Ok(Mlp { layer_dims, weights, biases, activation })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Width of the representation feeding the output layer.
    pub fn feature_dim(&self) -> usize {
        self.layer_dims[self.layer_dims.len() - 2]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Output-layer weight matrix, one row per output unit.
    pub fn last_layer_weights(&self) -> &DMatrix<f64> {
        self.weights.last().unwrap()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), input.len())?;
        let x = DMatrix::from_column_slice(input.len(), 1, input);
        Ok(self.forward_batch(&x)?.as_slice().to_vec())
    }

    /// Forward pass over a `d × b` batch; returns the `out × b` outputs.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.input_dim(), inputs.nrows())?;
        let mut a = inputs.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = self.affine(w, b, &a);
            if l + 1 < self.weights.len() {
                a.apply(|v| *v = self.activation.apply(*v));
            }
        }
        Ok(a)
    }

    /// Forward pass that keeps every layer output for backpropagation.
    pub fn forward_trace(&self, inputs: DMatrix<f64>) -> Result<Trace> {
        check_dim(self.input_dim(), inputs.nrows())?;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(inputs);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut a = self.affine(w, b, activations.last().unwrap());
            if l + 1 < self.weights.len() {
                a.apply(|v| *v = self.activation.apply(*v));
            }
            activations.push(a);
        }
        Ok(Trace { activations })
    }

    /// Last-hidden-layer representation of a batch (`h × b`).
    pub fn features_batch(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.input_dim(), inputs.nrows())?;
        let mut a = inputs.clone();
        let hidden = self.weights.len() - 1;
        for (w, b) in self.weights.iter().zip(&self.biases).take(hidden) {
            a = self.affine(w, b, &a);
            a.apply(|v| *v = self.activation.apply(*v));
        }
        Ok(a)
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// loss gradient with respect to the network output at `input`.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Gradients> {
        check_dim(self.input_dim(), input.len())?;
        check_dim(self.output_dim(), output_grad.len())?;
        let trace = self.forward_trace(DMatrix::from_column_slice(input.len(), 1, input))?;
        let g = DMatrix::from_column_slice(output_grad.len(), 1, output_grad);
        self.backward_trace(&trace, &g)
    }

    /// Backpropagates `output_grads` (`out × b`, one column per sample) through
    /// a recorded trace. Per-sample gradients are summed.
    pub fn backward_trace(&self, trace: &Trace, output_grads: &DMatrix<f64>) -> Result<Gradients> {
        Ok(self.backward_full(trace, output_grads)?.0)
    }

    /// Like [`Mlp::backward_trace`], also returning the gradient with respect
    /// to the inputs (`d × b`).
    pub fn backward_full(
        &self,
        trace: &Trace,
        output_grads: &DMatrix<f64>,
    ) -> Result<(Gradients, DMatrix<f64>)> {
        check_dim(self.weights.len() + 1, trace.activations.len())?;
        check_dim(self.output_dim(), output_grads.nrows())?;
        check_dim(trace.output().ncols(), output_grads.ncols())?;
        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        let mut delta = output_grads.clone();
        for l in (0..layers).rev() {
            let a_in = &trace.activations[l];
            gw.push(&delta * a_in.transpose());
            gb.push(delta.column_sum());
            let mut upstream = self.weights[l].transpose() * &delta;
            if l > 0 {
                upstream.zip_apply(a_in, |d, a| *d *= self.activation.derivative_from_output(a));
            }
            delta = upstream;
        }
        gw.reverse();
        gb.reverse();
        Ok((Gradients { weights: gw, biases: gb }, delta))
    }

    fn affine(&self, w: &DMatrix<f64>, b: &DVector<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = w * a;
        for mut col in z.column_iter_mut() {
            col += b;
        }
        z
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            biases: net.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl Parameters for Mlp {
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

impl GradSlices for Gradients {
    fn grad_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid("a network needs at least an input and an output width"));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[4, 8, 3], Activation::Tanh).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_linear_layer() {
        let net = Mlp::from_parts(vec![DMatrix::identity(3, 3)], vec![DVector::zeros(3)], Activation::Relu).unwrap();
        assert_eq!(net.forward(&[1.5, -2.0, 7.0]).unwrap(), vec![1.5, -2.0, 7.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = Mlp::zeros(&[2, 1], Activation::Relu).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        assert!(net.backward(&[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn two_layer_matches_scalar_recomputation() {
        let mut rng = seeded(3);
        let mut net = Mlp::new(&[3, 4, 2], Activation::Tanh, &mut rng).unwrap();
        // nonzero biases so they participate
        for b in net.biases.iter_mut() {
            b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64 - 0.05);
        }
        let x = [0.3, -1.2, 0.8];
        let got = net.forward(&x).unwrap();

        let (w0, b0, w1, b1) = (&net.weights[0], &net.biases[0], &net.weights[1], &net.biases[1]);
        let mut hidden = [0.0; 4];
        for i in 0..4 {
            let mut s = b0[i];
            for j in 0..3 {
                s += w0[(i, j)] * x[j];
            }
            hidden[i] = s.tanh();
        }
        for o in 0..2 {
            let mut s = b1[o];
            for i in 0..4 {
                s += w1[(o, i)] * hidden[i];
            }
            assert_relative_eq!(got[o], s, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = seeded(1);
        let net = Mlp::new(&[3, 5, 2], Activation::Relu, &mut rng).unwrap();
        let g = net.backward(&[1.0, 2.0, 3.0], &[0.0, 0.0]).unwrap();
        assert_eq!(g, Gradients::zeros_like(&net));
    }

    #[test]
    fn linear_squared_error_closed_form() {
        let w = DMatrix::from_row_slice(2, 3, &[0.5, -1.0, 0.25, 2.0, 0.0, -0.5]);
        let b = DVector::from_vec(vec![0.1, -0.2]);
        let net = Mlp::from_parts(vec![w.clone()], vec![b.clone()], Activation::Relu).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let y = DVector::from_vec(vec![0.5, 1.5]);
        let residual = &w * &x + &b - &y;
        let out_grad: Vec<f64> = (2.0 * &residual).iter().copied().collect();
        let g = net.backward(x.as_slice(), &out_grad).unwrap();
        let expected = 2.0 * &residual * x.transpose();
        assert_relative_eq!(g.weights[0], expected, epsilon = 1e-14);
        assert_relative_eq!(g.biases[0], 2.0 * residual, epsilon = 1e-14);
    }

    #[test]
    fn batch_gradient_is_sum_of_sample_gradients() {
        let mut rng = seeded(9);
        let net = Mlp::new(&[2, 6, 6, 1], Activation::Tanh, &mut rng).unwrap();
        let xs = DMatrix::from_column_slice(2, 3, &[0.1, 0.2, -0.4, 0.9, 1.1, -0.3]);
        let gs = DMatrix::from_row_slice(1, 3, &[0.5, -1.0, 2.0]);
        let trace = net.forward_trace(xs.clone()).unwrap();
        let batch = net.backward_trace(&trace, &gs).unwrap();
        let mut summed = Gradients::zeros_like(&net);
        for c in 0..3 {
            let g = net.backward(xs.column(c).as_slice(), &[gs[(0, c)]]).unwrap();
            for l in 0..3 {
                summed.weights[l] += &g.weights[l];
                summed.biases[l] += &g.biases[l];
            }
        }
        for l in 0..3 {
            assert_relative_eq!(batch.weights[l], summed.weights[l], epsilon = 1e-12);
            assert_relative_eq!(batch.biases[l], summed.biases[l], epsilon = 1e-12);
        }
    }

    #[test]
    fn features_match_trace() {
        let mut rng = seeded(2);
        let net = Mlp::new(&[3, 7, 5, 2], Activation::Relu, &mut rng).unwrap();
        let xs = DMatrix::from_fn(3, 4, |i, j| (i as f64 - j as f64) * 0.3);
        let trace = net.forward_trace(xs.clone()).unwrap();
        assert_eq!(&net.features_batch(&xs).unwrap(), trace.features());
        assert_eq!(net.feature_dim(), 5);
    }

    #[test]
    fn glorot_bounds_hold() {
        let mut rng = seeded(4);
        let net = Mlp::new(&[10, 20, 1], Activation::Relu, &mut rng).unwrap();
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(net.weights[0].iter().all(|w| w.abs() <= limit));
        assert!(net.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Mlp::zeros(&[3], Activation::Relu).is_err());
        assert!(Mlp::zeros(&[3, 0, 1], Activation::Relu).is_err());
        let bad = Mlp::from_parts(
            vec![DMatrix::zeros(4, 3), DMatrix::zeros(1, 5)],
            vec![DVector::zeros(4), DVector::zeros(1)],
            Activation::Relu,
        );
        assert!(bad.is_err());
    }
}
