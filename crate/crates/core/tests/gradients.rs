use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use uncq::baselines::{gaussian_nll_objective, softmax_cross_entropy_objective};
use uncq::certs::{certificate_objective, LossKind};
use uncq::net::{max_relative_error, Activation, GradSlices, Mlp};
use uncq::rng::seeded;
use uncq::sqr::pinball_objective;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn gaussian(r: usize, c: usize, rng: &mut uncq::rng::Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| Distribution::<f64>::sample(&StandardNormal, rng))
}

#[test]
fn mlp_squared_error_gradients() {
    for hidden_layers in 0..3 {
        for act in [Activation::Tanh, Activation::Relu] {
            let mut rng = seeded(100 + hidden_layers as u64);
            let mut dims = vec![3];
            dims.extend(std::iter::repeat(5).take(hidden_layers));
            dims.push(2);
            let net = Mlp::new(&dims, act, &mut rng).unwrap();
            let x = gaussian(3, 4, &mut rng);
            let y = gaussian(2, 4, &mut rng);
            let loss = |n: &Mlp| (n.forward_batch(&x).unwrap() - &y).norm_squared();
            let trace = net.forward_trace(x.clone()).unwrap();
            let g = net.backward_trace(&trace, &((trace.output() - &y) * 2.0)).unwrap();
            let err = max_relative_error(&net, &g.grad_slices(), STEP, FLOOR, loss);
            assert!(err < TOL, "layers {} {act:?}: {err}", hidden_layers + 1);
        }
    }
}

#[test]
fn pinball_objective_gradients() {
    for seed in 0..3 {
        let mut rng = seeded(200 + seed);
        let net = Mlp::new(&[3, 6, 6, 1], Activation::Tanh, &mut rng).unwrap();
        let mut x = gaussian(3, 8, &mut rng);
        let taus: Vec<f64> = (0..8).map(|_| rng.gen()).collect();
        for (c, &t) in taus.iter().enumerate() {
            x[(2, c)] = t;
        }
        let y: Vec<f64> = (0..8).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let (_, g) = pinball_objective(&net, x.clone(), &y, &taus).unwrap();
        let err = max_relative_error(&net, &g.grad_slices(), STEP, FLOOR, |n| pinball_objective(n, x.clone(), &y, &taus).unwrap().0);
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn gaussian_nll_gradients() {
    for seed in 0..3 {
        let mut rng = seeded(300 + seed);
        let net = Mlp::new(&[2, 6, 2], Activation::Tanh, &mut rng).unwrap();
        let x = gaussian(2, 8, &mut rng);
        let y: Vec<f64> = (0..8).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let (_, g) = gaussian_nll_objective(&net, x.clone(), &y).unwrap();
        let err = max_relative_error(&net, &g.grad_slices(), STEP, FLOOR, |n| gaussian_nll_objective(n, x.clone(), &y).unwrap().0);
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn certificate_objective_gradients() {
    for seed in 0..3 {
        let mut rng = seeded(400 + seed);
        let c = gaussian(5, 3, &mut rng) * 0.5;
        let f = gaussian(10, 5, &mut rng);
        for (lambda, kind) in [(1.0, LossKind::SquaredError), (10.0, LossKind::SquaredError), (1.0, LossKind::TaskLoss)] {
            let (_, g) = certificate_objective(&c, &f, lambda, kind).unwrap();
            let err = max_relative_error(&c, &[g.as_slice()], STEP, FLOOR, |c| certificate_objective(c, &f, lambda, kind).unwrap().0);
            assert!(err < TOL, "seed {seed} {kind:?} λ={lambda}: {err}");
        }
    }
}

#[test]
fn softmax_cross_entropy_gradients() {
    for seed in 0..3 {
        let mut rng = seeded(500 + seed);
        let net = Mlp::new(&[3, 6, 4], Activation::Tanh, &mut rng).unwrap();
        let x = gaussian(3, 8, &mut rng);
        let y: Vec<usize> = (0..8).map(|_| rng.gen_range(0..4)).collect();
        let (_, g) = softmax_cross_entropy_objective(&net, x.clone(), &y).unwrap();
        let err = max_relative_error(&net, &g.grad_slices(), STEP, FLOOR, |n| softmax_cross_entropy_objective(n, x.clone(), &y).unwrap().0);
        assert!(err < TOL, "seed {seed}: {err}");
    }
}
