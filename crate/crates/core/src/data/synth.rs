use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::LabeledTable;
use crate::certs::GaussianSpec;
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// Input dimension of the sinusoid generator.
pub const SINUSOID_DIM: usize = 10;

/// Noise level of the sinusoid generator, read as a variance.
pub const SINUSOID_NOISE_VARIANCE: f64 = 1.0 / 3.0;

/// True conditional median of the sinusoid generator.
pub fn sinusoid_median(x: &[f64]) -> f64 {
    (10.0 * x[0]).cos()
}

/// `x ~ N(0, I₁₀)`, `y = cos(10·x₁) + ε`, `ε ~ N(0, 1/3)`.
pub fn gen_sinusoid(n: usize, seed: u64) -> LabeledTable {
    gen_sinusoid_with(n, seed, SINUSOID_NOISE_VARIANCE)
}

pub fn gen_sinusoid_with(n: usize, seed: u64, noise_variance: f64) -> LabeledTable {
    let mut rng = seeded(seed);
    let sd = noise_variance.max(0.0).sqrt();
    let mut features = DMatrix::zeros(n, SINUSOID_DIM);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..SINUSOID_DIM {
            features[(i, j)] = Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        targets.push((10.0 * features[(i, 0)]).cos() + sd * eps);
    }
    LabeledTable::from_matrix(features, targets).expect("generated values are finite")
}

/// `n` draws from each of the in-domain `N(μ, Σ)` and out-domain `N(μ′, Σ′)`
/// laws of `spec`, as `n × d` matrices. Draws use `x = μ + V·(√Λ ⊙ z)`.
pub fn gen_gaussian_pair(spec: &GaussianSpec, n: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if spec.eigvals().iter().chain(spec.out_eigvals().iter()).any(|&l| l < 0.0) {
        return Err(Error::invalid("covariance is not positive semidefinite"));
    }
    let mut rng = seeded(seed);
    let inside = sample_gaussian(spec.mean(), spec.eigvecs(), spec.eigvals(), n, &mut rng);
    let outside = sample_gaussian(spec.out_mean(), spec.out_eigvecs(), spec.out_eigvals(), n, &mut rng);
    Ok((inside, outside))
}

pub(crate) fn sample_gaussian(
    mean: &DVector<f64>,
    eigvecs: &DMatrix<f64>,
    eigvals: &DVector<f64>,
    n: usize,
    rng: &mut Rng,
) -> DMatrix<f64> {
    let d = mean.len();
    let scale = eigvals.map(f64::sqrt);
    // columns are draws; transposed at the end
    let z = DMatrix::from_fn(d, n, |i, _| scale[i] * Distribution::<f64>::sample(&StandardNormal, rng));
    let mut x = eigvecs * z;
    for mut col in x.column_iter_mut() {
        col += mean;
    }
    x.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_noise_variance() {
        let t = gen_sinusoid(100_000, 1);
        let resid: Vec<f64> = (0..t.n_rows()).map(|i| t.targets[i] - sinusoid_median(&t.raw_row(i))).collect();
        let m = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((var - 1.0 / 3.0).abs() < 0.1 / 3.0, "{var}");
    }

    #[test]
    fn sinusoid_range_and_determinism() {
        let t = gen_sinusoid(1000, 2);
        let bound = 1.0 + 5.0 * (1.0f64 / 3.0).sqrt();
        assert!(t.targets.iter().all(|y| y.abs() <= bound));
        let u = gen_sinusoid(1000, 2);
        assert_eq!(t.features, u.features);
        assert_eq!(t.targets, u.targets);
        assert_eq!(t.n_features(), 10);
    }
}
