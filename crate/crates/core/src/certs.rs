//! Orthonormal certificates for epistemic uncertainty.
//!
//! A certificate set is an `h × k` matrix `C` trained so that `Cᵀφ(x) ≈ 0` on
//! in-domain features `φ(x)` while a penalty `λ‖CᵀC − I‖²_F` keeps its columns
//! near orthonormal. The score `‖Cᵀφ(x)‖²` stays small near the training data
//! and grows for inputs whose features leave the training null space.
//!
//! Feature matrices are `n × h` with one example per row.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::synth::sample_gaussian;
use crate::error::{check_dim, Error, Result};
use crate::net::{fit, AdamConfig, FitOptions, Mlp, MAX_EPOCHS};
use crate::rng::{derive_seed, seeded, Rng};

/// Per-certificate loss `ℓ_c(Cᵀφ, 0)`, averaged over the `k` outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SquaredError,
    /// Absolute error, for featurizers trained with an L1-type task loss.
    TaskLoss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CertTrainConfig {
    fn default() -> Self {
        CertTrainConfig { learning_rate: 1e-3, epochs: 100, batch_size: 128, seed: 0 }
    }
}

impl CertTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.epochs == 0 || self.epochs > MAX_EPOCHS {
            return Err(Error::invalid(format!("epochs must be in 1..={MAX_EPOCHS}")));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

/// Trained certificates `C` (`h × k`).
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateSet {
    c: DMatrix<f64>,
    lambda: f64,
    loss_kind: LossKind,
}

impl CertificateSet {
    pub fn from_matrix(c: DMatrix<f64>, lambda: f64, loss_kind: LossKind) -> Result<Self> {
        if c.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::invalid("certificate matrix must be nonempty"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda must be finite and nonnegative"));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("certificate matrix has non-finite entries"));
        }
        Ok(CertificateSet { c, lambda, loss_kind })
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn h(&self) -> usize {
        self.c.nrows()
    }

    pub fn k(&self) -> usize {
        self.c.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    /// `‖CᵀC − I_k‖_F`.
    pub fn orthonormality_gap(&self) -> f64 {
        orthonormality_penalty(&self.c).sqrt()
    }

    /// Epistemic score `‖Cᵀφ‖²` for one feature vector.
    pub fn score(&self, feature: &[f64]) -> Result<f64> {
        check_dim(self.h(), feature.len())?;
        let f = DVector::from_column_slice(feature);
        Ok((self.c.transpose() * f).norm_squared())
    }

    /// Scores for every row of an `n × h` feature matrix.
    pub fn score_batch(&self, features: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_dim(self.h(), features.ncols())?;
        let proj = features * &self.c;
        Ok(proj.row_iter().map(|r| r.norm_squared()).collect())
    }

    pub fn to_document(&self) -> CertificateDocument {
        CertificateDocument {
            h: self.h(),
            k: self.k(),
            lambda: self.lambda,
            loss_kind: self.loss_kind,
            c: self.c.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn from_document(doc: CertificateDocument) -> Result<Self> {
        if doc.c.len() != doc.h || doc.c.iter().any(|r| r.len() != doc.k) {
            return Err(Error::invalid("certificate rows disagree with h × k"));
        }
        let c = DMatrix::from_fn(doc.h, doc.k, |i, j| doc.c[i][j]);
        CertificateSet::from_matrix(c, doc.lambda, doc.loss_kind)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(&self.to_document())?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CertificateSet::from_document(serde_json::from_str(&text)?)
    }
}

/// Persisted form of a [`CertificateSet`]; `c` is row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub h: usize,
    pub k: usize,
    pub lambda: f64,
    pub loss_kind: LossKind,
    pub c: Vec<Vec<f64>>,
}

/// `‖CᵀC − I‖²_F`.
pub fn orthonormality_penalty(c: &DMatrix<f64>) -> f64 {
    let mut gram = c.transpose() * c;
    for j in 0..gram.nrows() {
        gram[(j, j)] -= 1.0;
    }
    gram.norm_squared()
}

/// Random `h × k` matrix with orthonormal columns: Gaussian entries scaled by
/// `1/√h`, then QR.
pub fn random_orthonormal(h: usize, k: usize, rng: &mut Rng) -> Result<DMatrix<f64>> {
    if k == 0 || k > h {
        return Err(Error::invalid(format!("need 1 <= k <= h, got k={k}, h={h}")));
    }
    let scale = 1.0 / (h as f64).sqrt();
    let g = DMatrix::from_fn(h, k, |_, _| scale * Distribution::<f64>::sample(&StandardNormal, rng));
    Ok(g.qr().q())
}

/// Certificate objective on a batch of rows and its gradient with respect to
/// `C`:
/// `(1/(n·k)) Σᵢ ℓ(Cᵀφᵢ) + λ‖CᵀC − I‖²_F`.
pub fn certificate_objective(
    c: &DMatrix<f64>,
    features: &DMatrix<f64>,
    lambda: f64,
    loss_kind: LossKind,
) -> Result<(f64, DMatrix<f64>)> {
    check_dim(c.nrows(), features.ncols())?;
    let n = features.nrows();
    if n == 0 {
        return Err(Error::invalid("empty feature batch"));
    }
    let k = c.ncols();
    let norm = 1.0 / (n * k) as f64;
    let z = features * c;
    let (data_loss, dz) = match loss_kind {
        LossKind::SquaredError => (z.norm_squared() * norm, &z * (2.0 * norm)),
        LossKind::TaskLoss => (z.iter().map(|v| v.abs()).sum::<f64>() * norm, z.map(|v| v.signum() * norm)),
    };
    let mut grad = features.transpose() * dz;
    let mut gram = c.transpose() * c;
    for j in 0..k {
        gram[(j, j)] -= 1.0;
    }
    let penalty = gram.norm_squared();
    if lambda > 0.0 {
        grad += c * gram * (4.0 * lambda);
    }
    Ok((data_loss + lambda * penalty, grad))
}

/// Trains `k` certificates on `n × h` in-domain features.
pub fn train_certificates(
    features: &DMatrix<f64>,
    k: usize,
    lambda: f64,
    loss_kind: LossKind,
    cfg: &CertTrainConfig,
) -> Result<CertificateSet> {
    cfg.validate()?;
    let (n, h) = features.shape();
    if k == 0 || k > h {
        return Err(Error::invalid(format!("need 1 <= k <= h, got k={k}, h={h}")));
    }
    if n < k {
        return Err(Error::invalid(format!("need at least k={k} feature rows, have {n}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda must be finite and nonnegative"));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features contain non-finite values"));
    }
    let mut rng = seeded(cfg.seed);
    let mut c = random_orthonormal(h, k, &mut rng)?;
    let opts = FitOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: AdamConfig::new(cfg.learning_rate, 0.0),
    };
    fit(&mut c, n, &opts, &mut rng, |c: &DMatrix<f64>, batch, _| {
        certificate_objective(c, &features.select_rows(batch), lambda, loss_kind)
    })?;
    CertificateSet::from_matrix(c, lambda, loss_kind)
}

/// Free-function form of [`CertificateSet::score`].
pub fn epistemic_score(certs: &CertificateSet, feature: &[f64]) -> Result<f64> {
    certs.score(feature)
}

/// Featurizer `φ`: a network with its final layer removed.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    net: Mlp,
}

impl FeatureExtractor {
    /// Wraps a network of at least two layers; features are the last hidden
    /// layer's activations.
    pub fn new(net: Mlp) -> Result<Self> {
        if net.layer_dims().len() < 3 {
            return Err(Error::invalid("featurizer needs at least one hidden layer"));
        }
        Ok(FeatureExtractor { net })
    }

    pub fn feature_dim(&self) -> usize {
        self.net.feature_dim()
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// `n × h` features for the columns of a `d × n` input batch.
    pub fn extract(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.net.features_batch(inputs)?.transpose())
    }
}

/// Squared distance to the nearest training feature, or to the given
/// percentile of the distances when `percentile > 0`.
#[derive(Clone, Debug)]
pub struct DistanceScorer {
    train: DMatrix<f64>,
    train_norms: Vec<f64>,
    percentile: f64,
}

impl DistanceScorer {
    pub fn new(train_features: DMatrix<f64>, percentile: f64) -> Result<Self> {
        if train_features.nrows() == 0 {
            return Err(Error::invalid("distance scorer needs at least one training feature"));
        }
        if !(0.0..=100.0).contains(&percentile) {
            return Err(Error::invalid(format!("percentile {percentile} outside [0, 100]")));
        }
        let train_norms = train_features.row_iter().map(|r| r.norm_squared()).collect();
        Ok(DistanceScorer { train: train_features, train_norms, percentile })
    }

    pub fn score(&self, feature: &[f64]) -> Result<f64> {
        check_dim(self.train.ncols(), feature.len())?;
        let q = DMatrix::from_row_slice(1, feature.len(), feature);
        Ok(self.score_batch(&q)?[0])
    }

    /// Scores for every row of an `m × h` query matrix.
    pub fn score_batch(&self, queries: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.score_batch_at(queries, &[self.percentile])?.swap_remove(0))
    }

    /// Scores at several percentiles from one pass over the distances, one
    /// vector per percentile. Queries are processed in chunks so memory stays
    /// at `n_train × CHUNK`.
    pub fn score_batch_at(&self, queries: &DMatrix<f64>, percentiles: &[f64]) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 256;
        check_dim(self.train.ncols(), queries.ncols())?;
        if let Some(p) = percentiles.iter().find(|p| !(0.0..=100.0).contains(*p)) {
            return Err(Error::invalid(format!("percentile {p} outside [0, 100]")));
        }
        let mut out = vec![Vec::with_capacity(queries.nrows()); percentiles.len()];
        let mut d = Vec::with_capacity(self.train.nrows());
        for start in (0..queries.nrows()).step_by(CHUNK) {
            let block = queries.rows(start, CHUNK.min(queries.nrows() - start));
            let cross = &self.train * block.transpose();
            for (j, q) in block.row_iter().enumerate() {
                let qn = q.norm_squared();
                d.clear();
                d.extend(cross.column(j).iter().zip(&self.train_norms).map(|(&x, &tn)| (tn + qn - 2.0 * x).max(0.0)));
                for (scores, &p) in out.iter_mut().zip(percentiles) {
                    scores.push(if p == 0.0 { d.iter().copied().fold(f64::INFINITY, f64::min) } else { percentile_in_place(&mut d, p) });
                }
            }
        }
        Ok(out)
    }
}

/// `minᵢ ‖φᵢ − φ‖²` over the rows of `train_features`.
pub fn distance_score(train_features: &DMatrix<f64>, feature: &[f64]) -> Result<f64> {
    if train_features.nrows() == 0 {
        return Err(Error::invalid("distance score needs at least one training feature"));
    }
    check_dim(train_features.ncols(), feature.len())?;
    let f = DVector::from_column_slice(feature).transpose();
    Ok(train_features.row_iter().map(|r| (r - &f).norm_squared()).fold(f64::INFINITY, f64::min))
}

/// Projection onto the bottom-`k` principal directions of centered training
/// features.
#[derive(Clone, Debug)]
pub struct PcaScorer {
    mean: DVector<f64>,
    directions: DMatrix<f64>,
}

impl PcaScorer {
    pub fn fit(train_features: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (n, h) = train_features.shape();
        if k == 0 || k > h {
            return Err(Error::invalid(format!("need 1 <= k <= h, got k={k}, h={h}")));
        }
        if n == 0 {
            return Err(Error::invalid("PCA needs at least one training feature"));
        }
        let mean = train_features.row_mean().transpose();
        let mut centered = train_features.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.transpose() * &centered / n as f64;
        let directions = bottom_eigenvectors(cov, k);
        Ok(PcaScorer { mean, directions })
    }

    /// The `h × k` bottom principal directions.
    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn score(&self, feature: &[f64]) -> Result<f64> {
        check_dim(self.mean.len(), feature.len())?;
        let centered = DVector::from_column_slice(feature) - &self.mean;
        Ok((self.directions.transpose() * centered).norm_squared())
    }

    pub fn score_batch(&self, features: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_dim(self.mean.len(), features.ncols())?;
        let shift = self.directions.transpose() * &self.mean;
        let proj = features * &self.directions;
        Ok(proj.row_iter().map(|r| (r - shift.transpose()).norm_squared()).collect())
    }
}

/// Bottom-`k` PCA score of one feature.
pub fn pca_score(train_features: &DMatrix<f64>, k: usize, feature: &[f64]) -> Result<f64> {
    PcaScorer::fit(train_features, k)?.score(feature)
}

/// Eigenvectors of a symmetric matrix for its `k` smallest eigenvalues,
/// ordered from smallest up.
pub fn bottom_eigenvectors(sym: DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    DMatrix::from_fn(eig.eigenvectors.nrows(), k, |i, j| eig.eigenvectors[(i, order[j])])
}

fn percentile_in_place(values: &mut [f64], percentile: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = percentile / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

/// Empirical percentile of in-domain scores with linear interpolation between
/// order statistics. Use 99 for the usual abstention threshold.
pub fn ood_threshold(scores_in_domain: &[f64], percentile: f64) -> Result<f64> {
    if scores_in_domain.is_empty() {
        return Err(Error::invalid("no scores to threshold"));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::invalid(format!("percentile {percentile} outside [0, 100]")));
    }
    Ok(percentile_in_place(&mut scores_in_domain.to_vec(), percentile))
}

/// In-domain law `N(μ, VΛVᵀ)`, out-domain law `N(μ′, V′Λ′V′ᵀ)`, and the
/// number `k` of bottom eigen-directions used as certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    mean: DVector<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    out_mean: DVector<f64>,
    out_eigvecs: DMatrix<f64>,
    out_eigvals: DVector<f64>,
    k: usize,
}

const ORTHO_TOL: f64 = 1e-10;

fn check_eigensystem(vecs: &DMatrix<f64>, vals: &DVector<f64>, d: usize) -> Result<()> {
    check_dim(d, vecs.nrows())?;
    check_dim(d, vecs.ncols())?;
    check_dim(d, vals.len())?;
    if orthonormality_penalty(vecs).sqrt() > ORTHO_TOL {
        return Err(Error::invalid("eigenvector matrix is not orthogonal"));
    }
    if vals.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::invalid("covariance is not positive semidefinite"));
    }
    if vals.as_slice().windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("eigenvalues must be sorted in descending order"));
    }
    Ok(())
}

impl GaussianSpec {
    pub fn new(
        mean: DVector<f64>,
        eigvecs: DMatrix<f64>,
        eigvals: DVector<f64>,
        out_mean: DVector<f64>,
        out_eigvecs: DMatrix<f64>,
        out_eigvals: DVector<f64>,
        k: usize,
    ) -> Result<Self> {
        let d = mean.len();
        check_dim(d, out_mean.len())?;
        check_eigensystem(&eigvecs, &eigvals, d)?;
        check_eigensystem(&out_eigvecs, &out_eigvals, d)?;
        if k == 0 || k > d {
            return Err(Error::invalid(format!("need 1 <= k <= d, got k={k}, d={d}")));
        }
        Ok(GaussianSpec { mean, eigvecs, eigvals, out_mean, out_eigvecs, out_eigvals, k })
    }

    /// Builds a spec from covariance matrices by symmetric eigendecomposition.
    pub fn from_covariances(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        out_mean: DVector<f64>,
        out_cov: DMatrix<f64>,
        k: usize,
    ) -> Result<Self> {
        let (v, l) = sorted_eigen(cov)?;
        let (ov, ol) = sorted_eigen(out_cov)?;
        GaussianSpec::new(mean, v, l, out_mean, ov, ol, k)
    }

    /// Four-dimensional example: in-domain eigenvalues `(1, 0.5, 0.02, 0.01)`
    /// along the axes, certificates on the two smallest (`Γ = (0.02, 0.01)`),
    /// and an out-domain law whose large-variance directions are rotated onto
    /// the certificate axes.
    pub fn disjoint_null_space() -> GaussianSpec {
        let d = 4;
        let eigvals = DVector::from_vec(vec![1.0, 0.5, 0.02, 0.01]);
        let mut out_vecs = DMatrix::zeros(d, d);
        for (col, axis) in [2usize, 3, 0, 1].into_iter().enumerate() {
            out_vecs[(axis, col)] = 1.0;
        }
        GaussianSpec::new(
            DVector::zeros(d),
            DMatrix::identity(d, d),
            eigvals.clone(),
            DVector::zeros(d),
            out_vecs,
            eigvals,
            2,
        )
        .expect("valid construction")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn out_mean(&self) -> &DVector<f64> {
        &self.out_mean
    }

    pub fn out_eigvecs(&self) -> &DMatrix<f64> {
        &self.out_eigvecs
    }

    pub fn out_eigvals(&self) -> &DVector<f64> {
        &self.out_eigvals
    }

    /// `Γ`: the `k` smallest in-domain eigenvalues.
    pub fn gamma(&self) -> DVector<f64> {
        self.eigvals.rows(self.dim() - self.k, self.k).into_owned()
    }

    /// The bottom-`k` in-domain eigenvectors, as a `d × k` matrix.
    pub fn certificates(&self) -> DMatrix<f64> {
        self.eigvecs.columns(self.dim() - self.k, self.k).into_owned()
    }
}

fn sorted_eigen(cov: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if !cov.is_square() {
        return Err(Error::invalid("covariance must be square"));
    }
    if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
        return Err(Error::invalid("covariance must be symmetric"));
    }
    let scale = cov.amax().max(1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vals = DVector::from_fn(order.len(), |i, _| eig.eigenvalues[order[i]]);
    if vals.iter().any(|&l| l < -1e-12 * scale) {
        return Err(Error::invalid("covariance is not positive semidefinite"));
    }
    vals.apply(|l| *l = l.max(0.0));
    let vecs = DMatrix::from_fn(order.len(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vecs, vals))
}

/// Upper-tail bounds for `‖Cᵀx‖² − E‖Cᵀx‖²` at deviation `t`.
///
/// * in-domain: `exp(−t²/(2·maxⱼ Γⱼ))`;
/// * out-domain: `exp(−t²/(2·maxⱼ Λ′ⱼ‖CᵀV′ⱼ‖²))`, with `j` ranging over the
///   out-domain eigen-directions `V′ⱼ`.
///
/// The out-domain constant is written in two slightly different ways in the
/// literature (`CⱼV′ⱼ` and `CⱼC′ⱼ`); this follows the `CᵀV′ⱼ` reading.
pub fn theorem1_bounds(spec: &GaussianSpec, c: &DMatrix<f64>, t: f64) -> Result<(f64, f64)> {
    let (lin, lout) = lipschitz_constants(spec, c)?;
    if !(t > 0.0) {
        return Err(Error::invalid("t must be positive"));
    }
    Ok(((-t * t / (2.0 * lin)).exp(), (-t * t / (2.0 * lout)).exp()))
}

fn lipschitz_constants(spec: &GaussianSpec, c: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_dim(spec.dim(), c.nrows())?;
    check_dim(spec.k(), c.ncols())?;
    if orthonormality_penalty(c).sqrt() > 1e-6 {
        return Err(Error::invalid("certificate columns are not orthonormal"));
    }
    let lin = spec.gamma().max();
    let proj = c.transpose() * spec.out_eigvecs();
    let lout = proj
        .column_iter()
        .zip(spec.out_eigvals().iter())
        .map(|(col, &l)| l * col.norm_squared())
        .fold(0.0, f64::max);
    Ok((lin, lout))
}

/// One line of a tail-bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheckRow {
    pub domain: String,
    pub t: f64,
    pub empirical_freq: f64,
    pub bound: f64,
    /// Frequency does not exceed the bound.
    pub satisfied: bool,
    /// Frequency does not exceed the bound by more than 3 binomial standard
    /// errors.
    pub within_noise: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheckReport {
    pub n_samples: usize,
    pub in_mean_score: f64,
    pub out_mean_score: f64,
    pub rows: Vec<TailCheckRow>,
}

impl TailCheckReport {
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }

    /// Out-domain over in-domain mean score.
    pub fn mean_ratio(&self) -> f64 {
        self.out_mean_score / self.in_mean_score
    }
}

const TAIL_SHARD: usize = 1 << 16;

/// Monte Carlo check of [`theorem1_bounds`]: draws `n_samples` points from
/// each law, measures how often the score exceeds its empirical mean by `t`,
/// and compares with the bounds multiplied by `bound_scale` (1 for a real
/// check; a small factor turns it into a harness self-test that should fail).
pub fn empirical_tail_check(
    spec: &GaussianSpec,
    c: &DMatrix<f64>,
    ts: &[f64],
    n_samples: usize,
    seed: u64,
    bound_scale: f64,
) -> Result<TailCheckReport> {
    if ts.is_empty() {
        return Err(Error::invalid("need at least one deviation t"));
    }
    if n_samples < 100_000 {
        return Err(Error::invalid(format!("need at least 100000 samples, asked for {n_samples}")));
    }
    lipschitz_constants(spec, c)?;
    let draw = |mean: &DVector<f64>, vecs: &DMatrix<f64>, vals: &DVector<f64>, stream: u64| -> Vec<f64> {
        let shards: Vec<usize> = (0..n_samples.div_ceil(TAIL_SHARD)).collect();
        shards
            .par_iter()
            .flat_map_iter(|&s| {
                let m = TAIL_SHARD.min(n_samples - s * TAIL_SHARD);
                let mut rng = seeded(derive_seed(derive_seed(seed, stream), s as u64));
                let x = sample_gaussian(mean, vecs, vals, m, &mut rng);
                let proj = x * c;
                proj.row_iter().map(|r| r.norm_squared()).collect::<Vec<_>>()
            })
            .collect()
    };
    let inside = draw(spec.mean(), spec.eigvecs(), spec.eigvals(), 0);
    let outside = draw(spec.out_mean(), spec.out_eigvecs(), spec.out_eigvals(), 1);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (in_mean, out_mean) = (mean(&inside), mean(&outside));
    let mut rows = Vec::with_capacity(2 * ts.len());
    for &t in ts {
        let (bin, bout) = theorem1_bounds(spec, c, t)?;
        for (domain, scores, m, bound) in [("in", &inside, in_mean, bin), ("out", &outside, out_mean, bout)] {
            let hits = scores.iter().filter(|&&s| s - m >= t).count();
            let freq = hits as f64 / n_samples as f64;
            let bound = bound * bound_scale;
            let se = (bound.clamp(0.0, 1.0) * (1.0 - bound.clamp(0.0, 1.0)) / n_samples as f64).sqrt();
            rows.push(TailCheckRow {
                domain: domain.to_string(),
                t,
                empirical_freq: freq,
                bound,
                satisfied: freq <= bound,
                within_noise: freq <= bound + 3.0 * se,
            });
        }
    }
    Ok(TailCheckReport { n_samples, in_mean_score: in_mean, out_mean_score: out_mean, rows })
}
