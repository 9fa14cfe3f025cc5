//! Seeded samplers for the three generative models and their analytic
//! ground truths.
//!
//! Feature indices are 0-based throughout the library.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::asymptotics::PSD_TOLERANCE;
use crate::correlation::{CorrelationVector, Dataset, FisherVector};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Target is the plain sum of `u` standard-normal features out of `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseLinearSpec {
    k: usize,
    u: usize,
    support: Option<Vec<usize>>,
}

impl SparseLinearSpec {
    /// Random support, drawn per dataset.
    pub fn new(k: usize, u: usize) -> Result<Self> {
        check_support_size(k, u)?;
        Ok(Self { k, u, support: None })
    }

    /// Fixed support; indices must be distinct and below `k`.
    pub fn with_support(k: usize, support: Vec<usize>) -> Result<Self> {
        let u = support.len();
        check_support_size(k, u)?;
        let mut sorted = support;
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("support indices must be distinct".into()));
        }
        if let Some(&bad) = sorted.iter().find(|&&i| i >= k) {
            return Err(Error::Parameter(format!("support index {bad} out of range for k = {k}")));
        }
        Ok(Self { k, u, support: Some(sorted) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn support(&self) -> Option<&[usize]> {
        self.support.as_deref()
    }
}

fn check_support_size(k: usize, u: usize) -> Result<()> {
    if u == 0 || u >= k {
        return Err(Error::Parameter(format!("support size must satisfy 0 < u < k, got u = {u}, k = {k}")));
    }
    Ok(())
}

fn check_sample_size(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Parameter(format!("need n >= 4 so that n - 3 > 0, got {n}")));
    }
    Ok(())
}

/// Validates a covariance matrix and returns its smallest eigenvalue.
pub fn validate_covariance(s: &DMatrix<f64>) -> Result<f64> {
    if !s.is_square() || s.nrows() == 0 {
        return Err(Error::Validity(format!("covariance must be square, got {}x{}", s.nrows(), s.ncols())));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validity("covariance has non-finite entries".into()));
    }
    let scale = s.amax().max(1.0);
    let d = s.nrows();
    for i in 0..d {
        if s[(i, i)] <= 0.0 {
            return Err(Error::Validity(format!("diagonal entry {i} is not positive: {}", s[(i, i)])));
        }
        for j in (i + 1)..d {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Validity(format!(
                    "matrix is not symmetric: entry ({i},{j}) = {} but ({j},{i}) = {}",
                    s[(i, j)],
                    s[(j, i)]
                )));
            }
        }
    }
    let min = SymmetricEigen::new(s.clone()).eigenvalues.min();
    if min < PSD_TOLERANCE {
        return Err(Error::Validity(format!(
            "matrix is not positive semidefinite (smallest eigenvalue {min:.6e}); \
             a covariance or correlation matrix must be PSD"
        )));
    }
    Ok(min)
}

/// Zero-mean Gaussian over `(X_1..X_k, Y)`; the last coordinate is the target.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl GaussianSpec {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let min_eigenvalue = validate_covariance(&covariance)?;
        if covariance.nrows() < 2 {
            return Err(Error::Validity("need at least one feature plus the target".into()));
        }
        // Symmetrize before factoring so that rounding asymmetry cannot leak in.
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self { covariance, factor, min_eigenvalue })
    }

    /// Unit-variance triple `(X_1, X_2, Y)` with target correlations
    /// `rho1`, `rho2` and feature correlation `c`.
    pub fn correlation_triple(rho1: f64, rho2: f64, c: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(3, 3, &[1.0, c, rho1, c, 1.0, rho2, rho1, rho2, 1.0]))
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dimension(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn k(&self) -> usize {
        self.dimension() - 1
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

/// Prior on the Fisher scale: `phi(rho_i) ~ N(theta, sigma_q^2)` i.i.d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub sigma_q: f64,
    pub theta: f64,
    pub k: usize,
}

impl PriorSpec {
    pub fn new(sigma_q: f64, k: usize) -> Result<Self> {
        Self::with_mean(sigma_q, 0.0, k)
    }

    pub fn with_mean(sigma_q: f64, theta: f64, k: usize) -> Result<Self> {
        if !(sigma_q > 0.0 && sigma_q.is_finite()) {
            return Err(Error::Parameter(format!("sigma_q must be positive, got {sigma_q}")));
        }
        if !theta.is_finite() {
            return Err(Error::Parameter(format!("theta must be finite, got {theta}")));
        }
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        Ok(Self { sigma_q, theta, k })
    }
}

/// Uniform random `u`-subset of `0..k`, sorted ascending.
pub fn sample_support<R: Rng + ?Sized>(k: usize, u: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_support_size(k, u)?;
    let mut idx = rand::seq::index::sample(rng, k, u).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Draws an `n`-row dataset from the sparse linear model.
///
/// Each feature column has its own substream `stream.child("feature", i)`,
/// so the result is identical however columns are scheduled. The support is
/// the spec's, or drawn from `stream.child("support", 0)`.
pub fn sample_sparse_dataset(
    spec: &SparseLinearSpec,
    n: usize,
    stream: &SeedStream,
) -> Result<(Dataset, Vec<usize>)> {
    check_sample_size(n)?;
    let k = spec.k();
    let support = match spec.support() {
        Some(s) => s.to_vec(),
        None => sample_support(k, spec.u(), &mut stream.child("support", 0).rng())?,
    };

    let mut features = vec![0.0; n * k];
    features.par_chunks_mut(n).enumerate().for_each(|(i, col)| {
        let mut rng = stream.child("feature", i as u64).rng();
        for v in col.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    });

    let mut target = vec![0.0; n];
    for &s in &support {
        for (t, x) in target.iter_mut().zip(&features[s * n..(s + 1) * n]) {
            *t += x;
        }
    }
    Ok((Dataset::from_column_major(features, target, k)?, support))
}

/// Population correlations under the sparse model: `1/sqrt(u)` on the
/// support and 0 elsewhere.
pub fn true_correlations_sparse(spec: &SparseLinearSpec) -> Result<CorrelationVector> {
    let support = spec
        .support()
        .ok_or_else(|| Error::Parameter("true correlations need a fixed support".into()))?;
    let mut values = vec![0.0; spec.k()];
    let active = 1.0 / (spec.u() as f64).sqrt();
    for &s in support {
        values[s] = active;
    }
    Ok(CorrelationVector::population(values))
}

/// Draws `n` i.i.d. rows of `N(0, Sigma)` as `x = L z` with `L L^T = Sigma`
/// from the eigendecomposition (eigenvalues in `[-1e-10, 0)` truncated to 0).
pub fn sample_gaussian_dataset<R: Rng + ?Sized>(spec: &GaussianSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    check_sample_size(n)?;
    let d = spec.dimension();
    let k = d - 1;
    let mut features = vec![0.0; n * k];
    let mut target = vec![0.0; n];
    let mut z = vec![0.0; d];
    for row in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let x: f64 = (0..d).map(|j| spec.factor[(i, j)] * z[j]).sum();
            if i < k {
                features[i * n + row] = x;
            } else {
                target[row] = x;
            }
        }
    }
    Dataset::from_column_major(features, target, k)
}

/// Draws `k` Fisher-scale true correlations from the prior.
pub fn sample_prior_fisher<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> FisherVector {
    let dist = Normal::new(spec.theta, spec.sigma_q).expect("validated prior");
    FisherVector { values: (0..spec.k).map(|_| dist.sample(rng)).collect() }
}

/// Adds independent `N(0, 1/(n-3))` noise to every entry.
pub fn synthetic_correlation_noise<R: Rng + ?Sized>(
    fisher_true: &FisherVector,
    n: usize,
    rng: &mut R,
) -> Result<FisherVector> {
    check_sample_size(n)?;
    let sd = 1.0 / ((n - 3) as f64).sqrt();
    let values = fisher_true
        .values
        .iter()
        .map(|&z| {
            let e: f64 = StandardNormal.sample(rng);
            z + sd * e
        })
        .collect();
    Ok(FisherVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_size_rules() {
        let mut rng = SeedStream::root(1).rng();
        assert!(sample_support(5, 5, &mut rng).is_err());
        assert!(sample_support(5, 0, &mut rng).is_err());
        let s = sample_support(20000, 100, &mut rng).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(s.iter().all(|&i| i < 20000));
    }

    #[test]
    fn support_is_uniform_for_two_features() {
        let mut rng = SeedStream::root(7).rng();
        let hits = (0..10_000).filter(|_| sample_support(2, 1, &mut rng).unwrap()[0] == 0).count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn fixed_support_validation() {
        assert!(SparseLinearSpec::with_support(10, vec![1, 1]).is_err());
        assert!(SparseLinearSpec::with_support(10, vec![1, 10]).is_err());
        assert!(SparseLinearSpec::with_support(3, vec![0, 1, 2]).is_err());
        let s = SparseLinearSpec::with_support(10, vec![7, 2]).unwrap();
        assert_eq!(s.support(), Some(&[2, 7][..]));
    }

    #[test]
    fn single_support_target_is_the_feature() {
        let spec = SparseLinearSpec::new(30, 1).unwrap();
        let (data, support) = sample_sparse_dataset(&spec, 12, &SeedStream::root(3)).unwrap();
        assert_eq!(data.target(), data.column(support[0]));
    }

    #[test]
    fn target_is_bitwise_sum_of_support() {
        let spec = SparseLinearSpec::new(50, 7).unwrap();
        let (data, support) = sample_sparse_dataset(&spec, 20, &SeedStream::root(4)).unwrap();
        for row in 0..20 {
            let mut acc = 0.0;
            for &s in &support {
                acc += data.column(s)[row];
            }
            assert_eq!(acc.to_bits(), data.target()[row].to_bits());
        }
    }

    #[test]
    fn sparse_sampling_is_deterministic_across_pools() {
        let spec = SparseLinearSpec::new(300, 10).unwrap();
        let stream = SeedStream::root(11);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_sparse_dataset(&spec, 40, &stream)).unwrap();
        let b = four.install(|| sample_sparse_dataset(&spec, 40, &stream)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_support_shape() {
        let spec = SparseLinearSpec::new(20000, 100).unwrap();
        let (data, support) = sample_sparse_dataset(&spec, 59, &SeedStream::root(1)).unwrap();
        assert_eq!((data.n(), data.k()), (59, 20000));
        assert_eq!(support.len(), 100);
    }

    #[test]
    fn true_correlations() {
        let spec = SparseLinearSpec::with_support(10, vec![3, 5]).unwrap();
        let r = true_correlations_sparse(&spec).unwrap();
        let a = 1.0 / 2f64.sqrt();
        assert_eq!(r.values, vec![0.0, 0.0, 0.0, a, 0.0, a, 0.0, 0.0, 0.0, 0.0]);
        let one = SparseLinearSpec::with_support(4, vec![2]).unwrap();
        assert_eq!(true_correlations_sparse(&one).unwrap().values[2], 1.0);
        assert!(true_correlations_sparse(&SparseLinearSpec::new(4, 1).unwrap()).is_err());
        let hundred = SparseLinearSpec::with_support(200, (0..100).collect()).unwrap();
        assert!((true_correlations_sparse(&hundred).unwrap().values[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn non_psd_triple_is_rejected() {
        let c: f64 = 0.5;
        let r2 = ((2.0 - c * c) / 2.0).sqrt();
        let err = GaussianSpec::correlation_triple(0.0, r2, c).unwrap_err();
        assert!(matches!(err, Error::Validity(ref m) if m.contains("positive semidefinite")), "{err}");
    }

    #[test]
    fn near_psd_is_accepted() {
        // Rank-one correlation matrix: smallest eigenvalue is 0 up to rounding.
        let s = GaussianSpec::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        assert!(s.min_eigenvalue() >= PSD_TOLERANCE);
        let data = sample_gaussian_dataset(&s, 10, &mut SeedStream::root(2).rng()).unwrap();
        for r in 0..10 {
            assert!((data.column(0)[r] - data.target()[r]).abs() < 1e-6);
        }
    }

    #[test]
    fn asymmetric_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(GaussianSpec::new(m), Err(Error::Validity(ref s)) if s.contains("symmetric")));
    }

    #[test]
    fn prior_rules() {
        assert!(PriorSpec::new(0.0, 10).is_err());
        assert!(PriorSpec::new(-1.0, 10).is_err());
        let p = PriorSpec::new(1e-300, 5).unwrap();
        let v = sample_prior_fisher(&p, &mut SeedStream::root(1).rng());
        assert!(v.values.iter().all(|z| z.abs() < 1e-290));
        let p = PriorSpec::new(3.0, 1000).unwrap();
        let v = sample_prior_fisher(&p, &mut SeedStream::root(1).rng());
        assert!(v.to_correlations().iter().all(|r| r.abs() < 1.0));
    }

    #[test]
    fn noise_needs_four_samples() {
        let z = FisherVector { values: vec![0.0; 3] };
        assert!(synthetic_correlation_noise(&z, 3, &mut SeedStream::root(1).rng()).is_err());
        let big = synthetic_correlation_noise(&z, usize::MAX / 2, &mut SeedStream::root(1).rng()).unwrap();
        assert!(big.values.iter().all(|v| v.abs() < 1e-8));
    }
}
