use nalgebra::{DMatrix, DVector};

use crate::correlation::fisher_derivative;
use crate::error::{Error, Result};
use crate::models::GaussianSpec;

/// Largest feature count handled by the dense (3k+2)-dimensional pipeline.
pub const MAX_DENSE_FEATURES: usize = 64;

#[derive(Clone, Copy)]
enum Term {
    Linear(usize),
    Product(usize, usize),
}

/// `Z = (X_1..X_k, Y, X_1^2..X_k^2, Y^2, X_1 Y..X_k Y)`, with `Y` at index k.
fn moment_terms(k: usize) -> Vec<Term> {
    let y = k;
    let mut terms = Vec::with_capacity(3 * k + 2);
    terms.extend((0..=k).map(Term::Linear));
    terms.extend((0..=k).map(|i| Term::Product(i, i)));
    terms.extend((0..k).map(|i| Term::Product(i, y)));
    terms
}

/// Covariance matrix of `Z` under a zero-mean Gaussian with covariance `s`.
///
/// Third moments vanish; products pair up by Wick's rule
/// `Cov(AB, CD) = s_AC s_BD + s_AD s_BC`.
pub fn moment_covariance(s: &DMatrix<f64>) -> DMatrix<f64> {
    let k = s.nrows() - 1;
    let terms = moment_terms(k);
    let m = terms.len();
    DMatrix::from_fn(m, m, |r, c| match (terms[r], terms[c]) {
        (Term::Linear(a), Term::Linear(b)) => s[(a, b)],
        (Term::Product(a, b), Term::Product(c, d)) => s[(a, c)] * s[(b, d)] + s[(a, d)] * s[(b, c)],
        _ => 0.0,
    })
}

/// Jacobian (inputs x outputs) of the map from raw moments to central ones:
/// `(m_x, m_y, m_xx, m_yy, m_xy) -> (m_xx - m_x^2, m_yy - m_y^2, m_xy - m_x m_y)`.
fn central_moment_jacobian(z: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(3 * k + 2, 2 * k + 1);
    for o in 0..=k {
        j[(o, o)] = -2.0 * z[o];
        j[(k + 1 + o, o)] = 1.0;
    }
    for i in 0..k {
        let col = k + 1 + i;
        j[(2 * k + 2 + i, col)] = 1.0;
        j[(k, col)] = -z[i];
        j[(i, col)] = -z[k];
    }
    j
}

/// Jacobian (inputs x outputs) of `(v_x.., v_y, v_xy..) -> v_xy_i / sqrt(v_x_i v_y)`.
fn correlation_jacobian(v: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let vy = v[k];
    let mut j = DMatrix::zeros(2 * k + 1, k);
    for i in 0..k {
        let (vx, vxy) = (v[i], v[k + 1 + i]);
        j[(i, i)] = -vxy / (2.0 * (vx.powi(3) * vy).sqrt());
        j[(k, i)] = -vxy / (2.0 * (vx * vy.powi(3)).sqrt());
        j[(k + 1 + i, i)] = 1.0 / (vx * vy).sqrt();
    }
    j
}

/// Asymptotic covariance of `sqrt(n) (phi(r) - phi(rho))` for a zero-mean
/// Gaussian `(X_1..X_k, Y)`.
///
/// Raw moments -> central moments -> correlations -> Fisher scale, each
/// step a delta-method sandwich `J^T S J`. Under Gaussianity the diagonal
/// is 1.
pub fn asymptotic_fisher_covariance(spec: &GaussianSpec) -> Result<DMatrix<f64>> {
    let s = spec.covariance();
    let k = s.nrows() - 1;
    if k == 0 {
        return Err(Error::Parameter("need at least one feature".into()));
    }
    if k > MAX_DENSE_FEATURES {
        return Err(Error::Size { k, max: MAX_DENSE_FEATURES });
    }
    let vy = s[(k, k)];
    let mut rho = Vec::with_capacity(k);
    for i in 0..k {
        let vx = s[(i, i)];
        let cxy = s[(i, k)];
        if vx <= 0.0 || vy <= 0.0 || vx * vy - cxy * cxy <= 0.0 {
            return Err(Error::Validity(format!(
                "the pair (X_{}, Y) has a singular covariance",
                i + 1
            )));
        }
        rho.push(cxy / (vx * vy).sqrt());
    }

    let sigma1 = moment_covariance(s);

    // Population raw moments: zero means, then variances and cross-covariances.
    let mut mu = DVector::zeros(3 * k + 2);
    let mut v = DVector::zeros(2 * k + 1);
    for o in 0..=k {
        mu[k + 1 + o] = s[(o, o)];
        v[o] = s[(o, o)];
    }
    for i in 0..k {
        mu[2 * k + 2 + i] = s[(i, k)];
        v[k + 1 + i] = s[(i, k)];
    }

    let j_eta = central_moment_jacobian(&mu, k);
    let sigma2 = j_eta.transpose() * &sigma1 * &j_eta;
    let j_gamma = correlation_jacobian(&v, k);
    let sigma3 = j_gamma.transpose() * sigma2 * j_gamma;

    let d: Vec<f64> = rho.iter().map(|&r| fisher_derivative(r)).collect();
    Ok(DMatrix::from_fn(k, k, |i, j| d[i] * d[j] * sigma3[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{gaussian_condition, independence_lhs, isserlis_pair_moments};
    use nalgebra::Matrix3;

    fn spec(rows: &[&[f64]]) -> GaussianSpec {
        let n = rows.len();
        GaussianSpec::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn single_feature_gives_unit_variance() {
        for rho in [0.0, 0.3, -0.8, 0.95] {
            let out = asymptotic_fisher_covariance(&spec(&[&[1.0, rho], &[rho, 1.0]])).unwrap();
            assert_eq!(out.shape(), (1, 1));
            assert!((out[(0, 0)] - 1.0).abs() < 1e-12);
        }
        // Non-unit variances do not matter.
        let out = asymptotic_fisher_covariance(&spec(&[&[4.0, 1.2], &[1.2, 0.9]])).unwrap();
        assert!((out[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_root_gives_zero_off_diagonal() {
        let x = gaussian_condition(0.5, 0.5).unwrap().admissible_roots()[0];
        let out = asymptotic_fisher_covariance(&spec(&[
            &[1.0, x, 0.5],
            &[x, 1.0, 0.5],
            &[0.5, 0.5, 1.0],
        ]))
        .unwrap();
        assert!(out[(0, 1)].abs() < 1e-9);
        assert!((out[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn off_diagonal_matches_pairwise_condition() {
        // Sigma^4_12 = phi'(rho1) phi'(rho2) * LHS from the pairwise formula.
        let (r1, r2, c) = (0.5, 0.9, 0.3);
        let out = asymptotic_fisher_covariance(&spec(&[&[1.0, c, r1], &[c, 1.0, r2], &[r1, r2, 1.0]])).unwrap();
        let lhs = independence_lhs(&isserlis_pair_moments(&Matrix3::new(1.0, c, r1, c, 1.0, r2, r1, r2, 1.0)).unwrap());
        let want = lhs / ((1.0 - r1 * r1) * (1.0 - r2 * r2));
        assert!((out[(0, 1)] - want).abs() < 1e-12);
        // 0.01575 / (0.75 * 0.19), hand arithmetic.
        assert!((out[(0, 1)] - 0.01575 / 0.1425).abs() < 1e-12);
        assert!((out[(0, 1)] - out[(1, 0)]).abs() < 1e-15);
    }

    #[test]
    fn identity_gives_identity() {
        let s = GaussianSpec::new(DMatrix::identity(4, 4)).unwrap();
        let out = asymptotic_fisher_covariance(&s).unwrap();
        assert!((out - DMatrix::identity(3, 3)).abs().max() < 1e-15);
    }

    #[test]
    fn size_cap() {
        let s = GaussianSpec::new(DMatrix::identity(66, 66)).unwrap();
        assert_eq!(asymptotic_fisher_covariance(&s), Err(Error::Size { k: 65, max: 64 }));
        let s = GaussianSpec::new(DMatrix::identity(65, 65)).unwrap();
        assert!(asymptotic_fisher_covariance(&s).is_ok());
    }

    #[test]
    fn singular_feature_target_pair_is_rejected() {
        let s = spec(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0]]);
        assert!(matches!(asymptotic_fisher_covariance(&s), Err(Error::Validity(_))));
    }

    #[test]
    fn wick_pairings_agree_with_closed_forms() {
        let s3 = Matrix3::new(1.3, 0.2, 0.5, 0.2, 0.8, -0.3, 0.5, -0.3, 2.0);
        let s = DMatrix::from_iterator(3, 3, s3.iter().copied());
        let big = moment_covariance(&s);
        let m = isserlis_pair_moments(&s3).unwrap();
        // k = 2: X1^2 at 3, X2^2 at 4, Y^2 at 5, X1Y at 6, X2Y at 7.
        let rows = [3, 5, 6];
        let cols = [4, 5, 7];
        let cov = m.cross_covariances();
        for a in 0..3 {
            for b in 0..3 {
                assert!((big[(rows[a], cols[b])] - cov[a][b]).abs() < 1e-14, "({a},{b})");
            }
        }
    }
}
