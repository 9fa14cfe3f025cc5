//! Closed-form asymptotics for pairs of Fisher-transformed sample correlations.
//!
//! * eigenvalues of the 3x3 correlation matrix of `(X1, X2, Y)` through its
//!   characteristic cubic;
//! * Gaussian fourth-order covariances of the products `X_i^2, Y^2, X_i Y`
//!   (Isserlis / Wick pairings);
//! * the scalar condition under which `phi(r_i)` and `phi(r_j)` become
//!   asymptotically uncorrelated, and its Gaussian reduction to a quadratic
//!   in the gene-gene correlation;
//! * the full delta-method covariance of `sqrt(n) (phi(r) - phi(rho))`.

mod cubic;
mod delta;

pub use cubic::{solve_cubic, CubicRoots};
pub use delta::{asymptotic_fisher_covariance, moment_covariance, MAX_DENSE_FEATURES};

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::models::validate_covariance;

/// Minimum eigenvalue accepted as positive semidefinite.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// `|LHS|` at or below this counts as "the independence condition holds".
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-9;

/// Second- and fourth-order moments of a feature pair `(X_i, X_j)` and the
/// target `Y`. Field `c_a_b` is `Cov(a, b)` with `a` a product involving
/// `X_i` (or `Y^2`) and `b` one involving `X_j` (or `Y^2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseMoments {
    pub var_xi: f64,
    pub var_xj: f64,
    pub var_y: f64,
    pub rho_i: f64,
    pub rho_j: f64,
    pub rho_xixj: f64,
    pub c_xi2_xj2: f64,
    pub c_y2_xj2: f64,
    pub c_xiy_xj2: f64,
    pub c_xi2_y2: f64,
    pub c_y2_y2: f64,
    pub c_xiy_y2: f64,
    pub c_xi2_xjy: f64,
    pub c_y2_xjy: f64,
    pub c_xiy_xjy: f64,
}

impl PairwiseMoments {
    /// The nine fourth-order covariances in row-major order, rows
    /// `(X_i^2, Y^2, X_i Y)` and columns `(X_j^2, Y^2, X_j Y)`.
    pub fn cross_covariances(&self) -> [[f64; 3]; 3] {
        [
            [self.c_xi2_xj2, self.c_xi2_y2, self.c_xi2_xjy],
            [self.c_y2_xj2, self.c_y2_y2, self.c_y2_xjy],
            [self.c_xiy_xj2, self.c_xiy_y2, self.c_xiy_xjy],
        ]
    }
}

/// Eigenvalues of `[[1, c, rho1], [c, 1, rho2], [rho1, rho2, 1]]` as roots of
/// its determinant `(1 - l)^3 - (1 - l)(rho1^2 + rho2^2 + c^2) + 2 c rho1 rho2`.
pub fn char_poly_roots(rho1: f64, rho2: f64, c: f64) -> Result<CubicRoots> {
    for (v, name) in [(rho1, "char_poly_roots(rho1)"), (rho2, "char_poly_roots(rho2)"), (c, "char_poly_roots(c)")] {
        check_open_unit(v, name)?;
    }
    let s = rho1 * rho1 + rho2 * rho2 + c * c;
    solve_cubic(-1.0, 3.0, s - 3.0, 1.0 - s + 2.0 * c * rho1 * rho2)
}

/// True iff the smallest eigenvalue of the correlation matrix is at least
/// [`PSD_TOLERANCE`].
pub fn is_valid_correlation_structure(rho1: f64, rho2: f64, c: f64) -> Result<bool> {
    let roots = char_poly_roots(rho1, rho2, c)?;
    // Symmetric matrix: every root is real up to rounding.
    let min = roots.roots.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    Ok(min >= PSD_TOLERANCE)
}

fn check_open_unit(v: f64, op: &'static str) -> Result<()> {
    if v.is_nan() || v.abs() >= 1.0 {
        return Err(Error::Domain { op, value: v, domain: "(-1, 1)" });
    }
    Ok(())
}

/// Gaussian moments of `(X_i, X_j, Y)` with covariance `sigma` (that order).
pub fn isserlis_pair_moments(sigma: &Matrix3<f64>) -> Result<PairwiseMoments> {
    validate_covariance(&nalgebra::DMatrix::from_iterator(3, 3, sigma.iter().copied()))?;
    let (s11, s22, syy) = (sigma[(0, 0)], sigma[(1, 1)], sigma[(2, 2)]);
    let (s12, s1y, s2y) = (sigma[(0, 1)], sigma[(0, 2)], sigma[(1, 2)]);
    let corr = |s: f64, a: f64, b: f64| s / (a * b).sqrt();
    Ok(PairwiseMoments {
        var_xi: s11,
        var_xj: s22,
        var_y: syy,
        rho_i: corr(s1y, s11, syy),
        rho_j: corr(s2y, s22, syy),
        rho_xixj: corr(s12, s11, s22),
        c_xi2_xj2: 2.0 * s12 * s12,
        c_y2_xj2: 2.0 * s2y * s2y,
        c_xiy_xj2: 2.0 * s12 * s2y,
        c_xi2_y2: 2.0 * s1y * s1y,
        c_y2_y2: 2.0 * syy * syy,
        c_xiy_y2: 2.0 * syy * s1y,
        c_xi2_xjy: 2.0 * s12 * s1y,
        c_y2_xjy: 2.0 * syy * s2y,
        c_xiy_xjy: syy * s12 + s1y * s2y,
    })
}

/// Gradient of `r = s_xy / sqrt(s_xx s_yy)` with respect to
/// `(s_xx, s_yy, s_xy)` at the population point.
fn correlation_gradient(rho: f64, var_x: f64, var_y: f64) -> [f64; 3] {
    [-rho / (2.0 * var_x), -rho / (2.0 * var_y), 1.0 / (var_x * var_y).sqrt()]
}

/// Left-hand side of the asymptotic-independence condition: the asymptotic
/// covariance of `sqrt(n) r_i` and `sqrt(n) r_j`,
///
/// ```text
/// sum_b g_j[b] * sum_a g_i[a] Cov(a, b),
///   a in (X_i^2, Y^2, X_i Y),  b in (X_j^2, Y^2, X_j Y),
///   g_i = (-rho_i / 2 var_xi, -rho_i / 2 var_y, 1 / (sd_xi sd_y)).
/// ```
///
/// The result is dimensionless (invariant to rescaling any variable), so no
/// further normalization is applied before comparing with
/// [`INDEPENDENCE_TOLERANCE`].
pub fn independence_lhs(m: &PairwiseMoments) -> f64 {
    let gi = correlation_gradient(m.rho_i, m.var_xi, m.var_y);
    let gj = correlation_gradient(m.rho_j, m.var_xj, m.var_y);
    let cov = m.cross_covariances();
    (0..3)
        .map(|b| gj[b] * (0..3).map(|a| gi[a] * cov[a][b]).sum::<f64>())
        .sum()
}

pub fn asymptotically_independent(m: &PairwiseMoments) -> bool {
    independence_lhs(m).abs() <= INDEPENDENCE_TOLERANCE
}

/// Quadratic `a x^2 + b x + c = 0` in the gene-gene correlation `x` that
/// must hold for asymptotic independence under joint Gaussianity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCondition {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub discriminant: f64,
}

impl QuadraticCondition {
    pub fn evaluate(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    /// Real roots, ascending. Falls back to the linear root when `a = 0`.
    pub fn real_roots(&self) -> Vec<f64> {
        if self.a == 0.0 {
            if self.b == 0.0 {
                return Vec::new();
            }
            return vec![-self.c / self.b];
        }
        if self.discriminant < 0.0 {
            return Vec::new();
        }
        // Cancellation-free pairing.
        let sd = self.discriminant.sqrt();
        let qq = -0.5 * (self.b + self.b.signum() * sd);
        let (r1, r2) = if qq == 0.0 { (0.0, 0.0) } else { (qq / self.a, self.c / qq) };
        let mut r = vec![r1, r2];
        r.sort_by(f64::total_cmp);
        if self.discriminant == 0.0 {
            r.dedup();
        }
        r
    }

    /// Real roots strictly inside (-1, 1).
    pub fn admissible_roots(&self) -> Vec<f64> {
        self.real_roots().into_iter().filter(|r| r.abs() < 1.0).collect()
    }
}

/// Coefficients of the Gaussian independence quadratic for target
/// correlations `rho1`, `rho2`.
pub fn gaussian_condition(rho1: f64, rho2: f64) -> Result<QuadraticCondition> {
    check_open_unit(rho1, "gaussian_condition(rho1)")?;
    check_open_unit(rho2, "gaussian_condition(rho2)")?;
    let p = rho1 * rho2;
    let a = p / 2.0;
    let b = 1.0 - rho1 * rho1 - rho2 * rho2;
    let c = (rho1 * rho2.powi(3) + rho1.powi(3) * rho2 - p) / 2.0;
    Ok(QuadraticCondition { a, b, c, discriminant: b * b - 4.0 * a * c })
}
