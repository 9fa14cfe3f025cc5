//! Pearson correlations, the Fisher transform, and empirical fourth-order
//! moments.
//!
//! All moments use the population (1/n) convention:
//!
//! ```text
//! r = (m_xy - m_x m_y) / sqrt((m_xx - m_x^2) (m_yy - m_y^2))
//! ```
//!
//! Most statistics libraries divide by n - 1 for variances; the divisor
//! cancels in `r` but matters for [`pairwise_moments`].

use rayon::prelude::*;

use crate::asymptotics::PairwiseMoments;
use crate::error::{Error, Result};

/// Correlations whose magnitude reaches this bound are pulled back before
/// the Fisher transform.
pub const CORRELATION_CLAMP: f64 = 1.0 - 1e-12;

/// n x k feature matrix plus a length-n target, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    target: Vec<f64>,
    n: usize,
    k: usize,
}

impl Dataset {
    /// Builds a dataset from feature columns and a target vector.
    pub fn from_columns(columns: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self> {
        let n = target.len();
        let k = columns.len();
        let mut features = Vec::with_capacity(n * k);
        for (i, col) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::Shape(format!(
                    "column {i} has {} rows but the target has {n}",
                    col.len()
                )));
            }
            features.extend(col);
        }
        Self::from_column_major(features, target, k)
    }

    /// Builds a dataset from a column-major buffer of `n * k` values.
    pub fn from_column_major(features: Vec<f64>, target: Vec<f64>, k: usize) -> Result<Self> {
        let n = target.len();
        if n < 4 {
            return Err(Error::Parameter(format!("need at least 4 samples, got {n}")));
        }
        if k == 0 {
            return Err(Error::Parameter("dataset has no features".into()));
        }
        if features.len() != n * k {
            return Err(Error::Shape(format!(
                "feature buffer has {} values, expected {n} x {k}",
                features.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite feature value at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        if let Some(pos) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite target value at row {pos}")));
        }
        Ok(Self { features, target, n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.features[i * self.n..(i + 1) * self.n]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.features.chunks_exact(self.n)
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }
}

/// Sample (or population) correlations of every feature with the target.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector {
    pub values: Vec<f64>,
    /// Sample size behind the estimates; `None` for population values.
    pub n: Option<usize>,
    /// Indices whose magnitude hit [`CORRELATION_CLAMP`] and were pulled back.
    pub clamped: Vec<usize>,
}

impl CorrelationVector {
    pub fn population(values: Vec<f64>) -> Self {
        Self { values, n: None, clamped: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entrywise Fisher transform.
    pub fn to_fisher(&self) -> Result<FisherVector> {
        self.values
            .iter()
            .map(|&r| fisher(r))
            .collect::<Result<Vec<_>>>()
            .map(|values| FisherVector { values })
    }
}

/// Values on the Fisher z scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherVector {
    pub values: Vec<f64>,
}

impl FisherVector {
    /// Maps back to the correlation scale with `tanh`.
    pub fn to_correlations(&self) -> Vec<f64> {
        self.values.iter().map(|&z| z.tanh()).collect()
    }
}

/// Fisher's z transform, `atanh(h)`.
pub fn fisher(h: f64) -> Result<f64> {
    if h.is_nan() || h.abs() >= 1.0 {
        return Err(Error::Domain { op: "fisher", value: h, domain: "(-1, 1)" });
    }
    // Evaluate on |h| so that the result is exactly odd.
    Ok(h.signum() * h.abs().atanh())
}

/// Inverse Fisher transform, `tanh(z)`.
pub fn fisher_inverse(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain { op: "fisher_inverse", value: z, domain: "finite reals" });
    }
    Ok(z.tanh())
}

/// Derivative of the Fisher transform, `1 / (1 - h^2)`.
pub fn fisher_derivative(h: f64) -> f64 {
    1.0 / (1.0 - h * h)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Centered copy and its sum of squares.
fn centered(v: &[f64]) -> (Vec<f64>, f64) {
    let m = mean(v);
    let c: Vec<f64> = v.iter().map(|&x| x - m).collect();
    let ss = c.iter().map(|x| x * x).sum();
    (c, ss)
}

/// Correlation of `x` against an already-centered target with sum of squares `yss`.
fn pearson_centered_target(x: &[f64], yc: &[f64], yss: f64) -> Result<f64> {
    if is_constant(x) {
        return Err(Error::DegenerateVariance("feature vector is constant".into()));
    }
    let mx = mean(x);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&xi, &yi) in x.iter().zip(yc) {
        let d = xi - mx;
        sxy += d * yi;
        sxx += d * d;
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateVariance("feature vector has zero variance".into()));
    }
    // Rounding can overshoot +-1 by a few ulps.
    Ok((sxy / (sxx * yss).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation with 1/n moments. Computed on centered data, which
/// is algebraically identical to the raw-moment formula.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("x has {} entries, y has {}", x.len(), y.len())));
    }
    if x.len() < 4 {
        return Err(Error::Parameter(format!("need at least 4 samples, got {}", x.len())));
    }
    if is_constant(y) {
        return Err(Error::DegenerateVariance("target vector is constant".into()));
    }
    let (yc, yss) = centered(y);
    if yss <= 0.0 {
        return Err(Error::DegenerateVariance("target vector has zero variance".into()));
    }
    pearson_centered_target(x, &yc, yss)
}

/// Correlation of every feature column with the target.
///
/// Columns are processed in parallel; each entry is computed independently so
/// the result does not depend on scheduling. Entries with `|r|` at or beyond
/// [`CORRELATION_CLAMP`] are clamped and listed in `clamped`.
pub fn correlate_all(data: &Dataset) -> Result<CorrelationVector> {
    let y = data.target();
    if is_constant(y) {
        return Err(Error::DegenerateVariance("target vector is constant".into()));
    }
    let (yc, yss) = centered(y);
    let mut values = data
        .features
        .par_chunks_exact(data.n)
        .enumerate()
        .map(|(i, col)| {
            pearson_centered_target(col, &yc, yss)
                .map_err(|e| Error::Column { column: i, source: Box::new(e) })
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut clamped = Vec::new();
    for (i, r) in values.iter_mut().enumerate() {
        if r.abs() > CORRELATION_CLAMP {
            log::warn!("feature {i}: |r| = {} clamped to {CORRELATION_CLAMP}", r.abs());
            *r = r.signum() * CORRELATION_CLAMP;
            clamped.push(i);
        }
    }
    Ok(CorrelationVector { values, n: Some(data.n), clamped })
}

/// Covariance of two product series with 1/n divisors.
fn product_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

/// Plug-in estimates of every moment entering the asymptotic-independence
/// condition for features `i` and `j`. The three series are centered first.
pub fn pairwise_moments(data: &Dataset, i: usize, j: usize) -> Result<PairwiseMoments> {
    let k = data.k();
    for idx in [i, j] {
        if idx >= k {
            return Err(Error::Parameter(format!("feature index {idx} out of range for k = {k}")));
        }
    }
    let check = |v: &[f64], what: String| {
        if is_constant(v) {
            Err(Error::DegenerateVariance(format!("{what} is constant")))
        } else {
            Ok(())
        }
    };
    check(data.column(i), format!("feature {i}"))?;
    check(data.column(j), format!("feature {j}"))?;
    check(data.target(), "target".into())?;

    let n = data.n() as f64;
    let (xi, ssi) = centered(data.column(i));
    let (xj, ssj) = centered(data.column(j));
    let (y, ssy) = centered(data.target());
    if ssi <= 0.0 || ssj <= 0.0 || ssy <= 0.0 {
        return Err(Error::DegenerateVariance("zero variance after centering".into()));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let corr = |s: f64, a: f64, b: f64| (s / (a * b).sqrt()).clamp(-1.0, 1.0);

    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<f64>>();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<f64>>();
    let xi2 = sq(&xi);
    let xj2 = sq(&xj);
    let y2 = sq(&y);
    let xiy = prod(&xi, &y);
    let xjy = prod(&xj, &y);

    Ok(PairwiseMoments {
        var_xi: ssi / n,
        var_xj: ssj / n,
        var_y: ssy / n,
        rho_i: corr(dot(&xi, &y), ssi, ssy),
        rho_j: corr(dot(&xj, &y), ssj, ssy),
        rho_xixj: corr(dot(&xi, &xj), ssi, ssj),
        c_xi2_xj2: product_cov(&xi2, &xj2),
        c_y2_xj2: product_cov(&y2, &xj2),
        c_xiy_xj2: product_cov(&xiy, &xj2),
        c_xi2_y2: product_cov(&xi2, &y2),
        c_y2_y2: product_cov(&y2, &y2),
        c_xiy_y2: product_cov(&xiy, &y2),
        c_xi2_xjy: product_cov(&xi2, &xjy),
        c_y2_xjy: product_cov(&y2, &xjy),
        c_xiy_xjy: product_cov(&xiy, &xjy),
    })
}
