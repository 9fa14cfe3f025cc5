//! Histogram, normal QQ pairs and moment/KS summaries for checking whether a
//! set of Fisher-transformed correlations "looks Gaussian".

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramData {
    /// `counts.len() + 1` ascending boundaries.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Sturges' rule, `ceil(1 + log2 m)`.
pub fn sturges_bins(m: usize) -> usize {
    if m <= 1 {
        return 1;
    }
    (1.0 + (m as f64).log2()).ceil() as usize
}

/// Equal-width bins over `[min, max]`; each bin is half-open except the last,
/// which is closed. A zero-width range is widened to `[v, v + 1e-9]`.
pub fn histogram(values: &[f64], bin_count: usize) -> Result<HistogramData> {
    if values.is_empty() {
        return Err(Error::Parameter("histogram of an empty sample".into()));
    }
    if bin_count == 0 {
        return Err(Error::Parameter("bin count must be positive".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("histogram input contains non-finite values".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1e-9;
    }
    let width = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..bin_count).map(|i| lo + width * i as f64).collect();
    edges.push(hi);

    let mut counts = vec![0u64; bin_count];
    for &v in values {
        let bin = edges.partition_point(|&e| e <= v).saturating_sub(1).min(bin_count - 1);
        counts[bin] += 1;
    }
    Ok(HistogramData { edges, counts, total: values.len() as u64 })
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Normal QQ pairs `(Phi^-1((i - 0.5) / m), x_(i))`, ascending.
pub fn qq_normal(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = values.len();
    if m < 2 {
        return Err(Error::Parameter(format!("QQ plot needs at least 2 values, got {m}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let phi = standard_normal();
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (phi.inverse_cdf((i as f64 + 0.5) / m as f64), x))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalitySummary {
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `sup |F_emp(x) - Phi((x - mean) / sd)|`, parameters fitted from the sample.
    pub ks_distance: f64,
}

/// Moment statistics (1/m divisors) plus the fitted-normal KS distance.
/// No Lilliefors correction: this is descriptive, not a test.
pub fn normality_summary(values: &[f64]) -> Result<NormalitySummary> {
    let m = values.len();
    if m < 8 {
        return Err(Error::Parameter(format!("normality summary needs at least 8 values, got {m}")));
    }
    let mf = m as f64;
    let mean = values.iter().sum::<f64>() / mf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= mf;
    m3 /= mf;
    m4 /= mf;
    let sd = m2.sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::DegenerateVariance("sample has zero standard deviation".into()));
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let phi = standard_normal();
    let ks_distance = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = phi.cdf((x - mean) / sd);
            ((i + 1) as f64 / mf - f).max(f - i as f64 / mf)
        })
        .fold(0.0, f64::max)
        .min(1.0);

    Ok(NormalitySummary {
        mean,
        sd,
        skewness: m3 / (sd * sd * sd),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        ks_distance,
    })
}
