//! Top-u selection by absolute correlation and the two estimators of the
//! expected proportion of correctly selected features: a straightforward
//! Monte-Carlo estimator (d) and a fast empirical-Bayes approximation (c).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::correlation::{correlate_all, CorrelationVector};
use crate::error::{Error, Result};
use crate::models::{sample_sparse_dataset, SparseLinearSpec};
use crate::rng::SeedStream;

/// Which values the empirical variance `W` is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SigmaScale {
    /// Raw sample correlations `r_i`.
    #[default]
    Raw,
    /// Fisher-transformed correlations `phi(r_i)`.
    Fisher,
}

/// How the noisy scores `v_i` of the approximated estimator are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ApproxMode {
    /// `v_i = |r_i + z_i|`, the observed correlations plus fresh noise.
    #[default]
    PaperLiteral,
    /// `v_i = |phi(rho_i) + z_i|`, the synthetic truths plus noise.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Straightforward,
    Approximated,
}

macro_rules! named_enum {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($variant => $name,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::Parameter(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(SigmaScale, "scale", SigmaScale::Raw => "raw", SigmaScale::Fisher => "fisher");
named_enum!(ApproxMode, "mode", ApproxMode::PaperLiteral => "paper_literal", ApproxMode::Synthetic => "synthetic");
named_enum!(Estimator, "estimator", Estimator::Straightforward => "straightforward", Estimator::Approximated => "approximated");

/// Required overlap between a selected list and the true list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessCriterion {
    target_overlap: f64,
}

impl RobustnessCriterion {
    pub fn new(target_overlap: f64) -> Result<Self> {
        if !(target_overlap > 0.0 && target_overlap <= 1.0) {
            return Err(Error::Parameter(format!("target overlap must lie in (0, 1], got {target_overlap}")));
        }
        Ok(Self { target_overlap })
    }

    pub fn target_overlap(&self) -> f64 {
        self.target_overlap
    }
}

impl Default for RobustnessCriterion {
    fn default() -> Self {
        Self { target_overlap: 0.5 }
    }
}

/// Selected and true index sets with their overlap proportion.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub chosen: Vec<usize>,
    pub truth: Vec<usize>,
    pub overlap: f64,
}

impl SelectionOutcome {
    pub fn new(chosen: Vec<usize>, truth: Vec<usize>) -> Result<Self> {
        if chosen.len() != truth.len() || chosen.is_empty() {
            return Err(Error::Shape(format!(
                "selections must have equal positive size, got {} and {}",
                chosen.len(),
                truth.len()
            )));
        }
        let overlap = overlap(&chosen, &truth);
        Ok(Self { chosen, truth, overlap })
    }
}

/// `|a ∩ b| / |a|` for two index sets of equal size.
pub fn overlap(a: &[usize], b: &[usize]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j, mut hits) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                hits += 1;
                i += 1;
                j += 1;
            }
        }
    }
    hits as f64 / a.len() as f64
}

/// Indices of the `u` largest values, ascending. Ties go to the smaller index.
pub fn top_u_indices(values: &[f64], u: usize) -> Result<Vec<usize>> {
    let k = values.len();
    if u == 0 || u > k {
        return Err(Error::Parameter(format!("need 0 < u <= k, got u = {u}, k = {k}")));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    if u < k {
        let order = |&a: &usize, &b: &usize| values[b].total_cmp(&values[a]).then(a.cmp(&b));
        idx.select_nth_unstable_by(u - 1, order);
        idx.truncate(u);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Empirical-Bayes estimate of the prior standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaQEstimate {
    pub value: f64,
    /// Empirical variance (1/k divisor) on the chosen scale.
    pub w: f64,
    /// `W < 1/(n-3)`: the estimate was clamped to zero.
    pub clamped: bool,
    pub scale: SigmaScale,
}

/// `sqrt(max(W - 1/(n-3), 0))`, with `W` the 1/k variance of `r` or `phi(r)`.
pub fn estimate_sigma_q(r: &CorrelationVector, scale: SigmaScale) -> Result<SigmaQEstimate> {
    let n = r
        .n
        .ok_or_else(|| Error::Parameter("sigma_q needs sample correlations with a known n".into()))?;
    if n < 4 {
        return Err(Error::Parameter(format!("need n >= 4, got {n}")));
    }
    if r.len() < 2 {
        return Err(Error::Parameter(format!("need at least 2 correlations, got {}", r.len())));
    }
    let w = match scale {
        SigmaScale::Raw => population_variance(&r.values),
        SigmaScale::Fisher => population_variance(&r.to_fisher()?.values),
    };
    let excess = w - 1.0 / (n - 3) as f64;
    let clamped = excess.is_nan() || excess <= 0.0;
    let value = if clamped { 0.0 } else { excess.sqrt() };
    Ok(SigmaQEstimate { value, w, clamped, scale })
}

fn population_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// One straightforward Monte-Carlo replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct StraightforwardOutcome {
    /// Proportion of the true support recovered by top-u selection on `|r|`.
    pub d: f64,
    pub selection: SelectionOutcome,
    pub correlations: CorrelationVector,
}

/// Samples a dataset from `stream`, ranks features by `|r|`, and scores the
/// top-u list against the realized support.
pub fn straightforward_replicate(
    spec: &SparseLinearSpec,
    n: usize,
    stream: &SeedStream,
) -> Result<StraightforwardOutcome> {
    let (data, support) = sample_sparse_dataset(spec, n, stream)?;
    let correlations = correlate_all(&data)?;
    Ok(score_correlations(correlations, support))
}

fn score_correlations(correlations: CorrelationVector, support: Vec<usize>) -> StraightforwardOutcome {
    let abs: Vec<f64> = correlations.values.iter().map(|r| r.abs()).collect();
    let chosen = top_u_indices(&abs, support.len()).expect("u < k by spec");
    let selection = SelectionOutcome::new(chosen, support).expect("equal sizes");
    StraightforwardOutcome { d: selection.overlap, selection, correlations }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximatedOutcome {
    pub c: f64,
    pub sigma_q: SigmaQEstimate,
}

/// One replicate of the fast approximation.
///
/// Fits `sigma_q` to `r`, draws synthetic Fisher-scale truths from
/// `N(0, sigma_q^2)` and takes their top-u by magnitude as `S1`; draws
/// `z ~ N(0, 1/(n-3))`, scores `v` according to `mode`, takes `S2` as its
/// top-u, and returns `|S1 ∩ S2| / u`.
pub fn approximated_replicate<R: Rng + ?Sized>(
    r: &CorrelationVector,
    u: usize,
    mode: ApproxMode,
    scale: SigmaScale,
    rng: &mut R,
) -> Result<ApproximatedOutcome> {
    let k = r.len();
    if u == 0 || u > k {
        return Err(Error::Parameter(format!("need 0 < u <= k, got u = {u}, k = {k}")));
    }
    let sigma_q = estimate_sigma_q(r, scale)?;
    let n = r.n.expect("checked by estimate_sigma_q");

    let truths: Vec<f64> = if sigma_q.value > 0.0 {
        let prior = Normal::new(0.0, sigma_q.value).expect("positive sd");
        (0..k).map(|_| prior.sample(rng)).collect()
    } else {
        vec![0.0; k]
    };
    let truth_abs: Vec<f64> = truths.iter().map(|t| t.abs()).collect();
    let s1 = top_u_indices(&truth_abs, u)?;

    let noise_sd = 1.0 / ((n - 3) as f64).sqrt();
    let base = match mode {
        ApproxMode::PaperLiteral => &r.values,
        ApproxMode::Synthetic => &truths,
    };
    let scores: Vec<f64> = base
        .iter()
        .map(|&b| {
            let z: f64 = StandardNormal.sample(rng);
            (b + noise_sd * z).abs()
        })
        .collect();
    let s2 = top_u_indices(&scores, u)?;
    Ok(ApproximatedOutcome { c: overlap(&s1, &s2), sigma_q })
}

/// Per-replicate values behind an [`ExperimentSummary`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub t: usize,
    pub d: f64,
    pub c: f64,
    pub sigma_q_hat: f64,
    pub sigma_q_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub n: usize,
    pub b: usize,
    pub d_mean: f64,
    pub d_sd: f64,
    pub c_mean: f64,
    pub c_sd: f64,
    pub sigma_q_hats: Vec<f64>,
    pub replicates: Vec<ReplicateRecord>,
    pub mode: ApproxMode,
    pub scale: SigmaScale,
}

/// Mean and standard deviation with a 1/len divisor.
fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, population_variance(v).sqrt())
}

/// Stream for replicate `t` at sample size `n`.
pub fn replicate_stream(root: &SeedStream, n: usize, t: usize) -> SeedStream {
    root.child("n", n as u64).child("replicate", t as u64)
}

fn run_replicate(
    spec: &SparseLinearSpec,
    n: usize,
    t: usize,
    mode: ApproxMode,
    scale: SigmaScale,
    root: &SeedStream,
) -> Result<ReplicateRecord> {
    let stream = replicate_stream(root, n, t);
    let straight = straightforward_replicate(spec, n, &stream.child("data", 0))?;
    let mut rng = stream.child("approximate", 0).rng();
    let approx = approximated_replicate(&straight.correlations, spec.u(), mode, scale, &mut rng)?;
    Ok(ReplicateRecord {
        t,
        d: straight.d,
        c: approx.c,
        sigma_q_hat: approx.sigma_q.value,
        sigma_q_clamped: approx.sigma_q.clamped,
    })
}

/// Runs `b` replicates at every `n` in `n_grid`. Both estimators share each
/// replicate's dataset. Replicates may run in parallel; aggregation follows
/// replicate order.
pub fn run_experiment(
    spec: &SparseLinearSpec,
    n_grid: &[usize],
    b: usize,
    mode: ApproxMode,
    scale: SigmaScale,
    root: &SeedStream,
) -> Result<Vec<ExperimentSummary>> {
    if b == 0 {
        return Err(Error::Parameter("need at least one replicate".into()));
    }
    if let Some(&bad) = n_grid.iter().find(|&&n| n < 4) {
        return Err(Error::Parameter(format!("every n must be >= 4, got {bad}")));
    }
    n_grid
        .iter()
        .map(|&n| {
            let replicates = (0..b)
                .into_par_iter()
                .map(|t| run_replicate(spec, n, t, mode, scale, root))
                .collect::<Result<Vec<_>>>()?;
            let ds: Vec<f64> = replicates.iter().map(|r| r.d).collect();
            let cs: Vec<f64> = replicates.iter().map(|r| r.c).collect();
            let (d_mean, d_sd) = mean_sd(&ds);
            let (c_mean, c_sd) = mean_sd(&cs);
            log::info!("n = {n}: d = {d_mean:.4} ({d_sd:.4}), c = {c_mean:.4} ({c_sd:.4})");
            Ok(ExperimentSummary {
                n,
                b,
                d_mean,
                d_sd,
                c_mean,
                c_sd,
                sigma_q_hats: replicates.iter().map(|r| r.sigma_q_hat).collect(),
                replicates,
                mode,
                scale,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Result of [`minimal_sample_size`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeSearch {
    /// Smallest passing n found, or `None` when the search ran out of range.
    pub n_star: Option<usize>,
    pub exhausted: bool,
    /// Probe with the highest mean overlap.
    pub best: Probe,
    /// Gap between the last failing and first passing probe.
    pub resolution: usize,
    /// Probes in evaluation order.
    pub trace: Vec<Probe>,
}

/// Settings for [`minimal_sample_size`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    pub estimator: Estimator,
    pub mode: ApproxMode,
    pub scale: SigmaScale,
    pub n_lo: usize,
    pub n_hi: usize,
    pub b: usize,
    /// Bisection stops once the bracket is this narrow.
    pub resolution: usize,
}

/// Smallest n whose estimated mean overlap reaches the criterion.
///
/// Probes `n_lo`, then doubles (capped at `n_hi`) until a probe passes, then
/// bisects the last bracket down to `settings.resolution`. Each probe uses
/// the same replicate streams as [`run_experiment`] at that n.
pub fn minimal_sample_size(
    spec: &SparseLinearSpec,
    criterion: RobustnessCriterion,
    settings: &SearchSettings,
    root: &SeedStream,
) -> Result<SampleSizeSearch> {
    let SearchSettings { estimator, mode, scale, n_lo, n_hi, b, resolution } = *settings;
    if n_lo < 4 || n_lo >= n_hi {
        return Err(Error::Parameter(format!("need 4 <= n_lo < n_hi, got [{n_lo}, {n_hi}]")));
    }
    let resolution = resolution.max(1);
    let target = criterion.target_overlap();
    let mut cache: BTreeMap<usize, Probe> = BTreeMap::new();
    let mut trace = Vec::new();
    let mut probe = |n: usize| -> Result<Probe> {
        if let Some(p) = cache.get(&n) {
            return Ok(*p);
        }
        let s = &run_experiment(spec, &[n], b, mode, scale, root)?[0];
        let (mean, sd) = match estimator {
            Estimator::Straightforward => (s.d_mean, s.d_sd),
            Estimator::Approximated => (s.c_mean, s.c_sd),
        };
        let p = Probe { n, mean, sd };
        cache.insert(n, p);
        trace.push(p);
        Ok(p)
    };

    let mut lo = n_lo;
    let mut hi = None;
    let mut n = n_lo;
    loop {
        if probe(n)?.mean >= target {
            hi = Some(n);
            break;
        }
        lo = n;
        if n >= n_hi {
            break;
        }
        n = (n * 2).min(n_hi);
    }

    let mut gap = 0;
    if let Some(mut h) = hi {
        if h > n_lo {
            while h - lo > resolution {
                let mid = lo + (h - lo) / 2;
                if probe(mid)?.mean >= target {
                    h = mid;
                } else {
                    lo = mid;
                }
            }
            gap = h - lo;
        }
        hi = Some(h);
    }

    let best = *trace
        .iter()
        .max_by(|a, b| a.mean.total_cmp(&b.mean).then(b.n.cmp(&a.n)))
        .expect("at least one probe");
    Ok(SampleSizeSearch { n_star: hi, exhausted: hi.is_none(), best, resolution: gap, trace })
}
