use nalgebra::DMatrix;
use serde_json::json;

use rglab_core::correlation::{correlate_all, fisher, CorrelationVector};
use rglab_core::diagnostics::{histogram, normality_summary, qq_normal, sturges_bins, HistogramData, NormalitySummary};
use rglab_core::models::{
    sample_gaussian_dataset, sample_prior_fisher, sample_sparse_dataset, synthetic_correlation_noise, GaussianSpec,
    PriorSpec, SparseLinearSpec,
};
use rglab_core::SeedStream;

use super::{with_workers, RunReport};
use crate::config::{CommandKind, ExperimentConfig, ModelKind};
use crate::error::CliError;
use crate::output::{Cell, OutputSet};

/// Everything the histogram/QQ figure is drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Result {
    pub correlations: Vec<f64>,
    pub fisher: Vec<f64>,
    /// Whether each feature truly correlates with the target.
    pub active: Vec<bool>,
    pub histogram: HistogramData,
    pub qq: Vec<(f64, f64)>,
    pub summary: NormalitySummary,
    /// 0-based indices whose |r| was pulled back before the transform.
    pub clamped: Vec<usize>,
}

fn fisher_of(r: &CorrelationVector) -> Result<Vec<f64>, CliError> {
    r.values.iter().map(|&v| fisher(v).map_err(CliError::runtime)).collect()
}

/// Samples the configured model once and summarizes `phi(r)`.
pub fn compute_figure1(cfg: &ExperimentConfig) -> Result<Figure1Result, CliError> {
    let stream = SeedStream::root(cfg.seed()).child("figure1", 0);
    let (correlations, fisher, active, clamped) = match cfg.model {
        ModelKind::SparseLinear => {
            let spec = SparseLinearSpec::new(cfg.k, cfg.u).map_err(CliError::config)?;
            let (data, support) = sample_sparse_dataset(&spec, cfg.n, &stream).map_err(CliError::runtime)?;
            let r = correlate_all(&data).map_err(CliError::runtime)?;
            let mut active = vec![false; cfg.k];
            for i in support {
                active[i] = true;
            }
            (r.values.clone(), fisher_of(&r)?, active, r.clamped)
        }
        ModelKind::Gaussian => {
            let rows = cfg.covariance.as_ref().expect("validated");
            let d = rows.len();
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let spec = GaussianSpec::new(DMatrix::from_row_slice(d, d, &flat)).map_err(CliError::config)?;
            let data = sample_gaussian_dataset(&spec, cfg.n, &mut stream.child("data", 0).rng())
                .map_err(CliError::runtime)?;
            let r = correlate_all(&data).map_err(CliError::runtime)?;
            let active = (0..d - 1).map(|i| spec.covariance()[(i, d - 1)] != 0.0).collect();
            (r.values.clone(), fisher_of(&r)?, active, r.clamped)
        }
        ModelKind::PriorSynthetic => {
            let sigma_q = cfg.sigma_q.expect("validated");
            let prior = PriorSpec::with_mean(sigma_q, cfg.theta, cfg.k).map_err(CliError::config)?;
            let truth = sample_prior_fisher(&prior, &mut stream.child("prior", 0).rng());
            let noisy = synthetic_correlation_noise(&truth, cfg.n, &mut stream.child("noise", 0).rng())
                .map_err(CliError::runtime)?;
            let r = noisy.to_correlations();
            (r, noisy.values, vec![true; cfg.k], Vec::new())
        }
    };

    let bins = cfg.bins.unwrap_or_else(|| sturges_bins(fisher.len()));
    let histogram = histogram(&fisher, bins).map_err(CliError::runtime)?;
    let qq = qq_normal(&fisher).map_err(CliError::runtime)?;
    let summary = normality_summary(&fisher).map_err(CliError::runtime)?;
    Ok(Figure1Result { correlations, fisher, active, histogram, qq, summary, clamped })
}

pub fn run_figure1(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let res = with_workers(cfg.workers, || compute_figure1(cfg))??;
    let mut out = OutputSet::create(&cfg.output_dir)?;

    let rows: Vec<Vec<Cell>> = (0..res.fisher.len())
        .map(|i| {
            vec![(i + 1).into(), res.correlations[i].into(), res.fisher[i].into(), (res.active[i] as usize).into()]
        })
        .collect();
    out.csv("fisher_values.csv", &["feature", "r", "fisher", "active"], &rows)?;

    let h = &res.histogram;
    let rows: Vec<Vec<Cell>> = h
        .counts
        .iter()
        .enumerate()
        .map(|(b, &c)| vec![(b + 1).into(), h.edges[b].into(), h.edges[b + 1].into(), c.into()])
        .collect();
    out.csv("histogram.csv", &["bin", "lower", "upper", "count"], &rows)?;

    let rows: Vec<Vec<Cell>> = res.qq.iter().map(|&(t, s)| vec![t.into(), s.into()]).collect();
    out.csv("qq.csv", &["theoretical", "sample"], &rows)?;

    let s = &res.summary;
    let support: Vec<usize> = res
        .active
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(i, _)| i + 1)
        .collect();
    let summary = json!({
        "command": "figure1",
        "config": cfg.echo(CommandKind::Figure1),
        "features": res.fisher.len(),
        "active_features": support,
        "clamped_features": res.clamped.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "histogram": { "bins": h.counts.len(), "total": h.total },
        "normality": {
            "mean": s.mean,
            "sd": s.sd,
            "skewness": s.skewness,
            "excess_kurtosis": s.excess_kurtosis,
            "ks_distance": s.ks_distance,
        },
    });
    out.json("summary.json", &summary)?;
    let files = out.finish("figure1", cfg.full_echo(CommandKind::Figure1))?;
    Ok(RunReport { files, summary })
}
