use serde_json::json;

use rglab_core::models::SparseLinearSpec;
use rglab_core::selection::{run_experiment, ExperimentSummary};
use rglab_core::SeedStream;

use super::{with_workers, RunReport};
use crate::config::{CommandKind, ExperimentConfig};
use crate::error::CliError;
use crate::output::{Cell, OutputSet};

/// Both estimators at every grid point.
pub fn compute_figure2(cfg: &ExperimentConfig) -> Result<Vec<ExperimentSummary>, CliError> {
    let spec = SparseLinearSpec::new(cfg.k, cfg.u).map_err(CliError::config)?;
    let root = SeedStream::root(cfg.seed());
    with_workers(cfg.workers, || run_experiment(&spec, &cfg.n_grid, cfg.replicates, cfg.mode, cfg.scale, &root))?
        .map_err(CliError::runtime)
}

pub fn run_figure2(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let summaries = compute_figure2(cfg)?;
    let mut out = OutputSet::create(&cfg.output_dir)?;

    let rows: Vec<Vec<Cell>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.n.into(),
                s.d_mean.into(),
                s.d_sd.into(),
                s.c_mean.into(),
                s.c_sd.into(),
                s.mode.as_str().into(),
                s.scale.as_str().into(),
            ]
        })
        .collect();
    out.csv("curves.csv", &["n", "d_mean", "d_sd", "c_mean", "c_sd", "mode", "scale"], &rows)?;

    let rows: Vec<Vec<Cell>> = summaries
        .iter()
        .flat_map(|s| {
            s.replicates
                .iter()
                .map(|r| vec![s.n.into(), (r.t + 1).into(), r.d.into(), r.c.into(), r.sigma_q_hat.into()])
        })
        .collect();
    out.csv("replicates.csv", &["n", "t", "d_t", "c_t", "sigma_q_hat"], &rows)?;

    let curves: Vec<_> = summaries
        .iter()
        .map(|s| {
            json!({
                "n": s.n,
                "d_mean": s.d_mean,
                "d_sd": s.d_sd,
                "c_mean": s.c_mean,
                "c_sd": s.c_sd,
                "sigma_q_hat_mean": s.sigma_q_hats.iter().sum::<f64>() / s.sigma_q_hats.len() as f64,
                "sigma_q_clamped": s.replicates.iter().filter(|r| r.sigma_q_clamped).count(),
            })
        })
        .collect();
    let max_sd = summaries.iter().flat_map(|s| [s.d_sd, s.c_sd]).fold(0.0, f64::max);
    let summary = json!({
        "command": "figure2",
        "config": cfg.echo(CommandKind::Figure2),
        "curves": curves,
        "max_sd": max_sd,
    });
    out.json("summary.json", &summary)?;
    let files = out.finish("figure2", cfg.full_echo(CommandKind::Figure2))?;
    Ok(RunReport { files, summary })
}
