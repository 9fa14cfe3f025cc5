use serde_json::{json, Value};

use rglab_core::models::SparseLinearSpec;
use rglab_core::selection::{minimal_sample_size, Probe, RobustnessCriterion, SampleSizeSearch, SearchSettings};
use rglab_core::SeedStream;

use super::{with_workers, RunReport};
use crate::config::{CommandKind, ExperimentConfig};
use crate::error::CliError;
use crate::output::OutputSet;

pub fn compute_sample_size(cfg: &ExperimentConfig) -> Result<SampleSizeSearch, CliError> {
    let spec = SparseLinearSpec::new(cfg.k, cfg.u).map_err(CliError::config)?;
    let criterion = RobustnessCriterion::new(cfg.target).map_err(CliError::config)?;
    let settings = SearchSettings {
        estimator: cfg.estimator,
        mode: cfg.mode,
        scale: cfg.scale,
        n_lo: cfg.n_lo,
        n_hi: cfg.n_hi,
        b: cfg.replicates,
        resolution: cfg.resolution,
    };
    let root = SeedStream::root(cfg.seed());
    with_workers(cfg.workers, || minimal_sample_size(&spec, criterion, &settings, &root))?.map_err(CliError::runtime)
}

fn probe_json(p: &Probe) -> Value {
    json!({ "n": p.n, "mean": p.mean, "sd": p.sd })
}

pub fn run_sample_size(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let search = compute_sample_size(cfg)?;
    let mut out = OutputSet::create(&cfg.output_dir)?;
    let summary = json!({
        "command": "sample-size",
        "config": cfg.echo(CommandKind::SampleSize),
        "estimator": cfg.estimator.as_str(),
        "target": cfg.target,
        "n_star": search.n_star,
        "exhausted": search.exhausted,
        "best": probe_json(&search.best),
        "resolution": search.resolution,
        "trace": search.trace.iter().map(probe_json).collect::<Vec<_>>(),
    });
    out.json("samplesize.json", &summary)?;
    let files = out.finish("sample-size", cfg.full_echo(CommandKind::SampleSize))?;
    Ok(RunReport { files, summary })
}
