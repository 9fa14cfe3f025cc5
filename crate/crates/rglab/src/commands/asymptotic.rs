use nalgebra::DMatrix;
use serde_json::json;

use rglab_core::asymptotics::{asymptotic_fisher_covariance, MAX_DENSE_FEATURES};
use rglab_core::models::GaussianSpec;
use rglab_core::Error;

use super::RunReport;
use crate::config::{CommandKind, ExperimentConfig};
use crate::error::CliError;
use crate::output::{Cell, OutputSet};

/// Largest tolerated deviation of a diagonal entry from 1.
const DIAGONAL_TOLERANCE: f64 = 1e-9;

/// Asymptotic covariance of the Fisher-transformed correlations.
pub fn compute_asymptotic_cov(cfg: &ExperimentConfig) -> Result<DMatrix<f64>, CliError> {
    let rows = cfg.covariance.as_ref().expect("validated");
    let d = rows.len();
    if d - 1 > MAX_DENSE_FEATURES {
        return Err(CliError::Config(format!(
            "size: k = {} features exceeds the dense limit of {MAX_DENSE_FEATURES}",
            d - 1
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let spec = GaussianSpec::new(DMatrix::from_row_slice(d, d, &flat)).map_err(CliError::config)?;
    let sigma4 = asymptotic_fisher_covariance(&spec).map_err(|e| match e {
        Error::Size { .. } | Error::Validity(_) | Error::Domain { .. } | Error::DegenerateVariance(_) => {
            CliError::config(e)
        }
        other => CliError::runtime(other),
    })?;
    if let Some(i) = (0..sigma4.nrows()).find(|&i| (sigma4[(i, i)] - 1.0).abs() > DIAGONAL_TOLERANCE) {
        return Err(CliError::Runtime(format!(
            "diagonal entry {} is {} instead of 1",
            i + 1,
            sigma4[(i, i)]
        )));
    }
    Ok(sigma4)
}

pub fn run_asymptotic_cov(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let sigma4 = compute_asymptotic_cov(cfg)?;
    let k = sigma4.nrows();
    let labels: Vec<String> = (1..=k).map(|i| i.to_string()).collect();
    let mut header = vec!["feature"];
    header.extend(labels.iter().map(String::as_str));
    let rows: Vec<Vec<Cell>> = (0..k)
        .map(|i| {
            let mut row: Vec<Cell> = vec![(i + 1).into()];
            row.extend((0..k).map(|j| Cell::from(sigma4[(i, j)])));
            row
        })
        .collect();

    let mut out = OutputSet::create(&cfg.output_dir)?;
    out.csv("sigma4.csv", &header, &rows)?;
    let matrix: Vec<Vec<f64>> = (0..k).map(|i| sigma4.row(i).iter().copied().collect()).collect();
    let summary = json!({
        "command": "asymptotic-cov",
        "k": k,
        "sigma4": matrix,
    });
    let files = out.finish("asymptotic-cov", cfg.full_echo(CommandKind::AsymptoticCov))?;
    Ok(RunReport { files, summary })
}
