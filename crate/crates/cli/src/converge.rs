//! Time-refinement studies against a fine reference solution.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{CsvWriter, Snapshot};
use crate::run::final_field;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub steps: usize,
    pub tau: f64,
    /// Discrete L² norm `√(h² Σ e²)` at `t_end`.
    pub error: f64,
    /// `ln(e_prev / e) / ln(K / K_prev)`; `None` on the first row.
    pub order: Option<f64>,
}

pub fn l2_distance(h: f64, a: &[f64], b: &[f64]) -> f64 {
    (h * h * a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>()).sqrt()
}

/// Observed orders between consecutive rows.
pub fn error_table(tau_and_errors: &[(usize, f64, f64)]) -> Vec<ErrorRow> {
    let mut rows: Vec<ErrorRow> = Vec::with_capacity(tau_and_errors.len());
    for &(steps, tau, error) in tau_and_errors {
        let order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (steps as f64 / prev.steps as f64).ln());
        rows.push(ErrorRow { steps, tau, error, order });
    }
    rows
}

fn check_steps(steps: &[usize]) -> CliResult<()> {
    if steps.is_empty() {
        return Err(CliError::Config("no step counts given for the refinement study".into()));
    }
    if steps.contains(&0) || steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!("step counts {steps:?} must be positive and increasing")));
    }
    Ok(())
}

/// Reference field at `t_end`: a stored snapshot when configured, else a
/// fresh fine run.
pub fn reference_field(cfg: &ExperimentConfig) -> CliResult<Vec<f64>> {
    match &cfg.reference.path {
        Some(path) => {
            let snap = Snapshot::read(path)?;
            if snap.n != cfg.n {
                return Err(CliError::Config(format!("reference {} has n = {}, run has {}", path.display(), snap.n, cfg.n)));
            }
            if (snap.length - cfg.length).abs() > 1e-12 * cfg.length {
                return Err(CliError::Config(format!("reference {} has L = {}, run has {}", path.display(), snap.length, cfg.length)));
            }
            if (snap.time - cfg.t_end).abs() > 1e-9 * cfg.t_end.max(1.0) {
                return Err(CliError::Config(format!(
                    "reference {} is at t = {}, run ends at {}",
                    path.display(),
                    snap.time,
                    cfg.t_end
                )));
            }
            Ok(snap.values)
        }
        None => final_field(&cfg.reference_run()?),
    }
}

/// Errors of `cfg` at each step count against a precomputed reference.
/// Runs execute in parallel on the current rayon pool.
pub fn convergence_against(cfg: &ExperimentConfig, steps: &[usize], reference: &[f64]) -> CliResult<Vec<ErrorRow>> {
    check_steps(steps)?;
    if reference.len() != cfg.n * cfg.n {
        return Err(CliError::Config(format!("reference has {} values, grid has {}", reference.len(), cfg.n * cfg.n)));
    }
    let h = cfg.length / cfg.n as f64;
    let results: Vec<(usize, f64, f64)> = steps
        .par_iter()
        .map(|&k| {
            let run = cfg.with_steps(k)?;
            let u = final_field(&run)?;
            Ok((k, run.tau, l2_distance(h, &u, reference)))
        })
        .collect::<CliResult<_>>()?;
    Ok(error_table(&results))
}

/// Reference run plus every refinement level, all in parallel.
pub fn run_convergence(cfg: &ExperimentConfig, steps: &[usize]) -> CliResult<Vec<ErrorRow>> {
    check_steps(steps)?;
    let (reference, coarse) = rayon::join(
        || reference_field(cfg),
        || {
            steps
                .par_iter()
                .map(|&k| {
                    let run = cfg.with_steps(k)?;
                    Ok((k, run.tau, final_field(&run)?))
                })
                .collect::<CliResult<Vec<_>>>()
        },
    );
    let reference = reference?;
    let h = cfg.length / cfg.n as f64;
    if reference.len() != cfg.n * cfg.n {
        return Err(CliError::Config("reference and run grids differ".into()));
    }
    let results: Vec<(usize, f64, f64)> =
        coarse?.into_iter().map(|(k, tau, u)| (k, tau, l2_distance(h, &u, &reference))).collect();
    Ok(error_table(&results))
}

pub fn write_error_table(path: &Path, rows: &[ErrorRow]) -> CliResult<PathBuf> {
    let mut csv = CsvWriter::create(path, "K,tau,error,order")?;
    for row in rows {
        csv.row_with_count(row.steps, &[row.tau, row.error, row.order.unwrap_or(f64::NAN)])?;
    }
    csv.finish()
}
