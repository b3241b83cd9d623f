//! Single simulation runs with streamed diagnostics.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use savgl::stepper::dense::{dense_solve_stages, MAX_DENSE_N};
use savgl::stepper::{Integrator, SimulationState};

use crate::config::ExperimentConfig;
use crate::init::initial_field;
use crate::output::{CsvWriter, Snapshot};
use crate::{CliError, CliResult};

/// Agreement required between the fast and dense stage solves, and of the
/// un-split stage residual, under `--oracle`.
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub mass: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub final_field: Vec<f64>,
    pub max_stage_iterations: usize,
    /// Steps whose stage sweeps were finished by elimination.
    pub stage_fallbacks: usize,
    /// Stage solves cross-checked against the dense oracle.
    pub oracle_checks: usize,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub wall_time: Duration,
    /// One per emitted row, starting at `t = 0`.
    pub records: Vec<Record>,
    pub energy_csv: PathBuf,
    pub mass_csv: PathBuf,
    pub extrema_csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

pub fn integrator(cfg: &ExperimentConfig) -> CliResult<Integrator> {
    let tableau = cfg.scheme.load()?;
    if tableau.certificate().is_none() {
        return Err(CliError::Config(format!(
            "tableau `{}` has no G/H weights, so its discrete energy is undefined",
            tableau.name()
        )));
    }
    Integrator::with_options(tableau, cfg.gradient_flow()?, cfg.grid()?, cfg.tau, cfg.solver)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn record(integ: &Integrator, state: &SimulationState, mass0: f64) -> CliResult<Record> {
    let solver = |source| CliError::Solver { step: state.step_index, source };
    let field = state.solution(integ.grid()).map_err(solver)?;
    let (min, max) = extrema(&field);
    Ok(Record {
        step: state.step_index,
        time: state.time(),
        energy: integ.discrete_energy(state).map_err(solver)?,
        mass: integ.total_mass(state) - mass0,
        max,
        min,
    })
}

fn extrema(field: &[f64]) -> (f64, f64) {
    field.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Cross-checks the next stage solve. Returns `false` when the step has no
/// explicit predictors yet and runs the nonlinear variant instead.
fn oracle_check(integ: &Integrator, state: &SimulationState) -> CliResult<bool> {
    let step = state.step_index + 1;
    let solver = |source| CliError::Solver { step, source };
    let ubar = match integ.extrapolate_stages(state) {
        Ok(ubar) => ubar,
        Err(savgl::Error::StartupRequired(_)) => return Ok(false),
        Err(e) => return Err(solver(e)),
    };
    let fast = integ.solve_stages(state, &ubar).map_err(solver)?;
    let dense = dense_solve_stages(integ, state, &ubar).map_err(solver)?;
    let grid = integ.grid();
    for (i, (a, b)) in fast.u.iter().zip(&dense.u).enumerate() {
        let diff: Vec<_> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        let rel = grid.coeff_norm_sq(&diff).sqrt() / grid.coeff_norm_sq(b).sqrt().max(f64::MIN_POSITIVE);
        if rel > ORACLE_TOL {
            return Err(CliError::Verification(format!("step {step}: stage {i} differs from dense solve by {rel:e}")));
        }
    }
    for (i, (a, b)) in fast.z.iter().zip(&dense.z).enumerate() {
        if (a - b).abs() > ORACLE_TOL * b.abs() {
            return Err(CliError::Verification(format!("step {step}: Z_{i} = {a} but dense solve gives {b}")));
        }
    }
    let residual = integ.stage_residual(state, &fast);
    if residual > ORACLE_TOL {
        return Err(CliError::Verification(format!("step {step}: stage residual {residual:e}")));
    }
    Ok(true)
}

/// Runs `cfg` from `t = 0` to `t_end`, handing each diagnostic row and the
/// state it came from to `observe`.
pub fn drive(
    cfg: &ExperimentConfig,
    oracle: bool,
    mut observe: impl FnMut(&Integrator, &SimulationState, &Record) -> CliResult<()>,
) -> CliResult<RunSummary> {
    let integ = integrator(cfg)?;
    if oracle && cfg.n > MAX_DENSE_N {
        return Err(CliError::Config(format!("--oracle needs grid.n ≤ {MAX_DENSE_N}, got {}", cfg.n)));
    }
    let u0 = initial_field(&cfg.init, integ.grid())?;
    let start = integ.initial_state(&u0).map_err(|source| CliError::Solver { step: 0, source })?;
    let mass0 = integ.total_mass(&start);
    observe(&integ, &start, &record(&integ, &start, mass0)?)?;

    let mut summary = RunSummary {
        steps: cfg.steps,
        final_time: 0.0,
        final_field: u0.clone(),
        max_stage_iterations: 0,
        stage_fallbacks: 0,
        oracle_checks: 0,
    };
    if cfg.steps == 0 {
        return Ok(summary);
    }

    let mut state = integ.startup(&u0).map_err(|source| CliError::Solver { step: 1, source })?;
    if state.step_index > cfg.steps {
        return Err(CliError::Config(format!(
            "startup of `{}` covers {} steps but the run has only {}",
            integ.tableau().name(),
            state.step_index,
            cfg.steps
        )));
    }
    if state.step_index > 0 {
        observe(&integ, &state, &record(&integ, &state, mass0)?)?;
    }
    while state.step_index < cfg.steps {
        if oracle && oracle_check(&integ, &state)? {
            summary.oracle_checks += 1;
        }
        let step = state.step_index + 1;
        let diag = integ.advance(&mut state).map_err(|source| CliError::Solver { step, source })?;
        summary.max_stage_iterations = summary.max_stage_iterations.max(diag.stage_iterations);
        summary.stage_fallbacks += usize::from(diag.stage_fallback);
        let row = Record {
            step: diag.step_index,
            time: diag.time,
            energy: diag.energy,
            mass: diag.mass - mass0,
            max: diag.max,
            min: diag.min,
        };
        observe(&integ, &state, &row)?;
    }
    summary.final_time = state.time();
    summary.final_field = state.solution(integ.grid()).map_err(|source| CliError::Solver { step: cfg.steps, source })?;
    Ok(summary)
}

/// Final field of `cfg` without writing anything.
pub fn final_field(cfg: &ExperimentConfig) -> CliResult<Vec<f64>> {
    Ok(drive(cfg, false, |_, _, _| Ok(()))?.final_field)
}

/// Step index closest to each requested snapshot time.
fn snapshot_steps(cfg: &ExperimentConfig) -> CliResult<Vec<usize>> {
    let mut steps = Vec::new();
    for &t in &cfg.outputs.snapshots {
        if t < 0.0 || t > cfg.t_end * (1.0 + 1e-12) + 1e-12 {
            return Err(CliError::Config(format!("snapshot time {t} lies outside [0, {}]", cfg.t_end)));
        }
        let k = if cfg.steps == 0 { 0 } else { ((t / cfg.tau).round() as usize).min(cfg.steps) };
        steps.push(k);
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))
}

/// Runs `cfg`, writing the three CSVs and the requested snapshots under
/// `out_dir`.
pub fn run_simulation(cfg: &ExperimentConfig, out_dir: &Path, oracle: bool) -> CliResult<RunReport> {
    create_dir(out_dir)?;
    let wanted = snapshot_steps(cfg)?;
    let mut energy = CsvWriter::create(&out_dir.join(&cfg.outputs.energy_csv), "t,energy")?;
    let mut mass = CsvWriter::create(&out_dir.join(&cfg.outputs.mass_csv), "t,mass_difference")?;
    let mut extrema = CsvWriter::create(&out_dir.join(&cfg.outputs.extrema_csv), "t,max,min")?;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();

    let began = Instant::now();
    let summary = drive(cfg, oracle, |integ, state, row| {
        energy.row(&[row.time, row.energy])?;
        mass.row(&[row.time, row.mass])?;
        extrema.row(&[row.time, row.max, row.min])?;
        records.push(*row);
        if wanted.binary_search(&row.step).is_ok() {
            let grid = integ.grid();
            let snap = Snapshot {
                n: grid.n(),
                length: grid.domain_length(),
                time: row.time,
                values: state.solution(grid).map_err(|source| CliError::Solver { step: row.step, source })?,
            };
            let stem = format!("snapshot_{:06}", row.step);
            let path = out_dir.join(format!("{stem}.csv"));
            snap.write_text(&path)?;
            snapshots.push(path);
            if cfg.outputs.raw_snapshots {
                let raw = out_dir.join(format!("{stem}.bin"));
                snap.write_raw(&raw)?;
                snapshots.push(raw);
            }
        }
        Ok(())
    })?;
    let wall_time = began.elapsed();

    Ok(RunReport {
        summary,
        wall_time,
        records,
        energy_csv: energy.finish()?,
        mass_csv: mass.finish()?,
        extrema_csv: extrema.finish()?,
        snapshots,
    })
}
