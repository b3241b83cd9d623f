//! The fully discrete SAV-GL integrator.
//!
//! One step from `(û^{[n]}, z^{[n]})`:
//!
//! 1. extrapolate the stage predictors `Ū_{n,i}` from past values;
//! 2. evaluate `Ŵ_{n,i} = F[δF1/δu(Ū_{n,i}) / √(F1(Ū_{n,i}) + C0)]`;
//! 3. solve the linear stage system for `(Û_{n,i}, Z_{n,i})`;
//! 4. update `û^{[n+1]} = τ D21 U̇ + D22 û^{[n]}` and the same for `z`.
//!
//! Steps without enough history use the nonlinear variant, iterating
//! `Ū ← U` to a fixed point.

pub mod dense;
mod extrapolate;
mod nonlinear;
mod solve;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::GradientFlowModel;
use crate::spectral::{CoeffField, Field, SpectralGrid};
use crate::tableau::{one_leg_scaling_vectors, one_leg_theta, GltdTableau};

pub use extrapolate::lagrange_weights;
pub use solve::{SolverOptions, StageMethod, StageSolution, StageSolveStats};

use solve::{ModeOperators, StageInputs};

/// Tolerance floor of the nonlinear fixed point, absolute and relative.
pub const NONLINEAR_TOL: f64 = 1e-13;
pub const NONLINEAR_MAX_ITERS: usize = 100;
/// Substep counts tried, in order, when the direct startup solve fails.
pub const CONTINUATION_LEVELS: [usize; 2] = [4, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    /// `û_i^{[n]}`, `i = 1..r`.
    pub u_ext: Vec<CoeffField>,
    pub z_ext: Vec<f64>,
    /// `Û_{n-1,i}`; empty before the first step.
    pub u_stage_prev: Vec<CoeffField>,
    /// `û_1^{[n-1]}`; `None` before the first step.
    pub prev_input: Option<CoeffField>,
    pub step_index: usize,
    pub tau: f64,
}

impl SimulationState {
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.tau
    }

    /// Physical field of the leading external value `u^n`.
    pub fn solution(&self, grid: &SpectralGrid) -> Result<Field> {
        grid.inverse(&self.u_ext[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step_index: usize,
    pub time: f64,
    pub energy: f64,
    pub mass: f64,
    pub max: f64,
    pub min: f64,
    pub stage_iterations: usize,
    pub stage_residual: f64,
    /// The sweeps hit their budget and the step was finished by elimination.
    pub stage_fallback: bool,
    /// Outer sweeps when the nonlinear variant ran, else 0.
    pub nonlinear_iterations: usize,
}

/// A tableau bound to a model, a grid and a time step, with the per-mode
/// factorizations cached.
#[derive(Debug, Clone)]
pub struct Integrator {
    tableau: GltdTableau,
    model: GradientFlowModel,
    grid: SpectralGrid,
    tau: f64,
    c0: f64,
    options: SolverOptions,
    ops: ModeOperators,
}

impl Integrator {
    pub fn new(tableau: GltdTableau, model: GradientFlowModel, grid: SpectralGrid, tau: f64) -> Result<Self> {
        Self::with_options(tableau, model, grid, tau, SolverOptions::default())
    }

    pub fn with_options(
        tableau: GltdTableau,
        model: GradientFlowModel,
        grid: SpectralGrid,
        tau: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        if tableau.s() > 8 {
            return Err(Error::Precondition(format!("at most 8 stages are supported, got {}", tableau.s())));
        }
        let ops = ModeOperators::new(&tableau, &model, &grid, tau)?;
        let c0 = model.c0(&grid);
        Ok(Self { tableau, model, grid, tau, c0, options, ops })
    }

    pub fn tableau(&self) -> &GltdTableau {
        &self.tableau
    }
    pub fn model(&self) -> &GradientFlowModel {
        &self.model
    }
    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// State at `n = 0` with only `u^0` known. Multi-value tableaus need
    /// [`Integrator::startup`] before they can advance.
    pub fn initial_state(&self, u0: &[f64]) -> Result<SimulationState> {
        let z0 = self.model.sav_init(&self.grid, u0)?;
        let u0_hat = self.grid.forward(u0);
        let r = self.tableau.r();
        Ok(SimulationState {
            u_ext: vec![u0_hat; r],
            z_ext: vec![z0; r],
            u_stage_prev: Vec::new(),
            prev_input: None,
            step_index: 0,
            tau: self.tau,
        })
    }

    /// Builds a state ready for [`Integrator::advance`].
    ///
    /// * `r = 1`, `s = 1`: nothing beyond `z^0`; the first advance runs the
    ///   nonlinear variant.
    /// * `r = 1`, `s ≥ 2`: one nonlinear step of the scheme itself, which
    ///   also supplies the stage history.
    /// * `r ≥ 2`: `r - 1` nonlinear Crank–Nicolson steps generate the lagged
    ///   values `u^1, …, u^{r-1}` of the one-leg history convention.
    pub fn startup(&self, u0: &[f64]) -> Result<SimulationState> {
        let mut state = self.initial_state(u0)?;
        let r = self.tableau.r();
        if r == 1 {
            if self.tableau.s() >= 2 {
                self.advance(&mut state)?;
            }
            return Ok(state);
        }
        if self.tableau.w() != &one_leg_scaling_vectors(r, self.tableau.p()) {
            return Err(Error::Precondition(
                "startup supports multi-value tableaus in the one-leg history convention only".into(),
            ));
        }
        let companion = Integrator::with_options(
            one_leg_theta(0.5)?,
            self.model.clone(),
            self.grid.clone(),
            self.tau,
            self.options,
        )?;
        let mut history = vec![state.u_ext[0].clone()];
        let mut z_history = vec![state.z_ext[0]];
        let mut single = companion.initial_state(u0)?;
        for _ in 1..r {
            companion.advance(&mut single)?;
            history.push(single.u_ext[0].clone());
            z_history.push(single.z_ext[0]);
        }
        history.reverse();
        z_history.reverse();
        state.prev_input = Some(history[1].clone());
        state.u_ext = history;
        state.z_ext = z_history;
        state.step_index = r - 1;
        Ok(state)
    }

    /// Physical stage predictors `Ū_{n,i}`.
    pub fn extrapolate_stages(&self, state: &SimulationState) -> Result<Vec<Field>> {
        extrapolate::extrapolate_coeffs(&self.tableau, state)?
            .iter()
            .map(|c| self.grid.inverse(c))
            .collect()
    }

    fn w_hat(&self, ubar: &[Field]) -> Result<Vec<CoeffField>> {
        ubar.iter()
            .map(|u| {
                let z_ref = self.model.sav_value(&self.grid, u)?;
                Ok(self.grid.forward(&self.model.sav_w(&self.grid, u, z_ref)?))
            })
            .collect()
    }

    fn check_state(&self, state: &SimulationState) -> Result<()> {
        if state.u_ext.len() != self.tableau.r() || state.z_ext.len() != self.tableau.r() {
            return Err(Error::Structural(format!(
                "state holds {} external values, tableau needs {}",
                state.u_ext.len(),
                self.tableau.r()
            )));
        }
        if state.tau != self.tau {
            return Err(Error::Precondition(format!("state step {} differs from integrator step {}", state.tau, self.tau)));
        }
        Ok(())
    }

    fn solve_from(&self, state: &SimulationState, ubar: &[Field], ubar_hat: &[CoeffField]) -> Result<StageSolution> {
        let input = StageInputs { u_ext: &state.u_ext, z_ext: &state.z_ext, ubar_hat, w: self.w_hat(ubar)? };
        solve::solve(&self.ops, &self.grid, &self.options, input)
    }

    /// Solves the linear stage system for given physical predictors.
    pub fn solve_stages(&self, state: &SimulationState, ubar: &[Field]) -> Result<StageSolution> {
        self.check_state(state)?;
        if ubar.len() != self.tableau.s() {
            return Err(Error::Structural(format!("{} predictors for {} stages", ubar.len(), self.tableau.s())));
        }
        let ubar_hat: Vec<CoeffField> = ubar.iter().map(|u| self.grid.forward(u)).collect();
        self.solve_from(state, ubar, &ubar_hat)
    }

    /// Relative residual of the un-split stage equations.
    pub fn stage_residual(&self, state: &SimulationState, sol: &StageSolution) -> f64 {
        solve::stage_residual(&self.tableau, &self.ops, &self.grid, self.tau, &state.u_ext, &state.z_ext, sol)
    }

    /// Stage solve with `Ū = U` iterated to a fixed point, starting from `u^n`.
    /// The iteration runs on physical stage values; see [`nonlinear`].
    pub fn solve_stages_nonlinear(&self, state: &SimulationState) -> Result<(StageSolution, usize)> {
        self.check_state(state)?;
        let u0 = self.grid.inverse(&state.u_ext[0])?;
        let x0: Vec<f64> = (0..self.tableau.s()).flat_map(|_| u0.iter().copied()).collect();
        let direct = self.fixed_point_from(state, x0.clone())?;
        if direct.converged {
            return Ok((direct.payload, direct.iterations));
        }
        // Continuation in τ: the stages solved at τ·j/J seed the solve at
        // τ·(j+1)/J. Only the initial guess changes; the final system is the
        // one at τ.
        let mut iterations = direct.iterations;
        for &levels in &CONTINUATION_LEVELS {
            let mut x = x0.clone();
            let mut reached = None;
            for j in 1..=levels {
                let tau = self.tau * j as f64 / levels as f64;
                let out = if j == levels {
                    self.fixed_point_from(state, x)?
                } else {
                    let sub = Self::with_options(
                        self.tableau.clone(),
                        self.model.clone(),
                        self.grid.clone(),
                        tau,
                        self.options,
                    )?;
                    sub.fixed_point_from(&SimulationState { tau, ..state.clone() }, x)?
                };
                iterations += out.iterations;
                if !out.converged {
                    break;
                }
                x = out.image;
                if j == levels {
                    reached = Some(out.payload);
                }
            }
            if let Some(sol) = reached {
                return Ok((sol, iterations));
            }
        }
        Err(Error::Startup { iterations, residual: direct.residual })
    }

    fn fixed_point_from(&self, state: &SimulationState, x0: Vec<f64>) -> Result<nonlinear::FixedPoint<StageSolution>> {
        let s = self.tableau.s();
        let m = self.grid.len();
        let h2 = self.grid.h() * self.grid.h();
        let norm = |v: &[f64]| -> f64 { v.chunks(m).map(|c| (h2 * c.iter().map(|a| a * a).sum::<f64>()).sqrt()).sum() };
        nonlinear::solve_fixed_point(
            x0,
            NONLINEAR_MAX_ITERS,
            norm,
            |image| NONLINEAR_TOL.max(NONLINEAR_TOL * norm(image)),
            |x| {
                let ubar: Vec<Field> = x.chunks(m).map(<[f64]>::to_vec).collect();
                let ubar_hat: Vec<CoeffField> = ubar.iter().map(|u| self.grid.forward(u)).collect();
                let sol = self.solve_from(state, &ubar, &ubar_hat)?;
                let mut image = Vec::with_capacity(s * m);
                for u in &sol.u {
                    image.extend(self.grid.inverse(u)?);
                }
                Ok((image, sol))
            },
        )
    }

    /// New external values from a stage solution.
    pub fn external_update(&self, state: &SimulationState, sol: &StageSolution) -> (Vec<CoeffField>, Vec<f64>) {
        let t = &self.tableau;
        let (udot, zdot) = solve::stage_rates(&self.ops, &self.grid, sol);
        let modes = self.grid.len();
        let mut u_new = Vec::with_capacity(t.r());
        let mut z_new = Vec::with_capacity(t.r());
        for i in 0..t.r() {
            let mut f = vec![Complex64::default(); modes];
            let mut z = 0.0;
            for j in 0..t.s() {
                let d = self.tau * t.d21()[(i, j)];
                if d != 0.0 {
                    for (o, v) in f.iter_mut().zip(&udot[j]) {
                        *o += v * d;
                    }
                    z += d * zdot[j];
                }
            }
            for j in 0..t.r() {
                let d = t.d22()[(i, j)];
                if d != 0.0 {
                    for (o, v) in f.iter_mut().zip(&state.u_ext[j]) {
                        *o += v * d;
                    }
                    z += d * state.z_ext[j];
                }
            }
            u_new.push(f);
            z_new.push(z);
        }
        (u_new, z_new)
    }

    /// Advances one step. Single-value tableaus lacking history fall back to
    /// the nonlinear variant.
    pub fn advance(&self, state: &mut SimulationState) -> Result<StepDiagnostics> {
        self.check_state(state)?;
        let (sol, nonlinear_iterations) = match extrapolate::extrapolate_coeffs(&self.tableau, state) {
            Ok(ubar_hat) => {
                let ubar: Vec<Field> = ubar_hat.iter().map(|c| self.grid.inverse(c)).collect::<Result<_>>()?;
                (self.solve_from(state, &ubar, &ubar_hat)?, 0)
            }
            Err(Error::StartupRequired(_)) if self.tableau.r() == 1 => self.solve_stages_nonlinear(state)?,
            Err(e) => return Err(e),
        };
        let (u_new, z_new) = self.external_update(state, &sol);
        let old = std::mem::replace(&mut state.u_ext, u_new);
        state.prev_input = old.into_iter().next();
        state.z_ext = z_new;
        state.step_index += 1;
        let stats = sol.stats;
        state.u_stage_prev = sol.u;

        let field = state.solution(&self.grid)?;
        let (min, max) = field.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Ok(StepDiagnostics {
            step_index: state.step_index,
            time: state.time(),
            energy: self.discrete_energy(state)?,
            mass: self.total_mass(state),
            max,
            min,
            stage_iterations: stats.iterations,
            stage_residual: stats.final_residual,
            stage_fallback: stats.fell_back,
            nonlinear_iterations,
        })
    }

    /// `Υ = ½ Σ g_ij ⟨L_h∘û_i, û_j⟩ + Σ g_ij z_i z_j − C0`.
    pub fn discrete_energy(&self, state: &SimulationState) -> Result<f64> {
        let cert = self
            .tableau
            .certificate()
            .ok_or_else(|| Error::Structural(format!("tableau `{}` carries no G matrix", self.tableau.name())))?;
        let r = self.tableau.r();
        let mut quad = 0.0;
        let mut aux = 0.0;
        for i in 0..r {
            for j in 0..r {
                let g = cert.g[(i, j)];
                if g != 0.0 {
                    quad += g * self.grid.weighted_coeff_inner_product(&self.ops.l_h, &state.u_ext[i], &state.u_ext[j]);
                    aux += g * state.z_ext[i] * state.z_ext[j];
                }
            }
        }
        Ok(0.5 * quad + aux - self.c0)
    }

    /// `h² Σ u` of the leading external value.
    pub fn total_mass(&self, state: &SimulationState) -> f64 {
        total_mass(&self.grid, state)
    }

    pub(crate) fn ops(&self) -> &ModeOperators {
        &self.ops
    }

    pub(crate) fn w_hat_for(&self, ubar: &[Field]) -> Result<Vec<CoeffField>> {
        self.w_hat(ubar)
    }
}

pub fn total_mass(grid: &SpectralGrid, state: &SimulationState) -> f64 {
    grid.area() * state.u_ext[0][0].re
}

#[cfg(test)]
mod tests;
