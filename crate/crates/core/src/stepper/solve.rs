//! Fourier-diagonal stage solve.
//!
//! At every mode the stages satisfy
//!
//! ```text
//! [τ⁻¹D11⁻¹ − σ I] Û = τ⁻¹D11⁻¹D12 û + Z∘B,      σ = G_h L_h, B_i = G_h Ŵ_i
//! (τ⁻¹D11⁻¹ − C/2) Z = τ⁻¹D11⁻¹D12 z + C̃/2,     C = diag⟨Ŵ_i, G_h Ŵ_i⟩, C̃_i = ⟨Ŵ_i, σ Û_i⟩
//! ```
//!
//! The only coupling between modes is through the s scalars `C̃`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{inverse, SmallLu};
use crate::models::GradientFlowModel;
use crate::spectral::{CoeffField, Operator, SpectralGrid};
use crate::tableau::GltdTableau;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageMethod {
    /// Sweeps resolving the `Z`–`Û` coupling by fixed-point iteration.
    IncompleteIteration,
    /// Exact elimination of `Z` through `s + 1` per-mode solves.
    Elimination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: StageMethod,
    /// Absolute floor on the sweep increment `Σ_i ‖ΔÛ_i‖`.
    pub tol: f64,
    /// Increment tolerance relative to `Σ_i ‖Û_i‖`, for large fields.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Finish with [`StageMethod::Elimination`] instead of failing when
    /// the sweeps hit `max_iters`. Both solve the same linear system.
    pub fallback_to_elimination: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { method: StageMethod::IncompleteIteration, tol: 1e-12, rel_tol: 1e-14, max_iters: 200, fallback_to_elimination: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageSolveStats {
    pub iterations: usize,
    pub final_residual: f64,
    /// The sweeps stalled and the system was solved by elimination.
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub u: Vec<CoeffField>,
    pub z: Vec<f64>,
    /// `Ŵ_{n,i}`
    pub w: Vec<CoeffField>,
    pub stats: StageSolveStats,
}

/// Per-mode operators factored once per `(τ, tableau, model, grid)`.
#[derive(Debug, Clone)]
pub(crate) struct ModeOperators {
    pub s: usize,
    pub g_h: Vec<f64>,
    pub l_h: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `τ⁻¹D11⁻¹`
    pub q: DMatrix<f64>,
    /// `τ⁻¹D11⁻¹D12`
    pub p: DMatrix<f64>,
    lu: Vec<SmallLu>,
}

impl ModeOperators {
    pub fn new(t: &GltdTableau, model: &GradientFlowModel, grid: &SpectralGrid, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Precondition(format!("time step {tau} must be positive")));
        }
        let s = t.s();
        let q = inverse(t.d11())? / tau;
        let p = &q * t.d12();
        let g_h = grid.operator_symbol(model, Operator::G);
        let l_h = grid.operator_symbol(model, Operator::L);
        let sigma: Vec<f64> = g_h.iter().zip(&l_h).map(|(g, l)| g * l).collect();
        let mut lu = Vec::with_capacity(sigma.len());
        for &sg in &sigma {
            let mut a = Vec::with_capacity(s * s);
            for i in 0..s {
                for j in 0..s {
                    a.push(q[(i, j)] - if i == j { sg } else { 0.0 });
                }
            }
            lu.push(SmallLu::factor(s, a)?);
        }
        Ok(Self { s, g_h, l_h, sigma, q, p, lu })
    }

    /// Solves every mode's `s × s` system for `rhs(mode, stage)` and writes
    /// stage fields into `out`.
    fn solve_modes(&self, rhs: impl Fn(usize, usize) -> Complex64, out: &mut [CoeffField]) {
        let s = self.s;
        let mut buf = [Complex64::default(); 8];
        for (m, lu) in self.lu.iter().enumerate() {
            for (i, b) in buf.iter_mut().enumerate().take(s) {
                *b = rhs(m, i);
            }
            lu.solve_complex(&mut buf[..s]);
            for i in 0..s {
                out[i][m] = buf[i];
            }
        }
    }
}

pub(crate) struct StageInputs<'a> {
    pub u_ext: &'a [CoeffField],
    pub z_ext: &'a [f64],
    /// `Ū_{n,i}` in coefficient space, the first iterate.
    pub ubar_hat: &'a [CoeffField],
    pub w: Vec<CoeffField>,
}

fn coeff_norm(grid: &SpectralGrid, u: &[Complex64]) -> f64 {
    grid.coeff_norm_sq(u).sqrt()
}

pub(crate) fn solve(
    ops: &ModeOperators,
    grid: &SpectralGrid,
    opts: &SolverOptions,
    input: StageInputs<'_>,
) -> Result<StageSolution> {
    let s = ops.s;
    let r = input.u_ext.len();
    let modes = grid.len();
    let b: Vec<CoeffField> = input.w.iter().map(|w| crate::spectral::apply_symbol(&ops.g_h, w)).collect();
    let c_diag: Vec<f64> = (0..s).map(|i| grid.coeff_inner_product(&input.w[i], &b[i])).collect();
    let z_vec = DVector::from_column_slice(input.z_ext);
    let z_rhs = &ops.p * z_vec;
    let mut zmat = ops.q.clone();
    for i in 0..s {
        zmat[(i, i)] -= c_diag[i] / 2.0;
    }
    let z_lu = SmallLu::from_matrix(&zmat)?;

    // History part τ⁻¹D11⁻¹D12 û, fixed during the solve.
    let mut hist = vec![vec![Complex64::default(); modes]; s];
    for (i, h) in hist.iter_mut().enumerate() {
        for j in 0..r {
            let pij = ops.p[(i, j)];
            if pij != 0.0 {
                for (hm, um) in h.iter_mut().zip(&input.u_ext[j]) {
                    *hm += um * pij;
                }
            }
        }
    }

    let z_from = |c_tilde: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = (0..s).map(|i| z_rhs[i] + c_tilde[i] / 2.0).collect();
        z_lu.solve_real(&mut z);
        z
    };
    let c_tilde_of = |u: &[CoeffField]| -> Vec<f64> {
        (0..s).map(|i| grid.weighted_coeff_inner_product(&ops.sigma, &u[i], &input.w[i])).collect()
    };

    let eliminate = |u: &mut [CoeffField]| -> Result<()> {
        // Û = Û⁰ + Σ_j Z_j Φ_j with Φ_j solving the unit-Z problem.
        let mut u0 = vec![vec![Complex64::default(); modes]; s];
        ops.solve_modes(|m, i| hist[i][m], &mut u0);
        let mut phi = Vec::with_capacity(s);
        for j in 0..s {
            let mut f = vec![vec![Complex64::default(); modes]; s];
            ops.solve_modes(|m, i| if i == j { b[j][m] } else { Complex64::default() }, &mut f);
            phi.push(f);
        }
        let c0 = c_tilde_of(&u0);
        let mut k = zmat.clone();
        for i in 0..s {
            for j in 0..s {
                k[(i, j)] -= grid.weighted_coeff_inner_product(&ops.sigma, &phi[j][i], &input.w[i]) / 2.0;
            }
        }
        let mut z: Vec<f64> = (0..s).map(|i| z_rhs[i] + c0[i] / 2.0).collect();
        SmallLu::from_matrix(&k)?.solve_real(&mut z);
        for i in 0..s {
            for m in 0..modes {
                let mut v = u0[i][m];
                for (j, zj) in z.iter().enumerate() {
                    v += phi[j][i][m] * *zj;
                }
                u[i][m] = v;
            }
        }
        Ok(())
    };

    let uncoupled = input.w.iter().all(|w| w.iter().all(|v| *v == Complex64::default()));
    let mut u: Vec<CoeffField> = vec![vec![Complex64::default(); modes]; s];
    let stats = match opts.method {
        _ if uncoupled => {
            ops.solve_modes(|m, i| hist[i][m], &mut u);
            StageSolveStats { iterations: 1, ..Default::default() }
        }
        StageMethod::IncompleteIteration => {
            let mut current: Vec<CoeffField> = input.ubar_hat.to_vec();
            let mut stats = StageSolveStats::default();
            loop {
                let z = z_from(&c_tilde_of(&current));
                ops.solve_modes(|m, i| hist[i][m] + b[i][m] * z[i], &mut u);
                let mut diff = 0.0;
                let mut size = 0.0;
                for i in 0..s {
                    let d: Vec<Complex64> = u[i].iter().zip(&current[i]).map(|(a, c)| a - c).collect();
                    diff += coeff_norm(grid, &d);
                    size += coeff_norm(grid, &u[i]);
                }
                stats.iterations += 1;
                stats.final_residual = diff;
                std::mem::swap(&mut current, &mut u);
                if diff <= opts.tol.max(opts.rel_tol * size) {
                    break;
                }
                if stats.iterations >= opts.max_iters {
                    if !opts.fallback_to_elimination {
                        return Err(Error::NonConvergence { iterations: stats.iterations, residual: diff });
                    }
                    eliminate(&mut current)?;
                    stats.fell_back = true;
                    break;
                }
            }
            u = current;
            stats
        }
        StageMethod::Elimination => {
            eliminate(&mut u)?;
            StageSolveStats { iterations: 1, ..Default::default() }
        }
    };
    let z = z_from(&c_tilde_of(&u));
    Ok(StageSolution { u, z, w: input.w, stats })
}

/// Time derivatives `U̇_i = G_h∘(L_h∘Û_i + Z_i Ŵ_i)` and `Ż_i = ½⟨Ŵ_i, U̇_i⟩`.
pub(crate) fn stage_rates(ops: &ModeOperators, grid: &SpectralGrid, sol: &StageSolution) -> (Vec<CoeffField>, Vec<f64>) {
    let udot: Vec<CoeffField> = (0..ops.s)
        .map(|i| {
            sol.u[i]
                .iter()
                .zip(&sol.w[i])
                .enumerate()
                .map(|(m, (u, w))| (u * ops.l_h[m] + w * sol.z[i]) * ops.g_h[m])
                .collect()
        })
        .collect();
    let zdot = (0..ops.s).map(|i| 0.5 * grid.coeff_inner_product(&sol.w[i], &udot[i])).collect();
    (udot, zdot)
}

/// Largest relative residual of the un-split stage equations over all
/// stages, for both the field and the auxiliary component.
pub(crate) fn stage_residual(
    t: &GltdTableau,
    ops: &ModeOperators,
    grid: &SpectralGrid,
    tau: f64,
    u_ext: &[CoeffField],
    z_ext: &[f64],
    sol: &StageSolution,
) -> f64 {
    let (udot, zdot) = stage_rates(ops, grid, sol);
    let (s, r) = (t.s(), t.r());
    let mut worst = 0.0_f64;
    for i in 0..s {
        let mut res = sol.u[i].clone();
        for j in 0..s {
            let d = tau * t.d11()[(i, j)];
            for (o, v) in res.iter_mut().zip(&udot[j]) {
                *o -= v * d;
            }
        }
        for j in 0..r {
            let d = t.d12()[(i, j)];
            for (o, v) in res.iter_mut().zip(&u_ext[j]) {
                *o -= v * d;
            }
        }
        let scale = coeff_norm(grid, &sol.u[i]).max(1.0);
        worst = worst.max(coeff_norm(grid, &res) / scale);
        let zres = sol.z[i]
            - (0..s).map(|j| tau * t.d11()[(i, j)] * zdot[j]).sum::<f64>()
            - (0..r).map(|j| t.d12()[(i, j)] * z_ext[j]).sum::<f64>();
        worst = worst.max(zres.abs() / sol.z[i].abs().max(1.0));
    }
    worst
}
