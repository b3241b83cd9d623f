//! Dense direct solve of the coupled stage system, for small grids.
//!
//! All `s·N² + s` complex-valued unknowns are assembled into one real
//! system of size `2·s·N² + s` (the pairing `C̃` is only real-linear) and
//! solved by LU. Used to cross-check the Fourier-diagonal solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Integrator, SimulationState};
use crate::error::{Error, Result};
use crate::spectral::{CoeffField, Field};

/// Largest grid accepted by [`dense_solve_stages`].
pub const MAX_DENSE_N: usize = 16;

pub struct DenseSolution {
    pub u: Vec<CoeffField>,
    pub z: Vec<f64>,
}

pub fn dense_solve_stages(integ: &Integrator, state: &SimulationState, ubar: &[Field]) -> Result<DenseSolution> {
    let grid = integ.grid();
    if grid.n() > MAX_DENSE_N {
        return Err(Error::Precondition(format!("dense solve is limited to n ≤ {MAX_DENSE_N}")));
    }
    let t = integ.tableau();
    let ops = integ.ops();
    let (s, r) = (t.s(), t.r());
    let modes = grid.len();
    let w = integ.w_hat_for(ubar)?;
    let area = grid.area();
    let dim = 2 * s * modes + s;
    let re = |i: usize, m: usize| 2 * (i * modes + m);
    let zi = |i: usize| 2 * s * modes + i;

    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for i in 0..s {
        for m in 0..modes {
            let b = w[i][m] * ops.g_h[m];
            let mut hist = Complex64::default();
            for j in 0..r {
                hist += state.u_ext[j][m] * ops.p[(i, j)];
            }
            for part in 0..2 {
                let row = re(i, m) + part;
                for j in 0..s {
                    let mut v = ops.q[(i, j)];
                    if i == j {
                        v -= ops.sigma[m];
                    }
                    a[(row, re(j, m) + part)] = v;
                }
                a[(row, zi(i))] = -if part == 0 { b.re } else { b.im };
                rhs[row] = if part == 0 { hist.re } else { hist.im };
            }
        }
        let row = zi(i);
        let c_ii: f64 = area * (0..modes).map(|m| ops.g_h[m] * w[i][m].norm_sqr()).sum::<f64>();
        for j in 0..s {
            a[(row, zi(j))] = ops.q[(i, j)] - if i == j { c_ii / 2.0 } else { 0.0 };
        }
        for m in 0..modes {
            let k = -0.5 * area * ops.sigma[m];
            a[(row, re(i, m))] += k * w[i][m].re;
            a[(row, re(i, m) + 1)] += k * w[i][m].im;
        }
        rhs[row] = (0..r).map(|j| ops.p[(i, j)] * state.z_ext[j]).sum();
    }
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("dense stage system".into()))?;
    let u = (0..s)
        .map(|i| (0..modes).map(|m| Complex64::new(x[re(i, m)], x[re(i, m) + 1])).collect())
        .collect();
    let z = (0..s).map(|i| x[zi(i)]).collect();
    Ok(DenseSolution { u, z })
}
