//! Solvers for the nonlinear stage fixed point `x = P(x)`, where `P` maps
//! physical stage predictors to the stage values they produce.
//!
//! Anderson mixing handles the usual mildly contractive case. When it
//! stalls, a Jacobian-free Newton–Krylov iteration takes over: GMRES on
//! `(P'(x) − I) d = x − P(x)` with finite-difference products and a
//! backtracking line search on `‖P(x) − x‖`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Past increments mixed into each Anderson iterate.
pub const ANDERSON_DEPTH: usize = 12;
/// Anderson sweeps before switching to Newton–Krylov.
pub const ANDERSON_SWEEPS: usize = 40;
/// Krylov subspace dimension per Newton step (no restarts).
pub const KRYLOV_DIM: usize = 40;
const LINE_SEARCH_HALVINGS: usize = 8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// Anderson mixing for `x ← g(x)`: the next iterate is `g_k − ΔG γ` with
/// `γ` minimizing `‖f_k − ΔF γ‖`, `f = g(x) − x`.
pub struct Anderson {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    dg: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Self { depth, last: None, dg: Vec::new(), df: Vec::new() }
    }

    pub fn next(&mut self, g: &[f64], f: &[f64]) -> Vec<f64> {
        if let Some((g_old, f_old)) = self.last.take() {
            self.dg.push(g.iter().zip(&g_old).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&f_old).map(|(a, b)| a - b).collect());
            if self.dg.len() > self.depth {
                self.dg.remove(0);
                self.df.remove(0);
            }
        }
        let mut out = g.to_vec();
        let m = self.df.len();
        if m > 0 {
            let a = DMatrix::from_fn(f.len(), m, |i, j| self.df[j][i]);
            let svd = a.svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.max();
            if let Ok(gamma) = svd.solve(&DVector::from_column_slice(f), cutoff) {
                for (j, col) in self.dg.iter().enumerate() {
                    axpy(-gamma[j], col, &mut out);
                }
            }
        }
        self.last = Some((g.to_vec(), f.to_vec()));
        out
    }
}

/// GMRES for `A d = b` from `d = 0`, stopping at relative residual `eta`.
fn gmres(mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>, b: &[f64], eta: f64, dim: usize) -> Result<Vec<f64>> {
    let beta = norm2(b);
    let mut d = vec![0.0; b.len()];
    if beta == 0.0 {
        return Ok(d);
    }
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / beta).collect()];
    // Hessenberg columns after Givens rotations, and the rotated rhs.
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut rot: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    for k in 0..dim {
        let mut w = apply(&basis[k])?;
        let mut col = Vec::with_capacity(k + 2);
        for v in &basis {
            let hij = dot(&w, v);
            axpy(-hij, v, &mut w);
            col.push(hij);
        }
        let wn = norm2(&w);
        col.push(wn);
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = c * a + s * b;
            col[i + 1] = -s * a + c * b;
        }
        let r = col[k].hypot(col[k + 1]);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (col[k] / r, col[k + 1] / r) };
        col[k] = r;
        col[k + 1] = 0.0;
        rot.push((c, s));
        g.push(-s * g[k]);
        g[k] *= c;
        h.push(col);
        let done = g[k + 1].abs() <= eta * beta || wn <= 1e-14 * beta;
        if !done {
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        if done || k + 1 == dim {
            break;
        }
    }
    // Back substitution on the triangular factor.
    let m = h.len();
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut acc = g[i];
        for j in i + 1..m {
            acc -= h[j][i] * y[j];
        }
        y[i] = if h[i][i] != 0.0 { acc / h[i][i] } else { 0.0 };
    }
    for (yi, v) in y.iter().zip(&basis) {
        axpy(*yi, v, &mut d);
    }
    Ok(d)
}

/// Outcome of [`solve_fixed_point`].
pub struct FixedPoint<T> {
    /// `P(x)` at the accepted iterate, with its payload.
    pub image: Vec<f64>,
    pub payload: T,
    /// Outer iterations: Anderson sweeps plus Newton steps.
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Finds `x = P(x)` starting from `x0`. `map` returns `P(x)` plus a payload
/// kept for the accepted iterate; `tol(image)` is the acceptance threshold
/// on `norm(P(x) − x)`.
pub fn solve_fixed_point<T: Clone>(
    x0: Vec<f64>,
    max_iters: usize,
    norm: impl Fn(&[f64]) -> f64,
    tol: impl Fn(&[f64]) -> f64,
    mut map: impl FnMut(&[f64]) -> Result<(Vec<f64>, T)>,
) -> Result<FixedPoint<T>> {
    let mut x = x0;
    let (mut image, mut payload) = map(&x)?;
    let diff = |px: &[f64], x: &[f64]| -> Vec<f64> { px.iter().zip(x).map(|(a, b)| a - b).collect() };
    let mut f = diff(&image, &x);
    let mut residual = norm(&f);
    let mut accel = Anderson::new(ANDERSON_DEPTH);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>, T)> = None;
    let mut k = 1;
    while residual > tol(&image) && k < max_iters.min(ANDERSON_SWEEPS) {
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, x.clone(), image.clone(), f.clone(), payload.clone()));
        }
        x = accel.next(&image, &f);
        (image, payload) = map(&x)?;
        f = diff(&image, &x);
        residual = norm(&f);
        k += 1;
    }
    if residual <= tol(&image) {
        return Ok(FixedPoint { image, payload, iterations: k, converged: true, residual });
    }
    // Newton starts from the best Anderson iterate.
    if let Some((r, bx, bimage, bf, bpayload)) = best {
        if r < residual {
            (residual, x, image, f, payload) = (r, bx, bimage, bf, bpayload);
        }
    }

    // Newton–Krylov on F(x) = P(x) − x.
    while k < max_iters && residual > tol(&image) {
        k += 1;
        let scale = norm2(&x).max(1.0);
        let fx = f.clone();
        let base = image.clone();
        let eta = (0.1_f64).min(residual.sqrt());
        let step = gmres(
            |v| {
                let eps = 1e-7 * scale / norm2(v).max(f64::MIN_POSITIVE);
                let probe: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + eps * b).collect();
                let (pv, _) = map(&probe)?;
                Ok(pv.iter().zip(&base).zip(v).map(|((p, q), vi)| (p - q) / eps - vi).collect())
            },
            &fx.iter().map(|v| -v).collect::<Vec<_>>(),
            eta,
            KRYLOV_DIM,
        )?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=LINE_SEARCH_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            let (timage, tpayload) = map(&trial)?;
            let tf = diff(&timage, &trial);
            let tr = norm(&tf);
            if tr < (1.0 - 1e-4 * lambda) * residual {
                x = trial;
                image = timage;
                payload = tpayload;
                f = tf;
                residual = tr;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let converged = residual <= tol(&image);
    Ok(FixedPoint { image, payload, iterations: k, converged, residual })
}
