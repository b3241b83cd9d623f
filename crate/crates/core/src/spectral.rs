//! Periodic Fourier collocation on the square `[0, L)²`.
//!
//! Physical fields are row-major `u[i * n + j] = u(x_i, y_j)`. Coefficient
//! fields use the same layout in transform storage order: index `k` holds
//! wavenumber `m = k` for `k < n/2` and `m = k - n` otherwise, so the
//! Nyquist index `n/2` carries `m = -n/2`. Coefficients follow
//! `û = (1/N²) Σ u e^{-i(ξx + ηy)}`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::models::GradientFlowModel;

/// Relative size of discarded imaginary parts on inverse transforms.
pub const IMAG_TOL: f64 = 1e-12;

pub type Field = Vec<f64>;
pub type CoeffField = Vec<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    L,
    G,
}

#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    length: f64,
    h: f64,
    xi: Vec<f64>,
    /// `ξ² + η²` per mode.
    k2: Vec<f64>,
    lap: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).field("length", &self.length).finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl SpectralGrid {
    /// `n` must be even and positive, or 1 for a single-mode grid.
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n == 0 || (n != 1 && n % 2 != 0) {
            return Err(Error::Precondition(format!("grid size n = {n} must be even")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Precondition(format!("domain length {length} must be positive")));
        }
        let xi: Vec<f64> = (0..n)
            .map(|k| {
                let m = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
                2.0 * std::f64::consts::PI * m / length
            })
            .collect();
        let mut k2 = Vec::with_capacity(n * n);
        for a in &xi {
            for b in &xi {
                k2.push(a * a + b * b);
            }
        }
        let lap = k2.iter().map(|v| -v).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            length,
            h: length / n as f64,
            xi,
            k2,
            lap,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn len(&self) -> usize {
        self.n * self.n
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn domain_length(&self) -> f64 {
        self.length
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn area(&self) -> f64 {
        self.length * self.length
    }
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }
    /// `ξ_m² + η_l²` per mode.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }
    /// `-(ξ_m² + η_l²)` per mode.
    pub fn lap_symbol(&self) -> &[f64] {
        &self.lap
    }

    /// Grid coordinates `(x_i, y_j)` of flat index `idx`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        ((idx / self.n) as f64 * self.h, (idx % self.n) as f64 * self.h)
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        (0..self.len()).map(|idx| {
            let (x, y) = self.point(idx);
            f(x, y)
        })
        .collect()
    }

    /// Flat coefficient index of signed wavenumbers `(m, l)`.
    pub fn mode_index(&self, m: i64, l: i64) -> usize {
        let n = self.n as i64;
        let wrap = |k: i64| k.rem_euclid(n) as usize;
        wrap(m) * self.n + wrap(l)
    }

    fn transform_2d(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
    }

    pub fn forward(&self, u: &[f64]) -> CoeffField {
        assert_eq!(u.len(), self.len(), "field does not match grid");
        let mut data: CoeffField = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_2d(&mut data, &self.fwd);
        let scale = 1.0 / self.len() as f64;
        for v in &mut data {
            *v *= scale;
        }
        data
    }

    pub fn inverse(&self, uhat: &[Complex64]) -> Result<Field> {
        let data = self.inverse_complex(uhat);
        let mut max_abs = 0.0_f64;
        let mut max_im = 0.0_f64;
        for v in &data {
            max_abs = max_abs.max(v.norm());
            max_im = max_im.max(v.im.abs());
        }
        if max_im > IMAG_TOL * max_abs {
            return Err(Error::Symmetry { residual: max_im / max_abs });
        }
        Ok(data.into_iter().map(|v| v.re).collect())
    }

    /// Inverse transform without the realness check.
    pub fn inverse_complex(&self, uhat: &[Complex64]) -> CoeffField {
        assert_eq!(uhat.len(), self.len(), "coefficient field does not match grid");
        let mut data = uhat.to_vec();
        self.transform_2d(&mut data, &self.inv);
        data
    }

    /// `⟨u, v⟩ = h² Σ u_ij v_ij`.
    pub fn inner_product(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), v.len());
        self.h * self.h * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `L² Re Σ û conj(v̂)`, equal to [`Self::inner_product`] of the
    /// physical fields.
    pub fn coeff_inner_product(&self, uhat: &[Complex64], vhat: &[Complex64]) -> f64 {
        assert_eq!(uhat.len(), vhat.len());
        self.area() * uhat.iter().zip(vhat).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>()
    }

    /// `L² Re Σ σ û conj(v̂)` without materializing `σ∘û`.
    pub fn weighted_coeff_inner_product(&self, sigma: &[f64], uhat: &[Complex64], vhat: &[Complex64]) -> f64 {
        assert_eq!(uhat.len(), vhat.len());
        assert_eq!(uhat.len(), sigma.len());
        let sum: f64 = sigma
            .iter()
            .zip(uhat.iter().zip(vhat))
            .map(|(s, (a, b))| s * (a.re * b.re + a.im * b.im))
            .sum();
        self.area() * sum
    }

    /// `L² Σ|û|²`.
    pub fn coeff_norm_sq(&self, uhat: &[Complex64]) -> f64 {
        self.area() * uhat.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Applies a Fourier multiplier to a physical field.
    pub fn filter(&self, sigma: &[f64], u: &[f64]) -> Result<Field> {
        self.inverse(&apply_symbol(sigma, &self.forward(u)))
    }

    pub fn laplacian(&self, u: &[f64]) -> Result<Field> {
        self.filter(&self.lap, u)
    }

    pub fn operator_symbol(&self, model: &GradientFlowModel, which: Operator) -> Field {
        self.k2
            .iter()
            .map(|&k2| match which {
                Operator::L => model.l_symbol(k2),
                Operator::G => model.g_symbol(k2),
            })
            .collect()
    }
}

/// The Schur product `σ∘û`.
pub fn apply_symbol(sigma: &[f64], uhat: &[Complex64]) -> CoeffField {
    assert_eq!(sigma.len(), uhat.len(), "symbol does not match coefficient field");
    sigma.iter().zip(uhat).map(|(s, u)| u * *s).collect()
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
