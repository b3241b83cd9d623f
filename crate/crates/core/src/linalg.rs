//! Small dense helpers shared by the tableau checkers and the stage solver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest eigenvalue of a symmetric matrix.
///
/// The input is symmetrized as `(A + Aᵀ)/2` first so that rounding in an
/// assembled matrix cannot produce complex eigenvalues.
pub fn min_sym_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix is not invertible", a.nrows(), a.ncols())))
}

/// LU factorization with partial pivoting of a small real square matrix,
/// stored row-major. Used for the per-mode stage systems, which are tiny
/// (s ≤ 3 for every built-in scheme) and solved millions of times.
#[derive(Debug, Clone)]
pub struct SmallLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl SmallLu {
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[i * n + k].abs() > a[p * n + k].abs() {
                    p = i;
                }
            }
            if a[p * n + k].abs() <= 1e-14 * scale {
                return Err(Error::Singular(format!("pivot {k} vanishes in {n}x{n} factorization")));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(a[(i, j)]);
            }
        }
        Self::factor(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place. Works for real or complex right-hand sides since the
    /// factors are real.
    pub fn solve_in_place<T>(&self, b: &mut [T])
    where
        T: Copy
            + Default
            + std::ops::Sub<Output = T>
            + std::ops::Mul<f64, Output = T>
            + std::ops::Div<f64, Output = T>,
    {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x = [T::default(); 8];
        assert!(n <= x.len(), "SmallLu supports at most 8 unknowns");
        for i in 0..n {
            let mut v = b[self.perm[i]];
            for j in 0..i {
                v = v - x[j] * self.lu[i * n + j];
            }
            x[i] = v;
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for j in i + 1..n {
                v = v - x[j] * self.lu[i * n + j];
            }
            x[i] = v / self.lu[i * n + i];
        }
        b.copy_from_slice(&x[..n]);
    }

    pub fn solve_complex(&self, b: &mut [Complex64]) {
        self.solve_in_place(b)
    }

    pub fn solve_real(&self, b: &mut [f64]) {
        self.solve_in_place(b)
    }
}
