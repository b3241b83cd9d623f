use nalgebra::{DMatrix, DVector};

use super::{GltdTableau, CONSISTENCY_TOL};
use crate::error::{Error, Result};

/// Coefficients `(A, Â, b, b̂)` of a multistep Runge–Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct MrkCoefficients {
    pub a: DMatrix<f64>,
    pub a_hat: DMatrix<f64>,
    pub b: DVector<f64>,
    pub b_hat: DVector<f64>,
    pub c: DVector<f64>,
}

impl MrkCoefficients {
    /// Recovers the MRK data when the tableau has the shifted-history shape
    /// `D21 = [b; 0]`, `D22 = [b̂; I 0]`.
    pub fn from_tableau(t: &GltdTableau) -> Result<Self> {
        let r = t.r();
        let (d21, d22) = (t.d21(), t.d22());
        for i in 1..r {
            if d21.row(i).iter().any(|&v| v != 0.0) {
                return Err(Error::Structural(format!("D21 row {i} is nonzero, tableau is not MRK-structured")));
            }
            for j in 0..r {
                let want = if j + 1 == i { 1.0 } else { 0.0 };
                if d22[(i, j)] != want {
                    return Err(Error::Structural(format!(
                        "D22[{i},{j}] = {}, expected the shifted identity of an MRK tableau",
                        d22[(i, j)]
                    )));
                }
            }
        }
        Ok(Self {
            a: t.d11().clone(),
            a_hat: t.d12().clone(),
            b: d21.row(0).transpose(),
            b_hat: d22.row(0).transpose(),
            c: t.c().clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderCondition {
    /// `l Σ b_j c_j^{l-1} + Σ b̂_j (1-j)^l = 1`
    B(usize),
    /// `l Σ_j a_ij c_j^{l-1} + Σ_j â_ij (1-j)^l = c_i^l` at one stage.
    C { l: usize, stage: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub residuals: Vec<(OrderCondition, f64)>,
}

impl OrderReport {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|(_, r)| *r <= CONSISTENCY_TOL)
    }

    pub fn first_failure(&self) -> Option<OrderCondition> {
        self.residuals.iter().find(|(_, r)| *r > CONSISTENCY_TOL).map(|(c, _)| *c)
    }
}

fn pow_or_one(x: f64, l: usize) -> f64 {
    if l == 0 {
        1.0
    } else {
        x.powi(l as i32)
    }
}

/// Residuals of `B(1..=p)` and `C(1..=q)` in the one-leg history
/// convention, where external value `j` (1-based) sits at time `1 - j`.
pub fn check_mrk_order_conditions(t: &GltdTableau, p: usize, q: usize) -> Result<OrderReport> {
    let m = MrkCoefficients::from_tableau(t)?;
    let (s, r) = (t.s(), t.r());
    let past = |j: usize, l: usize| pow_or_one(-(j as f64), l);
    let mut residuals = Vec::with_capacity(p + q * s);
    for l in 1..=p {
        let stage: f64 = (0..s).map(|j| m.b[j] * pow_or_one(m.c[j], l - 1)).sum();
        let history: f64 = (0..r).map(|j| m.b_hat[j] * past(j, l)).sum();
        residuals.push((OrderCondition::B(l), (l as f64 * stage + history - 1.0).abs()));
    }
    for l in 1..=q {
        for i in 0..s {
            let stage: f64 = (0..s).map(|j| m.a[(i, j)] * pow_or_one(m.c[j], l - 1)).sum();
            let history: f64 = (0..r).map(|j| m.a_hat[(i, j)] * past(j, l)).sum();
            let res = (l as f64 * stage + history - pow_or_one(m.c[i], l)).abs();
            residuals.push((OrderCondition::C { l, stage: i }, res));
        }
    }
    Ok(OrderReport { residuals })
}
