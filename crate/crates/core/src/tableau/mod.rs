//! General linear time discretizations (GLTDs).
//!
//! A GLTD advances `r` external approximations `u^{[n]}` through `s`
//! internal stages:
//!
//! ```text
//! U_n   = τ D11 f(U_n) + D12 u^{[n]}
//! u^{[n+1]} = τ D21 f(U_n) + D22 u^{[n]}
//! ```
//!
//! This module holds the coefficient container, the built-in schemes and
//! the numerical verifiers for consistency, algebraic stability, diagonal
//! stability and the simplified MRK order conditions.

mod builtin;
mod io;
mod order;
mod stability;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use builtin::{one_leg_theta, one_leg_two_step, radau_iia, two_step_rk_one_stage, BuiltinScheme};
pub use io::{parse_tableau, write_tableau};
pub use order::{check_mrk_order_conditions, MrkCoefficients, OrderCondition, OrderReport};
pub use stability::{check_algebraic_stability, check_diagonal_stability, StabilityCertificate, StabilityKind};

/// Tolerance on the consistency and order-condition residuals.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// How the explicit stage predictors `Ū_{n,i}` entering the nonlinear term
/// are formed from past values.
#[derive(Debug, Clone, PartialEq)]
pub enum Extrapolation {
    /// `Ū_{n,i} = current · u^n + previous · u^{n-1}` for every stage.
    TwoPoint { current: f64, previous: f64 },
    /// Lagrange extrapolation from the previous step's stage values
    /// `U_{n-1,j}` at nodes `c_j`, evaluated at `1 + c_i`. With
    /// `include_step_start` the previous step's input `u^{n-1}` is added as
    /// an extra node at 0.
    PreviousStages { include_step_start: bool },
}

impl Extrapolation {
    /// Number of past values combined by the rule.
    pub fn points(&self, stages: usize) -> usize {
        match self {
            Extrapolation::TwoPoint { .. } => 2,
            Extrapolation::PreviousStages { include_step_start } => stages + usize::from(*include_step_start),
        }
    }
}

/// Weight matrices shipped with a tableau: `(G, H)` for algebraic
/// stability and `H̃` for diagonal stability.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateWeights {
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub h_tilde: DVector<f64>,
}

/// Raw pieces of a tableau, validated by [`GltdTableau::from_parts`].
#[derive(Debug, Clone)]
pub struct TableauParts {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub q_hat: usize,
    pub nu: usize,
    pub d11: DMatrix<f64>,
    pub d12: DMatrix<f64>,
    pub d21: DMatrix<f64>,
    pub d22: DMatrix<f64>,
    pub c: DVector<f64>,
    /// `r × (p+1)`, column `j` is the scaling vector `w_j`.
    pub w: DMatrix<f64>,
    pub extrapolation: Extrapolation,
    pub certificate: Option<CertificateWeights>,
}

/// An immutable, dimensionally checked GLTD.
#[derive(Debug, Clone, PartialEq)]
pub struct GltdTableau {
    name: String,
    s: usize,
    r: usize,
    p: usize,
    q: usize,
    q_hat: usize,
    nu: usize,
    d11: DMatrix<f64>,
    d12: DMatrix<f64>,
    d21: DMatrix<f64>,
    d22: DMatrix<f64>,
    c: DVector<f64>,
    w: DMatrix<f64>,
    extrapolation: Extrapolation,
    certificate: Option<CertificateWeights>,
}

fn expect_shape(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Structural(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl GltdTableau {
    pub fn from_parts(parts: TableauParts) -> Result<Self> {
        let s = parts.d11.nrows();
        let r = parts.d22.nrows();
        if s == 0 || r == 0 {
            return Err(Error::Structural("tableau needs at least one stage and one external value".into()));
        }
        expect_shape("D11", &parts.d11, s, s)?;
        expect_shape("D12", &parts.d12, s, r)?;
        expect_shape("D21", &parts.d21, r, s)?;
        expect_shape("D22", &parts.d22, r, r)?;
        if parts.c.len() != s {
            return Err(Error::Structural(format!("c has length {}, expected {s}", parts.c.len())));
        }
        if parts.w.nrows() != r || parts.w.ncols() < 2 {
            return Err(Error::Structural(format!(
                "w is {}x{}, expected {r} rows and at least the columns w0, w1",
                parts.w.nrows(),
                parts.w.ncols()
            )));
        }
        if parts.w.ncols() != parts.p + 1 {
            return Err(Error::Structural(format!(
                "w has {} columns but order p = {} needs {}",
                parts.w.ncols(),
                parts.p,
                parts.p + 1
            )));
        }
        if parts.nu == 0 {
            return Err(Error::Structural("nu must be positive".into()));
        }
        if parts.extrapolation.points(s) != parts.nu {
            return Err(Error::Structural(format!(
                "extrapolation rule combines {} points but nu = {}",
                parts.extrapolation.points(s),
                parts.nu
            )));
        }
        if let Extrapolation::TwoPoint { .. } = parts.extrapolation {
            if s != 1 {
                return Err(Error::Structural("two-point extrapolation is defined for one-stage tableaus".into()));
            }
        }
        if let Some(cert) = &parts.certificate {
            expect_shape("G", &cert.g, r, r)?;
            if cert.h.len() != s || cert.h_tilde.len() != s {
                return Err(Error::Structural(format!("H and H̃ must have length {s}")));
            }
        }
        Ok(Self {
            name: parts.name,
            s,
            r,
            p: parts.p,
            q: parts.q,
            q_hat: parts.q_hat,
            nu: parts.nu,
            d11: parts.d11,
            d12: parts.d12,
            d21: parts.d21,
            d22: parts.d22,
            c: parts.c,
            w: parts.w,
            extrapolation: parts.extrapolation,
            certificate: parts.certificate,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    /// Number of internal stages.
    pub fn s(&self) -> usize {
        self.s
    }
    /// Number of external approximations.
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn q_hat(&self) -> usize {
        self.q_hat
    }
    pub fn nu(&self) -> usize {
        self.nu
    }
    pub fn d11(&self) -> &DMatrix<f64> {
        &self.d11
    }
    pub fn d12(&self) -> &DMatrix<f64> {
        &self.d12
    }
    pub fn d21(&self) -> &DMatrix<f64> {
        &self.d21
    }
    pub fn d22(&self) -> &DMatrix<f64> {
        &self.d22
    }
    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
    pub fn w_col(&self, j: usize) -> DVector<f64> {
        self.w.column(j).into_owned()
    }
    pub fn extrapolation(&self) -> &Extrapolation {
        &self.extrapolation
    }
    pub fn certificate(&self) -> Option<&CertificateWeights> {
        self.certificate.as_ref()
    }

    /// Convergence order expected from the error theory, `min(q̂, ν)`.
    pub fn expected_order(&self) -> usize {
        self.q_hat.min(self.nu)
    }

    pub fn into_parts(self) -> TableauParts {
        TableauParts {
            name: self.name,
            p: self.p,
            q: self.q,
            q_hat: self.q_hat,
            nu: self.nu,
            d11: self.d11,
            d12: self.d12,
            d21: self.d21,
            d22: self.d22,
            c: self.c,
            w: self.w,
            extrapolation: self.extrapolation,
            certificate: self.certificate,
        }
    }
}

/// Scaling vectors of the one-leg convention `u_i^{[n]} = u^{n+1-i}`:
/// `w_0 = e`, `w_j = (0, (-1)^j, …, (1-r)^j)ᵀ / j!`.
pub fn one_leg_scaling_vectors(r: usize, p: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(r, p + 1);
    let mut factorial = 1.0;
    for j in 0..=p {
        if j > 0 {
            factorial *= j as f64;
        }
        for i in 0..r {
            let base = -(i as f64);
            w[(i, j)] = if j == 0 { 1.0 } else { base.powi(j as i32) / factorial };
        }
    }
    w
}

/// The four consistency identities of a GLTD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsistencyCondition {
    /// `D21 e + D22 w1 = w0 + w1`
    OutputFirstOrder,
    /// `D12 w0 = e`
    StagePreservation,
    /// `D22 w0 = w0`
    OutputPreservation,
    /// `D11 e + D12 w1 = c`
    StageAbscissae,
}

impl ConsistencyCondition {
    pub const ALL: [ConsistencyCondition; 4] = [
        ConsistencyCondition::OutputFirstOrder,
        ConsistencyCondition::StagePreservation,
        ConsistencyCondition::OutputPreservation,
        ConsistencyCondition::StageAbscissae,
    ];

    pub fn formula(&self) -> &'static str {
        match self {
            ConsistencyCondition::OutputFirstOrder => "D21*e + D22*w1 = w0 + w1",
            ConsistencyCondition::StagePreservation => "D12*w0 = e",
            ConsistencyCondition::OutputPreservation => "D22*w0 = w0",
            ConsistencyCondition::StageAbscissae => "D11*e + D12*w1 = c",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub residuals: Vec<(ConsistencyCondition, f64)>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|(_, r)| *r <= CONSISTENCY_TOL)
    }

    pub fn residual(&self, cond: ConsistencyCondition) -> f64 {
        self.residuals
            .iter()
            .find(|(c, _)| *c == cond)
            .map(|(_, r)| *r)
            .expect("every condition is evaluated")
    }

    pub fn failing(&self) -> impl Iterator<Item = &(ConsistencyCondition, f64)> {
        self.residuals.iter().filter(|(_, r)| *r > CONSISTENCY_TOL)
    }
}

/// Euclidean norms of the four consistency residuals.
pub fn check_consistency(t: &GltdTableau) -> Result<ConsistencyReport> {
    let e = DVector::from_element(t.s, 1.0);
    let w0 = t.w_col(0);
    let w1 = t.w_col(1);
    let output = &t.d21 * &e + &t.d22 * &w1 - &w0 - &w1;
    let stage = &t.d12 * &w0 - &e;
    let preserve = &t.d22 * &w0 - &w0;
    let abscissae = &t.d11 * &e + &t.d12 * &w1 - &t.c;
    Ok(ConsistencyReport {
        residuals: vec![
            (ConsistencyCondition::OutputFirstOrder, output.norm()),
            (ConsistencyCondition::StagePreservation, stage.norm()),
            (ConsistencyCondition::OutputPreservation, preserve.norm()),
            (ConsistencyCondition::StageAbscissae, abscissae.norm()),
        ],
    })
}
