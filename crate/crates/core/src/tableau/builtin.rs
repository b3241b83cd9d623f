use nalgebra::{DMatrix, DVector};

use super::{one_leg_scaling_vectors, CertificateWeights, Extrapolation, GltdTableau, TableauParts};
use crate::error::{Error, Result};
use crate::linalg::inverse;

/// The six schemes of the SAV-GL family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinScheme {
    /// One-leg θ-method with θ = 3/4.
    SavGl1,
    /// Two-step one-leg scheme with γ = δ = 1.
    SavGl2,
    /// Two-step one-leg scheme with γ = δ = 2.
    SavGl3,
    /// One-stage two-step Runge–Kutta.
    SavGl4,
    /// Two-stage Radau IIA.
    SavGl5,
    /// Three-stage Radau IIA.
    SavGl6,
}

impl BuiltinScheme {
    pub const ALL: [BuiltinScheme; 6] = [
        BuiltinScheme::SavGl1,
        BuiltinScheme::SavGl2,
        BuiltinScheme::SavGl3,
        BuiltinScheme::SavGl4,
        BuiltinScheme::SavGl5,
        BuiltinScheme::SavGl6,
    ];

    pub fn tableau(self) -> GltdTableau {
        let built = match self {
            BuiltinScheme::SavGl1 => one_leg_theta(0.75),
            BuiltinScheme::SavGl2 => one_leg_two_step(1.0, 1.0),
            BuiltinScheme::SavGl3 => one_leg_two_step(2.0, 2.0),
            BuiltinScheme::SavGl4 => Ok(two_step_rk_one_stage()),
            BuiltinScheme::SavGl5 => radau_iia(2),
            BuiltinScheme::SavGl6 => radau_iia(3),
        };
        let mut t = built.expect("built-in parameters are valid");
        t.name = self.name().to_string();
        t
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinScheme::SavGl1 => "savgl1",
            BuiltinScheme::SavGl2 => "savgl2",
            BuiltinScheme::SavGl3 => "savgl3",
            BuiltinScheme::SavGl4 => "savgl4",
            BuiltinScheme::SavGl5 => "savgl5",
            BuiltinScheme::SavGl6 => "savgl6",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase().replace(['-', '_', '(', ')'], "");
        Self::ALL.into_iter().find(|s| s.name() == lower)
    }
}

impl std::fmt::Display for BuiltinScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// The one-leg θ-method `u^{n+1} = u^n + τ f(θ u^{n+1} + (1-θ) u^n)`.
pub fn one_leg_theta(theta: f64) -> Result<GltdTableau> {
    if !(0.5..=1.0).contains(&theta) {
        return Err(Error::Precondition(format!("theta = {theta} is outside [0.5, 1]")));
    }
    let second_order = theta == 0.5;
    let (p, q, q_hat) = if second_order { (2, 1, 2) } else { (1, 1, 1) };
    GltdTableau::from_parts(TableauParts {
        name: format!("one_leg_theta({theta})"),
        p,
        q,
        q_hat,
        nu: 2,
        d11: scalar(theta),
        d12: scalar(1.0),
        d21: scalar(1.0),
        d22: scalar(1.0),
        c: DVector::from_element(1, theta),
        w: one_leg_scaling_vectors(1, p),
        extrapolation: Extrapolation::TwoPoint { current: 2.0 - theta, previous: theta - 1.0 },
        certificate: Some(CertificateWeights {
            g: scalar(1.0),
            h: DVector::from_element(1, 1.0),
            h_tilde: DVector::from_element(1, 1.0),
        }),
    })
}

/// GLTD form of a one-leg method `Σ α_j u^{n+1-j} = τ f(Σ β_j u^{n+1-j})`.
///
/// The stage is `U = Σ β_j u^{n+1-j}`; eliminating `u^{n+1}` through the
/// α-relation gives the first rows of D21 and D22 scaled by `1/α_0`.
fn one_leg_parts(alpha: &[f64], beta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
    let k = alpha.len() - 1;
    let a0 = alpha[0];
    let ratio = beta[0] / a0;
    let d11 = scalar(ratio);
    let d12 = DMatrix::from_fn(1, k, |_, j| beta[j + 1] - ratio * alpha[j + 1]);
    let mut d21 = DMatrix::zeros(k, 1);
    d21[(0, 0)] = 1.0 / a0;
    let mut d22 = DMatrix::zeros(k, k);
    for j in 0..k {
        d22[(0, j)] = -alpha[j + 1] / a0;
    }
    for i in 1..k {
        d22[(i, i - 1)] = 1.0;
    }
    let c = beta.iter().enumerate().map(|(j, b)| (1.0 - j as f64) * b).sum();
    (d11, d12, d21, d22, c)
}

/// The two-step one-leg family with parameters (γ, δ).
pub fn one_leg_two_step(gamma: f64, delta: f64) -> Result<GltdTableau> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::Precondition(format!("gamma = {gamma} must be nonnegative")));
    }
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::Precondition(format!("delta = {delta} must be positive")));
    }
    let alpha = [(1.0 + gamma) / 2.0, -gamma, (gamma - 1.0) / 2.0];
    let beta = [(1.0 + gamma + delta) / 4.0, (1.0 - delta) / 2.0, (1.0 - gamma + delta) / 4.0];
    let (d11, d12, d21, d22, c) = one_leg_parts(&alpha, &beta);
    let off = 1.0 - delta - gamma * gamma;
    let g = DMatrix::from_row_slice(
        2,
        2,
        &[(1.0 + gamma).powi(2) + delta, off, off, (gamma - 1.0).powi(2) + delta],
    ) * 0.25;
    GltdTableau::from_parts(TableauParts {
        name: format!("one_leg_two_step({gamma},{delta})"),
        p: 2,
        q: 1,
        q_hat: 2,
        nu: 2,
        d11,
        d12,
        d21,
        d22,
        c: DVector::from_element(1, c),
        w: one_leg_scaling_vectors(2, 2),
        extrapolation: Extrapolation::TwoPoint { current: 1.0 + gamma / 2.0, previous: -gamma / 2.0 },
        certificate: Some(CertificateWeights {
            g,
            h: DVector::from_element(1, 1.0),
            h_tilde: DVector::from_element(1, 1.0),
        }),
    })
}

/// One-stage two-step Runge–Kutta method in MRK form
///
/// ```text
/// U      = τ a f(U) + â1 u^n + â2 u^{n-1}
/// u^{n+1} = τ b f(U) + b̂1 u^n + b̂2 u^{n-1}
/// ```
///
/// with a = 3/4, â = (1/2, 1/2), b = 4/3, b̂ = (2/3, 1/3), c = 1/4.
/// Order 2, stage order 1, generalized stage order 2.
pub fn two_step_rk_one_stage() -> GltdTableau {
    let a = 0.75;
    let a_hat = [0.5, 0.5];
    let b = 4.0 / 3.0;
    let b_hat = [2.0 / 3.0, 1.0 / 3.0];
    let c = a - a_hat[1];
    GltdTableau::from_parts(TableauParts {
        name: "two_step_rk_one_stage".into(),
        p: 2,
        q: 1,
        q_hat: 2,
        nu: 2,
        d11: scalar(a),
        d12: DMatrix::from_row_slice(1, 2, &a_hat),
        d21: DMatrix::from_row_slice(2, 1, &[b, 0.0]),
        d22: DMatrix::from_row_slice(2, 2, &[b_hat[0], b_hat[1], 1.0, 0.0]),
        c: DVector::from_element(1, c),
        w: one_leg_scaling_vectors(2, 2),
        extrapolation: Extrapolation::TwoPoint { current: 1.0 + c, previous: -c },
        certificate: Some(CertificateWeights {
            g: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, b_hat[1]])),
            h: DVector::from_element(1, b),
            h_tilde: DVector::from_element(1, 1.0),
        }),
    })
    .expect("coefficients are dimensionally valid")
}

/// Right Radau nodes on (0, 1].
fn radau_nodes(s: usize) -> Vec<f64> {
    match s {
        2 => vec![1.0 / 3.0, 1.0],
        3 => {
            let r6 = 6f64.sqrt();
            vec![(4.0 - r6) / 10.0, (4.0 + r6) / 10.0, 1.0]
        }
        _ => unreachable!(),
    }
}

/// Radau IIA collocation method with `s` stages.
///
/// A and b are solved from `C(s)` and `B(s)` at the nodes rather than
/// hard-coded.
pub fn radau_iia(s: usize) -> Result<GltdTableau> {
    if !(2..=3).contains(&s) {
        return Err(Error::Precondition(format!("radau_iia supports s in {{2, 3}}, got {s}")));
    }
    let c = radau_nodes(s);
    // V[j][l] = c_j^l so that Σ_j a_ij c_j^l = c_i^{l+1}/(l+1).
    let v = DMatrix::from_fn(s, s, |j, l| c[j].powi(l as i32));
    let v_inv = inverse(&v)?;
    let rhs = DMatrix::from_fn(s, s, |i, l| c[i].powi(l as i32 + 1) / (l as f64 + 1.0));
    let a = rhs * &v_inv;
    let b_rhs = DVector::from_fn(s, |l, _| 1.0 / (l as f64 + 1.0));
    let b = v_inv.transpose() * b_rhs;
    let b_over_c = DVector::from_fn(s, |i, _| b[i] / c[i]);
    let p = 2 * s - 1;
    GltdTableau::from_parts(TableauParts {
        name: format!("radau_iia({s})"),
        p,
        q: s,
        q_hat: s,
        nu: s + 1,
        d11: a,
        d12: DMatrix::from_element(s, 1, 1.0),
        d21: DMatrix::from_row_slice(1, s, b.as_slice()),
        d22: scalar(1.0),
        c: DVector::from_vec(c),
        w: one_leg_scaling_vectors(1, p),
        extrapolation: Extrapolation::PreviousStages { include_step_start: true },
        certificate: Some(CertificateWeights { g: scalar(1.0), h: b, h_tilde: b_over_c }),
    })
}
