use nalgebra::{DMatrix, DVector};

use super::GltdTableau;
use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, min_sym_eigenvalue};

/// Lower bound on `min eig(M)` accepted as non-negative definite.
pub const ALGEBRAIC_TOL: f64 = -1e-10;
/// Strict lower bound on `min eig(H̃D11 + D11ᵀH̃)`.
pub const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityKind {
    Algebraic,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub kind: StabilityKind,
    /// Empty for [`StabilityKind::Diagonal`].
    pub g: DMatrix<f64>,
    /// Diagonal of H, or of H̃ for the diagonal kind.
    pub h: DVector<f64>,
    pub min_eig_m: f64,
    /// Smallest eigenvalue of G; `+∞` for the diagonal kind.
    pub min_eig_g: f64,
}

impl StabilityCertificate {
    pub fn passed(&self) -> bool {
        match self.kind {
            StabilityKind::Algebraic => {
                self.min_eig_g > 0.0 && self.h.iter().all(|&v| v >= 0.0) && self.min_eig_m >= ALGEBRAIC_TOL
            }
            StabilityKind::Diagonal => self.h.iter().all(|&v| v > 0.0) && self.min_eig_m > DIAGONAL_TOL,
        }
    }
}

/// Assembles the `(r+s) × (r+s)` matrix whose non-negative definiteness
/// defines algebraic stability with weights `(G, H)`.
pub fn algebraic_stability_matrix(t: &GltdTableau, g: &DMatrix<f64>, h: &DVector<f64>) -> DMatrix<f64> {
    let (r, s) = (t.r(), t.s());
    let hm = DMatrix::from_diagonal(h);
    let (d11, d12, d21, d22) = (t.d11(), t.d12(), t.d21(), t.d22());
    let m11 = g - d22.transpose() * g * d22;
    let m12 = d12.transpose() * &hm - d22.transpose() * g * d21;
    let m21 = &hm * d12 - d21.transpose() * g * d22;
    let m22 = d11.transpose() * &hm + &hm * d11 - d21.transpose() * g * d21;
    let mut m = DMatrix::zeros(r + s, r + s);
    m.view_mut((0, 0), (r, r)).copy_from(&m11);
    m.view_mut((0, r), (r, s)).copy_from(&m12);
    m.view_mut((r, 0), (s, r)).copy_from(&m21);
    m.view_mut((r, r), (s, s)).copy_from(&m22);
    m
}

pub fn check_algebraic_stability(t: &GltdTableau, g: &DMatrix<f64>, h: &DVector<f64>) -> Result<StabilityCertificate> {
    if g.nrows() != t.r() || g.ncols() != t.r() {
        return Err(Error::Structural(format!("G is {}x{}, expected {r}x{r}", g.nrows(), g.ncols(), r = t.r())));
    }
    if h.len() != t.s() {
        return Err(Error::Structural(format!("H has length {}, expected {}", h.len(), t.s())));
    }
    let asym = max_asymmetry(g);
    if asym > 1e-14 * g.amax().max(1.0) {
        return Err(Error::Structural(format!("G is not symmetric (max |g_ij - g_ji| = {asym:e})")));
    }
    let m = algebraic_stability_matrix(t, g, h);
    Ok(StabilityCertificate {
        kind: StabilityKind::Algebraic,
        g: g.clone(),
        h: h.clone(),
        min_eig_m: min_sym_eigenvalue(&m),
        min_eig_g: min_sym_eigenvalue(g),
    })
}

pub fn check_diagonal_stability(t: &GltdTableau, h_tilde: &DVector<f64>) -> Result<StabilityCertificate> {
    if h_tilde.len() != t.s() {
        return Err(Error::Structural(format!("H̃ has length {}, expected {}", h_tilde.len(), t.s())));
    }
    if let Some(bad) = h_tilde.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Precondition(format!("H̃ entries must be positive, found {bad}")));
    }
    let hm = DMatrix::from_diagonal(h_tilde);
    let sym = &hm * t.d11() + t.d11().transpose() * &hm;
    Ok(StabilityCertificate {
        kind: StabilityKind::Diagonal,
        g: DMatrix::zeros(0, 0),
        h: h_tilde.clone(),
        min_eig_m: min_sym_eigenvalue(&sym),
        min_eig_g: f64::INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::{one_leg_theta, one_leg_two_step, radau_iia, BuiltinScheme, Extrapolation, TableauParts};
    use approx::assert_abs_diff_eq;

    fn one() -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0))
    }

    #[test]
    fn theta_three_quarters_is_algebraically_stable() {
        let (g, h) = one();
        let cert = check_algebraic_stability(&one_leg_theta(0.75).unwrap(), &g, &h).unwrap();
        assert!(cert.passed());
    }

    #[test]
    fn theta_quarter_fails() {
        // Bypass the builder's range check to probe the verifier itself.
        let mut parts = one_leg_theta(0.75).unwrap().into_parts();
        parts.d11[(0, 0)] = 0.25;
        parts.c[0] = 0.25;
        let t = GltdTableau::from_parts(parts).unwrap();
        let (g, h) = one();
        let cert = check_algebraic_stability(&t, &g, &h).unwrap();
        // M = diag(0, 2θ - 1)
        assert_abs_diff_eq!(cert.min_eig_m, -0.5, epsilon = 1e-15);
        assert!(!cert.passed());
    }

    #[test]
    fn two_step_unit_parameters_with_displayed_g() {
        let t = one_leg_two_step(1.0, 1.0).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[5.0, -1.0, -1.0, 1.0]) * 0.25;
        let cert = check_algebraic_stability(&t, &g, &DVector::from_element(1, 1.0)).unwrap();
        assert!(cert.passed(), "{cert:?}");
    }

    #[test]
    fn radau_two_stage_with_weights_h() {
        let t = radau_iia(2).unwrap();
        let b = DVector::from_vec(vec![0.75, 0.25]);
        let cert = check_algebraic_stability(&t, &DMatrix::from_element(1, 1, 1.0), &b).unwrap();
        assert!(cert.passed());
        let diag = check_diagonal_stability(&t, &b).unwrap();
        assert!(diag.passed());
        // H̃A + AᵀH̃ = [[5/8, 1/8], [1/8, 1/8]]
        let want = (0.75 - (5.0f64 / 16.0).sqrt()) / 2.0;
        assert_abs_diff_eq!(diag.min_eig_m, want, epsilon = 1e-14);
    }

    #[test]
    fn non_symmetric_g_is_structural() {
        let t = one_leg_two_step(1.0, 1.0).unwrap();
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let res = check_algebraic_stability(&t, &g, &DVector::from_element(1, 1.0));
        assert!(matches!(res, Err(Error::Structural(_))));
    }

    #[test]
    fn theta_diagonal_margin_is_two_theta() {
        let cert = check_diagonal_stability(&one_leg_theta(0.75).unwrap(), &DVector::from_element(1, 1.0)).unwrap();
        assert_abs_diff_eq!(cert.min_eig_m, 1.5, epsilon = 1e-15);
        assert!(cert.passed());
    }

    #[test]
    fn skew_d11_is_never_diagonally_stable() {
        let t = GltdTableau::from_parts(TableauParts {
            name: "skew".into(),
            p: 1,
            q: 1,
            q_hat: 1,
            nu: 2,
            d11: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            d12: DMatrix::from_element(2, 1, 1.0),
            d21: DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            d22: DMatrix::from_element(1, 1, 1.0),
            c: DVector::from_vec(vec![1.0, -1.0]),
            w: crate::tableau::one_leg_scaling_vectors(1, 1),
            extrapolation: Extrapolation::PreviousStages { include_step_start: false },
            certificate: None,
        })
        .unwrap();
        for h in [vec![1.0, 1.0], vec![2.0, 0.5], vec![0.1, 10.0]] {
            let cert = check_diagonal_stability(&t, &DVector::from_vec(h)).unwrap();
            assert!(!cert.passed());
        }
    }

    #[test]
    fn nonpositive_h_tilde_is_precondition() {
        let t = radau_iia(2).unwrap();
        let res = check_diagonal_stability(&t, &DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(res, Err(Error::Precondition(_))));
    }

    #[test]
    fn every_builtin_passes_attached_certificates() {
        for scheme in BuiltinScheme::ALL {
            let t = scheme.tableau();
            let w = t.certificate().unwrap();
            let alg = check_algebraic_stability(&t, &w.g, &w.h).unwrap();
            assert!(alg.passed(), "{scheme}: {alg:?}");
            let diag = check_diagonal_stability(&t, &w.h_tilde).unwrap();
            assert!(diag.passed(), "{scheme}: {diag:?}");
        }
    }
}
