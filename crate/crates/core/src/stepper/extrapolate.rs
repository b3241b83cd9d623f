use num_complex::Complex64;

use super::SimulationState;
use crate::error::{Error, Result};
use crate::spectral::CoeffField;
use crate::tableau::{Extrapolation, GltdTableau};

/// Lagrange basis `ℓ_j(x)` on `nodes`.
pub fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &nk)| (x - nk) / (nodes[j] - nk))
                .product()
        })
        .collect()
}

/// Coefficients of the stage predictors `Ū_{n,i}`.
pub(super) fn extrapolate_coeffs(t: &GltdTableau, state: &SimulationState) -> Result<Vec<CoeffField>> {
    match *t.extrapolation() {
        Extrapolation::TwoPoint { current, previous } => {
            let now = &state.u_ext[0];
            let prev = if t.r() >= 2 {
                &state.u_ext[1]
            } else {
                state
                    .prev_input
                    .as_ref()
                    .ok_or_else(|| Error::StartupRequired("two-point extrapolation needs u^{n-1}".into()))?
            };
            let ubar = combine(&[(current, now), (previous, prev)]);
            Ok(vec![ubar; t.s()])
        }
        Extrapolation::PreviousStages { include_step_start } => {
            if state.u_stage_prev.len() != t.s() {
                return Err(Error::StartupRequired("stage extrapolation needs the previous step's stages".into()));
            }
            let mut nodes: Vec<f64> = Vec::with_capacity(t.s() + 1);
            let mut values: Vec<&CoeffField> = Vec::with_capacity(t.s() + 1);
            if include_step_start {
                let start = state
                    .prev_input
                    .as_ref()
                    .ok_or_else(|| Error::StartupRequired("stage extrapolation needs u^{n-1}".into()))?;
                nodes.push(0.0);
                values.push(start);
            }
            nodes.extend(t.c().iter());
            values.extend(state.u_stage_prev.iter());
            Ok((0..t.s())
                .map(|i| {
                    let weights = lagrange_weights(&nodes, 1.0 + t.c()[i]);
                    let terms: Vec<(f64, &CoeffField)> = weights.into_iter().zip(values.iter().copied()).collect();
                    combine(&terms)
                })
                .collect())
        }
    }
}

pub(super) fn combine(terms: &[(f64, &CoeffField)]) -> CoeffField {
    let len = terms[0].1.len();
    let mut out = vec![Complex64::default(); len];
    for (w, f) in terms {
        for (o, v) in out.iter_mut().zip(f.iter()) {
            *o += v * *w;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radau_two_point_weights() {
        let w = lagrange_weights(&[1.0 / 3.0, 1.0], 4.0 / 3.0);
        assert!((w[0] + 0.5).abs() < 1e-15);
        assert!((w[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn weights_reproduce_polynomials() {
        let nodes = [0.0, 0.155, 0.645, 1.0];
        for x in [1.155, 1.645, 2.0] {
            let w = lagrange_weights(&nodes, x);
            for deg in 0..4 {
                let exact = f64::powi(x, deg);
                let interp: f64 = nodes.iter().zip(&w).map(|(n, w)| w * n.powi(deg)).sum();
                assert!((interp - exact).abs() < 1e-12);
            }
        }
    }
}
