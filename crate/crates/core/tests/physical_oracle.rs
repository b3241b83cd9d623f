//! Physical-space cross-check of the stage solve.
//!
//! The operators are rebuilt here as dense matrices from explicit cosine
//! sums, the SAV function `W` is recomputed from its formula, and the full
//! coupled stage system is solved by LU. Nothing below goes through the
//! FFT layer except converting the solver's output back to grid values.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use savgl::models::{AllenCahn, CahnHilliard, GradientFlowModel, ModelKind, PhaseFieldCrystal};
use savgl::spectral::SpectralGrid;
use savgl::stepper::Integrator;
use savgl::tableau::BuiltinScheme;

const N: usize = 8;

/// Periodic spectral second derivative on `n` points of a period `length`.
fn second_derivative(n: usize, length: f64) -> DMatrix<f64> {
    let h = length / n as f64;
    DMatrix::from_fn(n, n, |j, l| {
        let dx = (j as f64 - l as f64) * h;
        (0..n)
            .map(|k| {
                let m = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                let w = 2.0 * PI * m / length;
                -w * w * (w * dx).cos()
            })
            .sum::<f64>()
            / n as f64
    })
}

/// Laplacian on the `u[i * n + j]` layout.
fn laplacian(n: usize, length: f64) -> DMatrix<f64> {
    let d2 = second_derivative(n, length);
    let eye = DMatrix::<f64>::identity(n, n);
    d2.kronecker(&eye) + eye.kronecker(&d2)
}

struct Operators {
    l: DMatrix<f64>,
    g: DMatrix<f64>,
    lap: DMatrix<f64>,
}

fn operators(model: &GradientFlowModel, length: f64) -> Operators {
    let lap = laplacian(N, length);
    let eye = DMatrix::<f64>::identity(N * N, N * N);
    let (l, g) = match *model.kind() {
        ModelKind::AllenCahn(p) => (-(p.epsilon * p.epsilon) * &lap + p.beta * &eye, -&eye),
        ModelKind::CahnHilliard(p) => (-(p.epsilon * p.epsilon) * &lap + p.beta * &eye, lap.clone()),
        ModelKind::PhaseFieldCrystal(p) => (p.alpha * &lap * &lap + p.beta * &eye, lap.clone()),
    };
    Operators { l, g, lap }
}

/// `(F1(u), δF1/δu)` from the pointwise formulas.
fn f1_and_gradient(model: &GradientFlowModel, ops: &Operators, h2: f64, u: &DVector<f64>) -> (f64, DVector<f64>) {
    match *model.kind() {
        ModelKind::AllenCahn(AllenCahn { beta, .. }) | ModelKind::CahnHilliard(CahnHilliard { beta, .. }) => {
            let f = u.iter().map(|v| 0.25 * (v * v - 1.0).powi(2) - 0.5 * beta * v * v).sum::<f64>() * h2;
            (f, u.map(|v| v * v * v - v - beta * v))
        }
        ModelKind::PhaseFieldCrystal(PhaseFieldCrystal { epsilon1, epsilon2, alpha, beta }) => {
            let lu = &ops.lap * u;
            let a = 1.0 - epsilon2 - beta;
            let local: f64 = u.iter().map(|v| 0.25 * v.powi(4) - epsilon1 / 3.0 * v.powi(3) + 0.5 * a * v * v).sum();
            let f = (local + u.dot(&lu) + 0.5 * (1.0 - alpha) * lu.dot(&lu)) * h2;
            let grad = u.map(|v| v * v * v - epsilon1 * v * v + a * v) + 2.0 * &lu + (1.0 - alpha) * (&ops.lap * &lu);
            (f, grad)
        }
    }
}

fn models() -> Vec<(GradientFlowModel, f64)> {
    vec![
        (GradientFlowModel::allen_cahn(AllenCahn { epsilon: 0.3, beta: 2.0 }).unwrap(), 2.0 * PI),
        (GradientFlowModel::cahn_hilliard(CahnHilliard { epsilon: 0.4, beta: 2.0 }).unwrap(), 2.0 * PI),
        (
            GradientFlowModel::phase_field_crystal(PhaseFieldCrystal {
                epsilon1: 0.1,
                epsilon2: 0.5,
                alpha: 0.9,
                beta: 1.0,
            })
            .unwrap(),
            4.0 * PI,
        ),
    ]
}

#[test]
fn stage_solve_matches_physical_space_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for scheme in BuiltinScheme::ALL {
        for (model, length) in models() {
            let grid = SpectralGrid::new(N, length).unwrap();
            let u0: Vec<f64> = grid.sample(|x, y| 0.4 * (2.0 * PI * x / length).sin() * (2.0 * PI * y / length).cos());
            let u0: Vec<f64> = u0.iter().map(|v| v + 0.05 * rng.random_range(-1.0..1.0)).collect();
            let tau = 0.05;
            let integ = Integrator::new(scheme.tableau(), model.clone(), grid.clone(), tau).unwrap();
            let mut state = integ.startup(&u0).unwrap();
            integ.advance(&mut state).unwrap();
            let ubar = integ.extrapolate_stages(&state).unwrap();
            let fast = integ.solve_stages(&state, &ubar).unwrap();

            let t = integ.tableau();
            let (s, r) = (t.s(), t.r());
            let m = N * N;
            let h2 = grid.h() * grid.h();
            let ops = operators(&model, length);
            let gl = &ops.g * &ops.l;
            let c0 = model.c0(&grid);
            let w: Vec<DVector<f64>> = ubar
                .iter()
                .map(|ub| {
                    let (f, grad) = f1_and_gradient(&model, &ops, h2, &DVector::from_column_slice(ub));
                    grad / (f + c0).sqrt()
                })
                .collect();
            let gw: Vec<DVector<f64>> = w.iter().map(|wi| &ops.g * wi).collect();
            let ext: Vec<DVector<f64>> =
                state.u_ext.iter().map(|c| DVector::from_column_slice(&grid.inverse(c).unwrap())).collect();

            // Unknowns: U_1..U_s (m each), then Z_1..Z_s.
            let dim = s * m + s;
            let mut a = DMatrix::<f64>::identity(dim, dim);
            let mut rhs = DVector::<f64>::zeros(dim);
            for i in 0..s {
                for j in 0..s {
                    let d = tau * t.d11()[(i, j)];
                    if d == 0.0 {
                        continue;
                    }
                    let mut block = a.view_mut((i * m, j * m), (m, m));
                    block -= d * &gl;
                    let mut col = a.view_mut((i * m, s * m + j), (m, 1));
                    col -= d * &gw[j];
                    // Ż_j = ½ h² W_jᵀ (G L U_j + Z_j G W_j)
                    let row_u = 0.5 * h2 * (w[j].transpose() * &gl);
                    let mut zrow = a.view_mut((s * m + i, j * m), (1, m));
                    zrow -= d * row_u;
                    a[(s * m + i, s * m + j)] -= d * 0.5 * h2 * w[j].dot(&gw[j]);
                }
                for (j, e) in ext.iter().enumerate().take(r) {
                    let d = t.d12()[(i, j)];
                    let mut seg = rhs.rows_mut(i * m, m);
                    seg += d * e;
                    rhs[s * m + i] += d * state.z_ext[j];
                }
            }
            let x = a.lu().solve(&rhs).expect("nonsingular stage system");

            for i in 0..s {
                let got = grid.inverse(&fast.u[i]).unwrap();
                let want = x.rows(i * m, m);
                let diff: f64 = got.iter().zip(want.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                assert!(diff <= 1e-10 * want.norm(), "{scheme} {}: stage {i} differs by {diff:e}", model.name());
                let z = x[s * m + i];
                assert!((fast.z[i] - z).abs() <= 1e-10 * z.abs(), "{scheme} {}: Z_{i}", model.name());
            }
        }
    }
}

#[test]
fn laplacian_matrix_reproduces_trigonometric_derivatives() {
    let length = 2.0 * PI;
    let lap = laplacian(N, length);
    let grid = SpectralGrid::new(N, length).unwrap();
    let u = DVector::from_vec(grid.sample(|x, y| (2.0 * x).sin() * (3.0 * y).cos()));
    let want = -13.0 * &u;
    assert!((&lap * &u - want).amax() < 1e-11);
}
