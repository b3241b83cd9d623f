use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use super::solve::{self, StageInputs};
use super::*;
use crate::models::{AllenCahn, CahnHilliard, PhaseFieldCrystal};
use crate::tableau::{radau_iia, BuiltinScheme};

fn ac(beta: f64) -> GradientFlowModel {
    GradientFlowModel::allen_cahn(AllenCahn { epsilon: 0.1, beta }).unwrap()
}

fn ch() -> GradientFlowModel {
    GradientFlowModel::cahn_hilliard(CahnHilliard { epsilon: 0.3, beta: 2.0 }).unwrap()
}

fn pfc() -> GradientFlowModel {
    GradientFlowModel::phase_field_crystal(PhaseFieldCrystal { epsilon1: 0.0, epsilon2: 0.5, alpha: 0.99, beta: 4.0 })
        .unwrap()
}

fn grid(n: usize) -> SpectralGrid {
    SpectralGrid::new(n, 2.0 * PI).unwrap()
}

fn smooth(g: &SpectralGrid) -> Field {
    g.sample(|x, y| 0.6 * x.sin() * y.sin() + 0.2 * (2.0 * x).cos() - 0.15 * (x + 3.0 * y).sin())
}

fn constant_coeffs(g: &SpectralGrid, a: f64) -> CoeffField {
    g.forward(&vec![a; g.len()])
}

fn state_with_history(integ: &Integrator, now: f64, prev: f64) -> SimulationState {
    let g = integ.grid();
    let r = integ.tableau().r();
    let mut u_ext = vec![constant_coeffs(g, now)];
    if r > 1 {
        u_ext.push(constant_coeffs(g, prev));
    }
    SimulationState {
        u_ext,
        z_ext: vec![1.0; r],
        u_stage_prev: Vec::new(),
        prev_input: Some(constant_coeffs(g, prev)),
        step_index: 1,
        tau: integ.tau(),
    }
}

#[test]
fn constant_history_extrapolates_to_constant() {
    for scheme in BuiltinScheme::ALL {
        let integ = Integrator::new(scheme.tableau(), ac(2.0), grid(4), 0.1).unwrap();
        let mut state = state_with_history(&integ, 0.7, 0.7);
        state.u_stage_prev = vec![constant_coeffs(integ.grid(), 0.7); integ.tableau().s()];
        for field in integ.extrapolate_stages(&state).unwrap() {
            assert!(field.iter().all(|v| (v - 0.7).abs() < 1e-14), "{scheme}");
        }
    }
}

#[test]
fn theta_extrapolation_arithmetic() {
    let integ = Integrator::new(BuiltinScheme::SavGl1.tableau(), ac(2.0), grid(4), 0.1).unwrap();
    let state = state_with_history(&integ, 2.0, 1.0);
    let ubar = integ.extrapolate_stages(&state).unwrap();
    assert!(ubar[0].iter().all(|v| (v - 2.25).abs() < 1e-14));
}

#[test]
fn missing_history_is_reported() {
    let integ = Integrator::new(radau_iia(2).unwrap(), ac(2.0), grid(4), 0.1).unwrap();
    let state = integ.initial_state(&[0.1; 16]).unwrap();
    assert!(matches!(integ.extrapolate_stages(&state), Err(Error::StartupRequired(_))));
    let theta = Integrator::new(BuiltinScheme::SavGl1.tableau(), ac(2.0), grid(4), 0.1).unwrap();
    let state = theta.initial_state(&[0.1; 16]).unwrap();
    assert!(matches!(theta.extrapolate_stages(&state), Err(Error::StartupRequired(_))));
}

/// Runs the stage solve and external update with the nonlinear term off.
fn linear_step(integ: &Integrator, u: &CoeffField) -> CoeffField {
    let s = integ.tableau().s();
    let state = SimulationState {
        u_ext: vec![u.clone(); integ.tableau().r()],
        z_ext: vec![1.0; integ.tableau().r()],
        u_stage_prev: Vec::new(),
        prev_input: None,
        step_index: 0,
        tau: integ.tau(),
    };
    let zeros = vec![vec![Complex64::default(); u.len()]; s];
    let input = StageInputs { u_ext: &state.u_ext, z_ext: &state.z_ext, ubar_hat: &zeros, w: zeros.clone() };
    let sol = solve::solve(integ.ops(), integ.grid(), integ.options(), input).unwrap();
    assert_eq!(sol.stats.iterations, 1);
    integ.external_update(&state, &sol).0.remove(0)
}

#[test]
fn backward_euler_filter() {
    let g = grid(16);
    let integ = Integrator::new(one_leg_theta(1.0).unwrap(), ch(), g.clone(), 0.05).unwrap();
    let u = g.forward(&smooth(&g));
    let next = linear_step(&integ, &u);
    let ops = integ.ops();
    for m in 0..g.len() {
        let want = u[m] / (1.0 - 0.05 * ops.sigma[m]);
        assert!((next[m] - want).norm() <= 1e-15 * u[m].norm().max(1e-300) + 1e-18);
    }
}

#[test]
fn single_mode_theta_filter() {
    let g = SpectralGrid::new(1, 2.0 * PI).unwrap();
    let (theta, tau, beta) = (0.75, 0.3, 2.0);
    let integ = Integrator::new(one_leg_theta(theta).unwrap(), ac(beta), g.clone(), tau).unwrap();
    let u = vec![Complex64::new(0.8, 0.0)];
    let next = linear_step(&integ, &u);
    let lambda = beta;
    let want = (1.0 - (1.0 - theta) * tau * lambda) / (1.0 + theta * tau * lambda) * 0.8;
    assert!((next[0].re - want).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn theta_filter_per_mode(theta in 0.5f64..=1.0, tau in 1e-3f64..1.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let g = grid(8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let field: Field = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = g.forward(&field);
        let integ = Integrator::new(one_leg_theta(theta).unwrap(), pfc(), g.clone(), tau).unwrap();
        let next = linear_step(&integ, &u);
        for m in 0..g.len() {
            let sg = integ.ops().sigma[m];
            let want = u[m] * ((1.0 + (1.0 - theta) * tau * sg) / (1.0 - theta * tau * sg));
            prop_assert!((next[m] - want).norm() <= 1e-13 * u[m].norm().max(1e-3));
        }
    }
}

#[test]
fn zero_w_needs_one_sweep() {
    let g = grid(8);
    let integ = Integrator::new(BuiltinScheme::SavGl1.tableau(), ac(0.0), g.clone(), 0.1).unwrap();
    let state = integ.initial_state(&vec![0.0; g.len()]).unwrap();
    let sol = integ.solve_stages(&state, &[vec![0.0; g.len()]]).unwrap();
    assert_eq!(sol.stats.iterations, 1);
    assert!(sol.u[0].iter().all(|v| v.norm() == 0.0));
}

fn started(scheme: BuiltinScheme, model: GradientFlowModel, n: usize, tau: f64) -> (Integrator, SimulationState) {
    let g = grid(n);
    let integ = Integrator::new(scheme.tableau(), model, g.clone(), tau).unwrap();
    let state = integ.startup(&smooth(&g)).unwrap();
    (integ, state)
}

#[test]
fn startup_shapes() {
    let (_, s1) = started(BuiltinScheme::SavGl1, ac(2.0), 8, 0.01);
    assert_eq!(s1.step_index, 0);
    let (_, s2) = started(BuiltinScheme::SavGl2, ac(2.0), 8, 0.01);
    assert_eq!((s2.step_index, s2.u_ext.len()), (1, 2));
    let (_, s5) = started(BuiltinScheme::SavGl5, ac(2.0), 8, 0.01);
    assert_eq!((s5.step_index, s5.u_stage_prev.len()), (1, 2));
    assert!(s5.prev_input.is_some());
}

#[test]
fn stage_solutions_satisfy_unsplit_equations() {
    for scheme in BuiltinScheme::ALL {
        for model in [ac(2.0), ch(), pfc()] {
            let (integ, mut state) = started(scheme, model, 16, 0.02);
            integ.advance(&mut state).unwrap();
            let ubar = integ.extrapolate_stages(&state).unwrap();
            let sol = integ.solve_stages(&state, &ubar).unwrap();
            let res = integ.stage_residual(&state, &sol);
            assert!(res <= 1e-10, "{scheme} {}: {res:e}", integ.model().name());
            assert!(sol.stats.final_residual <= 1e-12_f64.max(1e-14 * 10.0));
        }
    }
}

#[test]
fn elimination_matches_iteration() {
    let g = grid(16);
    for scheme in BuiltinScheme::ALL {
        let fast = Integrator::new(scheme.tableau(), pfc(), g.clone(), 0.05).unwrap();
        let opts = SolverOptions { method: StageMethod::Elimination, ..SolverOptions::default() };
        let exact = Integrator::with_options(scheme.tableau(), pfc(), g.clone(), 0.05, opts).unwrap();
        let mut state = fast.startup(&smooth(&g)).unwrap();
        fast.advance(&mut state).unwrap();
        let ubar = fast.extrapolate_stages(&state).unwrap();
        let a = fast.solve_stages(&state, &ubar).unwrap();
        let b = exact.solve_stages(&state, &ubar).unwrap();
        for (ua, ub) in a.u.iter().zip(&b.u) {
            let diff: f64 = ua.iter().zip(ub).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            let size: f64 = ub.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(diff <= 1e-11 * size, "{scheme}");
        }
    }
}

#[test]
fn sweep_budget_is_strict_unless_fallback_is_enabled() {
    let g = grid(16);
    let tableau = BuiltinScheme::SavGl6.tableau();
    let strict = SolverOptions { max_iters: 2, fallback_to_elimination: false, ..SolverOptions::default() };
    let lenient = SolverOptions { max_iters: 2, ..SolverOptions::default() };
    let exact = SolverOptions { method: StageMethod::Elimination, ..SolverOptions::default() };
    let make = |o| Integrator::with_options(tableau.clone(), ch(), g.clone(), 0.1, o).unwrap();
    let base = make(exact);
    let mut state = base.startup(&smooth(&g)).unwrap();
    base.advance(&mut state).unwrap();
    let ubar = base.extrapolate_stages(&state).unwrap();

    match make(strict).solve_stages(&state, &ubar) {
        Err(Error::NonConvergence { iterations, .. }) => assert_eq!(iterations, 2),
        other => panic!("expected nonconvergence, got {other:?}"),
    }
    let fell = make(lenient).solve_stages(&state, &ubar).unwrap();
    assert!(fell.stats.fell_back);
    let reference = base.solve_stages(&state, &ubar).unwrap();
    for (a, b) in fell.u.iter().zip(&reference.u) {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff <= 1e-12 * b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt());
    }
}

#[test]
fn nonlinear_fixed_point_is_a_fixed_point() {
    let (integ, state) = started(BuiltinScheme::SavGl1, ch(), 16, 0.1);
    let (sol, iters) = integ.solve_stages_nonlinear(&state).unwrap();
    assert!(iters > 1);
    let ubar: Vec<Field> = sol.u.iter().map(|c| integ.grid().inverse(c).unwrap()).collect();
    let again = integ.solve_stages(&state, &ubar).unwrap();
    let diff: f64 = again.u[0].iter().zip(&sol.u[0]).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    assert!(diff <= 1e-11, "{diff}");
}

#[test]
fn dense_oracle_agrees_on_small_grid() {
    for scheme in BuiltinScheme::ALL {
        for model in [ac(2.0), ch(), pfc()] {
            let (integ, mut state) = started(scheme, model, 8, 0.05);
            integ.advance(&mut state).unwrap();
            let ubar = integ.extrapolate_stages(&state).unwrap();
            let fast = integ.solve_stages(&state, &ubar).unwrap();
            let dense = dense::dense_solve_stages(&integ, &state, &ubar).unwrap();
            for (a, b) in fast.u.iter().zip(&dense.u) {
                let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                let size: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                assert!(diff <= 1e-10 * size, "{scheme}");
            }
            for (a, b) in fast.z.iter().zip(&dense.z) {
                assert!((a - b).abs() <= 1e-10 * b.abs());
            }
        }
    }
}

#[test]
fn energy_decreases_and_ch_mass_is_frozen() {
    for scheme in BuiltinScheme::ALL {
        let (integ, mut state) = started(scheme, ch(), 16, 0.1);
        let mass0 = integ.total_mass(&state);
        let mut prev = integ.discrete_energy(&state).unwrap();
        for _ in 0..20 {
            let diag = integ.advance(&mut state).unwrap();
            assert!(diag.energy <= prev + 1e-10 * prev.abs().max(1.0), "{scheme}: {} > {prev}", diag.energy);
            assert!((diag.mass - mass0).abs() <= 1e-9 * mass0.abs() + 1e-12);
            prev = diag.energy;
        }
    }
}

#[test]
fn allen_cahn_mass_moves() {
    let (integ, mut state) = started(BuiltinScheme::SavGl1, ac(2.0), 16, 0.1);
    let m0 = integ.total_mass(&state);
    for _ in 0..5 {
        integ.advance(&mut state).unwrap();
    }
    assert!((integ.total_mass(&state) - m0).abs() > 1e-6);
}

#[test]
fn energy_of_zero_field_with_offset_value() {
    let g = grid(8);
    let integ = Integrator::new(BuiltinScheme::SavGl1.tableau(), ac(2.0), g.clone(), 0.1).unwrap();
    let mut state = integ.initial_state(&vec![0.0; g.len()]).unwrap();
    state.z_ext = vec![integ.c0().sqrt()];
    assert!(integ.discrete_energy(&state).unwrap().abs() < 1e-12);
    let one = integ.initial_state(&vec![1.0; g.len()]).unwrap();
    assert!((integ.total_mass(&one) - 4.0 * PI * PI).abs() < 1e-12);
}

#[test]
fn radau_energy_formula_specializes() {
    let g = grid(8);
    let integ = Integrator::new(radau_iia(3).unwrap(), ac(2.0), g.clone(), 0.1).unwrap();
    let u = smooth(&g);
    let state = integ.initial_state(&u).unwrap();
    let uhat = g.forward(&u);
    let lu = crate::spectral::apply_symbol(&integ.ops().l_h, &uhat);
    let want = 0.5 * g.coeff_inner_product(&lu, &uhat) + state.z_ext[0].powi(2) - integ.c0();
    assert!((integ.discrete_energy(&state).unwrap() - want).abs() < 1e-12 * want.abs());
}

/// Reference for the first steps: the nonlinear variant.
#[test]
fn startup_then_advance_tracks_nonlinear_scheme() {
    let g = grid(8);
    let tau = 1e-4;
    let integ = Integrator::new(BuiltinScheme::SavGl5.tableau(), ac(2.0), g.clone(), tau).unwrap();
    let mut state = integ.startup(&smooth(&g)).unwrap();
    let mut oracle = state.clone();
    integ.advance(&mut state).unwrap();
    let (sol, _) = integ.solve_stages_nonlinear(&oracle).unwrap();
    let (u_new, _) = integ.external_update(&oracle, &sol);
    oracle.u_ext = u_new;
    let diff: f64 = state.u_ext[0].iter().zip(&oracle.u_ext[0]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff:e}");
}
