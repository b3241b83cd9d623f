//! Gradient flows `u_t = G (L u + δF1/δu)` split for the SAV method.
//!
//! | model | L | G | F1 integrand |
//! |---|---|---|---|
//! | Allen–Cahn | `-ε²Δ + β` | `-1` | `¼(u²-1)² - (β/2)u²` |
//! | Cahn–Hilliard | `-ε²Δ + β` | `Δ` | same |
//! | phase-field crystal | `αΔ² + β` | `Δ` | `¼u⁴ - (ε1/3)u³ + ((1-ε2-β)/2)u² - |∇u|² + ((1-α)/2)(Δu)²` |
//!
//! Nonlinear terms are evaluated pointwise on the collocation grid.

use crate::error::{Error, Result};
use crate::spectral::{Field, SpectralGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllenCahn {
    pub epsilon: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CahnHilliard {
    pub epsilon: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFieldCrystal {
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    AllenCahn(AllenCahn),
    CahnHilliard(CahnHilliard),
    PhaseFieldCrystal(PhaseFieldCrystal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    /// `G = -1`
    L2,
    /// `G = Δ`
    HMinus1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientFlowModel {
    kind: ModelKind,
    /// `None` selects [`GradientFlowModel::default_c0`] for the domain.
    c0: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} = {v} must be positive")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} = {v} must be nonnegative")))
    }
}

impl GradientFlowModel {
    pub fn allen_cahn(p: AllenCahn) -> Result<Self> {
        positive("epsilon", p.epsilon)?;
        nonnegative("beta", p.beta)?;
        Ok(Self { kind: ModelKind::AllenCahn(p), c0: None })
    }

    pub fn cahn_hilliard(p: CahnHilliard) -> Result<Self> {
        positive("epsilon", p.epsilon)?;
        nonnegative("beta", p.beta)?;
        Ok(Self { kind: ModelKind::CahnHilliard(p), c0: None })
    }

    pub fn phase_field_crystal(p: PhaseFieldCrystal) -> Result<Self> {
        nonnegative("epsilon1", p.epsilon1)?;
        nonnegative("epsilon2", p.epsilon2)?;
        nonnegative("beta", p.beta)?;
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(Error::Precondition(format!("alpha = {} must lie in (0, 1)", p.alpha)));
        }
        Ok(Self { kind: ModelKind::PhaseFieldCrystal(p), c0: None })
    }

    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        nonnegative("c0", c0)?;
        self.c0 = Some(c0);
        Ok(self)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::AllenCahn(_) => "allen_cahn",
            ModelKind::CahnHilliard(_) => "cahn_hilliard",
            ModelKind::PhaseFieldCrystal(_) => "phase_field_crystal",
        }
    }

    pub fn flow(&self) -> Flow {
        match self.kind {
            ModelKind::AllenCahn(_) => Flow::L2,
            _ => Flow::HMinus1,
        }
    }

    /// Fourier symbol of L at `|k|² = ξ² + η²`.
    pub fn l_symbol(&self, k2: f64) -> f64 {
        match self.kind {
            ModelKind::AllenCahn(AllenCahn { epsilon, beta })
            | ModelKind::CahnHilliard(CahnHilliard { epsilon, beta }) => epsilon * epsilon * k2 + beta,
            ModelKind::PhaseFieldCrystal(p) => p.alpha * k2 * k2 + p.beta,
        }
    }

    /// Fourier symbol of G at `|k|²`.
    pub fn g_symbol(&self, k2: f64) -> f64 {
        match self.flow() {
            Flow::L2 => -1.0,
            Flow::HMinus1 => -k2,
        }
    }

    /// Magnitude of a pointwise lower bound of the F1 integrand.
    fn pointwise_floor(&self) -> f64 {
        match self.kind {
            ModelKind::AllenCahn(AllenCahn { beta, .. }) | ModelKind::CahnHilliard(CahnHilliard { beta, .. }) => {
                beta * beta / 4.0 + beta / 2.0
            }
            ModelKind::PhaseFieldCrystal(p) => {
                // u Δu + ((1-α)/2)(Δu)² ≥ -u²/(2(1-α)) leaves a quartic in u.
                let k = (1.0 - p.epsilon2 - p.beta) / 2.0 - 1.0 / (2.0 * (1.0 - p.alpha));
                let g = |u: f64| 0.25 * u.powi(4) - p.epsilon1 / 3.0 * u.powi(3) + k * u * u;
                let disc = p.epsilon1 * p.epsilon1 - 8.0 * k;
                let mut min = 0.0_f64;
                if disc >= 0.0 {
                    for root in [(p.epsilon1 - disc.sqrt()) / 2.0, (p.epsilon1 + disc.sqrt()) / 2.0] {
                        min = min.min(g(root));
                    }
                }
                -min
            }
        }
    }

    /// `area × c*` where `c*` bounds the F1 integrand from below.
    pub fn default_c0(&self, area: f64) -> f64 {
        area * self.pointwise_floor()
    }

    /// The configured offset, or the default for `grid`'s domain.
    pub fn c0(&self, grid: &SpectralGrid) -> f64 {
        self.c0.unwrap_or_else(|| self.default_c0(grid.area()))
    }

    pub fn energy_f1(&self, grid: &SpectralGrid, u: &[f64]) -> Result<f64> {
        let h2 = grid.h() * grid.h();
        let sum: f64 = match self.kind {
            ModelKind::AllenCahn(AllenCahn { beta, .. }) | ModelKind::CahnHilliard(CahnHilliard { beta, .. }) => u
                .iter()
                .map(|&v| {
                    let w = v * v - 1.0;
                    0.25 * w * w - 0.5 * beta * v * v
                })
                .sum(),
            ModelKind::PhaseFieldCrystal(p) => {
                let lap = grid.laplacian(u)?;
                let quad = (1.0 - p.epsilon2 - p.beta) / 2.0;
                u.iter()
                    .zip(&lap)
                    .map(|(&v, &d)| {
                        let v2 = v * v;
                        0.25 * v2 * v2 - p.epsilon1 / 3.0 * v2 * v + quad * v2 + v * d
                            + 0.5 * (1.0 - p.alpha) * d * d
                    })
                    .sum()
            }
        };
        Ok(h2 * sum)
    }

    pub fn variational_derivative_f1(&self, grid: &SpectralGrid, u: &[f64]) -> Result<Field> {
        match self.kind {
            ModelKind::AllenCahn(AllenCahn { beta, .. }) | ModelKind::CahnHilliard(CahnHilliard { beta, .. }) => {
                Ok(u.iter().map(|&v| v * v * v - v - beta * v).collect())
            }
            ModelKind::PhaseFieldCrystal(p) => {
                // 2Δu + (1-α)Δ²u as a single multiplier.
                let sigma: Vec<f64> = grid.k2().iter().map(|&k2| -2.0 * k2 + (1.0 - p.alpha) * k2 * k2).collect();
                let linear = grid.filter(&sigma, u)?;
                let lin = 1.0 - p.epsilon2 - p.beta;
                Ok(u.iter()
                    .zip(&linear)
                    .map(|(&v, &d)| v * v * v - p.epsilon1 * v * v + lin * v + d)
                    .collect())
            }
        }
    }

    /// `W(u) = (δF1/δu)(u) / z`.
    pub fn sav_w(&self, grid: &SpectralGrid, u: &[f64], z: f64) -> Result<Field> {
        if !(z > 0.0) {
            return Err(Error::SavBreakdown { value: z });
        }
        let mut w = self.variational_derivative_f1(grid, u)?;
        for v in &mut w {
            *v /= z;
        }
        Ok(w)
    }

    /// `√(F1(u) + C0)`.
    pub fn sav_value(&self, grid: &SpectralGrid, u: &[f64]) -> Result<f64> {
        let arg = self.energy_f1(grid, u)? + self.c0(grid);
        if !(arg > 0.0) {
            return Err(Error::SavBreakdown { value: arg });
        }
        Ok(arg.sqrt())
    }

    /// Initial auxiliary value `z(0)`.
    pub fn sav_init(&self, grid: &SpectralGrid, u0: &[f64]) -> Result<f64> {
        self.sav_value(grid, u0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ac(beta: f64) -> GradientFlowModel {
        GradientFlowModel::allen_cahn(AllenCahn { epsilon: 0.1, beta }).unwrap()
    }

    fn ch() -> GradientFlowModel {
        GradientFlowModel::cahn_hilliard(CahnHilliard { epsilon: 1.0, beta: 2.0 }).unwrap()
    }

    fn pfc() -> GradientFlowModel {
        GradientFlowModel::phase_field_crystal(PhaseFieldCrystal { epsilon1: 0.0, epsilon2: 0.5, alpha: 0.99, beta: 4.0 })
            .unwrap()
    }

    fn grid(n: usize) -> SpectralGrid {
        SpectralGrid::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn constant_fields() {
        let g = grid(16);
        let m = ac(2.0);
        let zero = vec![0.0; g.len()];
        let one = vec![1.0; g.len()];
        assert!((m.energy_f1(&g, &zero).unwrap() - PI * PI).abs() < 1e-12);
        assert!((m.energy_f1(&g, &one).unwrap() + 4.0 * PI * PI).abs() < 1e-12);
        assert!(m.variational_derivative_f1(&g, &zero).unwrap().iter().all(|&v| v == 0.0));
        let two = vec![2.0; g.len()];
        assert!(m.variational_derivative_f1(&g, &two).unwrap().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn constant_field_energy_is_area_times_integrand() {
        let g = grid(32);
        for (model, c) in [(ac(2.0), 0.3_f64), (ch(), -0.7), (pfc(), 0.6)] {
            let u = vec![c; g.len()];
            let integrand = match model.kind() {
                ModelKind::PhaseFieldCrystal(p) => {
                    0.25 * c.powi(4) - p.epsilon1 / 3.0 * c.powi(3) + (1.0 - p.epsilon2 - p.beta) / 2.0 * c * c
                }
                _ => 0.25 * (c * c - 1.0).powi(2) - c * c,
            };
            let want = g.area() * integrand;
            assert!((model.energy_f1(&g, &u).unwrap() - want).abs() <= 1e-13 * want.abs());
        }
    }

    #[test]
    fn cahn_hilliard_energy_matches_analytic_integral() {
        // ∫ sin²x sin²y = π², ∫ sin⁴x sin⁴y = 9π²/16 on the 2π box.
        let g = grid(256);
        let a: f64 = 0.4;
        let u = g.sample(|x, y| a * x.sin() * y.sin());
        let want = 0.25 * a.powi(4) * 9.0 * PI * PI / 16.0 - 1.5 * a * a * PI * PI + PI * PI;
        let got = ch().energy_f1(&g, &u).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn sav_init_values() {
        let g = grid(16);
        let zero = vec![0.0; g.len()];
        let m = ac(2.0);
        assert!((m.c0(&g) - 8.0 * PI * PI).abs() < 1e-12);
        assert!((m.sav_init(&g, &zero).unwrap() - 3.0 * PI).abs() < 1e-12);
        let m0 = ac(2.0).with_c0(0.0).unwrap();
        assert!((m0.sav_init(&g, &zero).unwrap() - PI).abs() < 1e-12);
        let one = vec![1.0; g.len()];
        match m0.sav_init(&g, &one) {
            Err(Error::SavBreakdown { value }) => assert!((value + 4.0 * PI * PI).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_offsets() {
        let area = 4.0 * PI * PI;
        assert!((ac(2.0).default_c0(area) - 8.0 * PI * PI).abs() < 1e-12);
        assert_eq!(ac(0.0).default_c0(area), 0.0);
        // k = (1 - 0.5 - 4)/2 - 1/(2·0.01) = -51.75, minimum of ¼u⁴ + k u² is -k².
        let c0 = pfc().default_c0(area);
        assert!((c0 - 51.75f64.powi(2) * area).abs() < 1e-8 * c0);
        let g = grid(64);
        let u = g.sample(|x, y| 0.4 * x.sin() * y.cos());
        assert!(pfc().sav_init(&g, &u).is_ok());
    }

    #[test]
    fn pfc_offset_bounds_energy_numerically() {
        let m = pfc();
        let ModelKind::PhaseFieldCrystal(p) = *m.kind() else { unreachable!() };
        let k = (1.0 - p.epsilon2 - p.beta) / 2.0 - 1.0 / (2.0 * (1.0 - p.alpha));
        let min = (-20_000..=20_000)
            .map(|i| {
                let u = i as f64 * 1e-3;
                0.25 * u.powi(4) - p.epsilon1 / 3.0 * u.powi(3) + k * u * u
            })
            .fold(f64::INFINITY, f64::min);
        assert!((m.default_c0(1.0) + min).abs() < 1e-3);
    }

    #[test]
    fn sav_w_scaling() {
        let g = grid(16);
        let u = g.sample(|x, y| x.sin() + 0.3 * y.cos());
        let m = ac(2.0);
        let d = m.variational_derivative_f1(&g, &u).unwrap();
        assert_eq!(m.sav_w(&g, &u, 1.0).unwrap(), d);
        let zero = vec![0.0; g.len()];
        assert!(m.sav_w(&g, &zero, 3.0).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(m.sav_w(&g, &u, 0.0), Err(Error::SavBreakdown { .. })));
        assert!(matches!(m.sav_w(&g, &u, -1.0), Err(Error::SavBreakdown { .. })));
    }

    #[test]
    fn parameter_validation() {
        assert!(GradientFlowModel::allen_cahn(AllenCahn { epsilon: 0.0, beta: 2.0 }).is_err());
        assert!(GradientFlowModel::cahn_hilliard(CahnHilliard { epsilon: 1.0, beta: -1.0 }).is_err());
        let bad = PhaseFieldCrystal { epsilon1: 0.0, epsilon2: 0.5, alpha: 1.0, beta: 0.0 };
        assert!(GradientFlowModel::phase_field_crystal(bad).is_err());
        assert!(ac(2.0).with_c0(-1.0).is_err());
    }

    fn smooth_random(g: &SpectralGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let coeffs: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.random_range(-0.5..0.5),
                    rng.random_range(0..4) as f64,
                    rng.random_range(0..4) as f64,
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        g.sample(|x, y| coeffs.iter().map(|(a, m, l, ph)| a * (m * x + l * y + ph).cos()).sum())
    }

    fn gradient_check(model: &GradientFlowModel, seed: u64) {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = smooth_random(&g, &mut rng);
        let grad = model.variational_derivative_f1(&g, &u).unwrap();
        let eps = 1e-5;
        for _ in 0..10 {
            let v = smooth_random(&g, &mut rng);
            let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
            let fd = (model.energy_f1(&g, &plus).unwrap() - model.energy_f1(&g, &minus).unwrap()) / (2.0 * eps);
            let exact = g.inner_product(&grad, &v);
            let scale = exact.abs().max(g.inner_product(&grad, &grad).sqrt() * g.inner_product(&v, &v).sqrt());
            assert!((fd - exact).abs() <= 1e-6 * scale, "{} fd={fd} exact={exact}", model.name());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn allen_cahn_gradient(seed in any::<u64>()) { gradient_check(&ac(2.0), seed); }
        #[test]
        fn cahn_hilliard_gradient(seed in any::<u64>()) { gradient_check(&ch(), seed); }
        #[test]
        fn pfc_gradient(seed in any::<u64>()) { gradient_check(&pfc(), seed); }

        #[test]
        fn sav_w_is_homogeneous_in_inverse_z(seed in any::<u64>(), z in 0.1f64..100.0) {
            let g = grid(16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = smooth_random(&g, &mut rng);
            let m = pfc();
            let w1 = m.sav_w(&g, &u, z).unwrap();
            let w2 = m.sav_w(&g, &u, 2.0 * z).unwrap();
            for (a, b) in w1.iter().zip(&w2) {
                prop_assert_eq!(*a / 2.0, *b);
            }
        }
    }
}
