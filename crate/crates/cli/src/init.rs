//! Initial-data recipes sampled on the collocation grid.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use savgl::spectral::{Field, SpectralGrid};

use crate::config::InitRecipe;
use crate::{CliError, CliResult};

/// Circle centers `(x, y)` and squared-radius offsets on the `2π` box.
const CIRCLES: [(f64, f64, f64); 2] = [(PI - 0.7, PI - 0.6, 1.5), (PI + 1.65, PI + 1.6, 0.7)];

/// Crystallite centers and half-width on a reference box of side 400, and
/// lattice orientations.
const GRAINS: [(f64, f64, f64); 3] = [(150.0, 150.0, PI / 4.0), (200.0, 250.0, 0.0), (250.0, 150.0, -PI / 4.0)];
const GRAIN_HALF_WIDTH: f64 = 20.0;
const REFERENCE_BOX: f64 = 400.0;

pub fn initial_field(recipe: &InitRecipe, grid: &SpectralGrid) -> CliResult<Field> {
    let l = grid.domain_length();
    let field = match *recipe {
        InitRecipe::SineProduct { amplitude, cos_y } => {
            let k = 2.0 * PI / l;
            grid.sample(|x, y| amplitude * (k * x).sin() * if cos_y { (k * y).cos() } else { (k * y).sin() })
        }
        InitRecipe::Random { scale, offset, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..grid.len()).map(|_| scale * rng.random_range(-1.0..=1.0) + offset).collect()
        }
        InitRecipe::TwoCircles { width } => {
            if !(width > 0.0) {
                return Err(CliError::Config("two_circles width must be positive".into()));
            }
            let s = l / (2.0 * PI);
            grid.sample(|x, y| {
                CIRCLES
                    .iter()
                    .map(|&(cx, cy, nu)| {
                        let d2 = (x - s * cx).powi(2) + (y - s * cy).powi(2);
                        // Clamped inside the core so the root stays real.
                        let d = (d2 - s * s * nu).max(0.0).sqrt();
                        1.0 - (d / (1.2 * width)).tanh()
                    })
                    .sum::<f64>()
            })
        }
        InitRecipe::Polycrystal { phi0, amplitude, wavenumber } => {
            let scale = l / REFERENCE_BOX;
            let half = GRAIN_HALF_WIDTH * scale;
            let period = 2.0 * PI / wavenumber;
            if !(wavenumber > 0.0) || 2.0 * half < period {
                return Err(CliError::Config(format!(
                    "polycrystal grains of width {:.3} cannot hold a lattice period {period:.3}; enlarge grid.length",
                    2.0 * half
                )));
            }
            let sqrt3 = 3f64.sqrt();
            grid.sample(|x, y| {
                for &(cx, cy, theta) in &GRAINS {
                    if (x - scale * cx).abs() <= half && (y - scale * cy).abs() <= half {
                        let xl = x * theta.sin() + y * theta.cos();
                        let yl = -x * theta.cos() + y * theta.sin();
                        return phi0
                            + amplitude
                                * ((wavenumber * yl / sqrt3).cos() * (wavenumber * xl).cos()
                                    - 0.5 * (2.0 * wavenumber * yl / sqrt3).cos());
                    }
                }
                phi0
            })
        }
    };
    Ok(field)
}
