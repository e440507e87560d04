//! Empirical checks of the functional inequalities behind the energy
//! estimates: Poincaré, Ladyzhenskaya and Agmon, on grid functions.
//!
//! The interpolation inequalities are tested as boundedness statements: the
//! worst ratio over seeded band-limited samples should stay put under grid
//! refinement. Their constants are domain dependent and not asserted.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{l2_sq, laplacian, norms, Grid, GridFunction};
use crate::linalg::{smallest_eigenvalue, LinalgError, SparseOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InequalityKind {
    Poincare,
    Ladyzhenskaya,
    Agmon,
}

impl fmt::Display for InequalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InequalityKind::Poincare => "poincare",
            InequalityKind::Ladyzhenskaya => "ladyzhenskaya",
            InequalityKind::Agmon => "agmon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub name: InequalityKind,
    /// Largest `LHS / RHS` with the constant left out.
    pub worst_ratio: f64,
    pub sample_count: usize,
    /// For Poincaré the sharp discrete constant; otherwise `worst_ratio`.
    pub constant_estimate: f64,
}

/// Sharp constant in `‖u‖ ≤ C_P ‖∇u‖` over Dirichlet grid functions.
pub fn poincare_constant(grid: &Grid) -> Result<f64, LinalgError> {
    let lambda = smallest_eigenvalue(&SparseOperator::negative_laplacian(grid), 1e-12)?;
    Ok(1.0 / lambda.sqrt())
}

/// Highest sine index per axis in generated samples.
pub const SAMPLE_MODES: usize = 4;

/// Random combination of the first [`SAMPLE_MODES`] sine modes per axis with
/// coefficients decaying like `1/|k|²`. The coefficients depend only on the
/// seed and the dimension, so the same continuum function is sampled on
/// every grid.
pub fn band_limited_samples(grid: &Grid, count: usize, seed: u64) -> Vec<GridFunction> {
    let dim = grid.dim();
    let modes = SAMPLE_MODES.pow(dim as u32);
    let ext: Vec<f64> = grid.extents().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut terms: Vec<(Vec<usize>, f64)> = Vec::with_capacity(modes);
            for m in 0..modes {
                let idx: Vec<usize> = (0..dim).map(|a| (m / SAMPLE_MODES.pow(a as u32)) % SAMPLE_MODES + 1).collect();
                let k2: usize = idx.iter().map(|k| k * k).sum();
                let c: f64 = rng.gen_range(-1.0..1.0) / k2 as f64;
                terms.push((idx, c));
            }
            // The leading mode keeps every sample away from zero.
            terms[0].1 = terms[0].1.signum() * (0.5 + terms[0].1.abs());
            grid.sample(|x| {
                terms
                    .iter()
                    .map(|(idx, c)| {
                        c * idx
                            .iter()
                            .zip(x)
                            .zip(&ext)
                            .map(|((&k, &xi), &l)| (k as f64 * std::f64::consts::PI * xi / l).sin())
                            .product::<f64>()
                    })
                    .sum()
            })
        })
        .collect()
}

/// Worst ratios of the three inequalities over seeded samples.
///
/// - Poincaré: `‖u‖ / ‖∇u‖`
/// - Ladyzhenskaya: `‖u‖_{L⁴} / (‖u‖^{1-d/4} ‖u‖_{H¹}^{d/4})`
/// - Agmon: `‖u‖_{L∞} / (‖u‖^{1-d/4} (‖u‖ + ‖Δu‖)^{d/4})`
pub fn check_interpolation(grid: &Grid, sample_count: usize, seed: u64) -> Result<Vec<InequalityReport>, LinalgError> {
    assert!(sample_count >= 1, "need at least one sample");
    let d = grid.dim() as f64;
    let theta = d / 4.0;
    let mut worst = [0.0_f64; 3];
    for u in band_limited_samples(grid, sample_count, seed) {
        let nb = norms(&u);
        let h2 = nb.l2 + l2_sq(&laplacian(&u)).sqrt();
        let ratios = [
            nb.l2 / nb.h1_semi,
            nb.l4 / (nb.l2.powf(1.0 - theta) * nb.h1().powf(theta)),
            nb.linf / (nb.l2.powf(1.0 - theta) * h2.powf(theta)),
        ];
        for (w, r) in worst.iter_mut().zip(ratios) {
            *w = w.max(r);
        }
    }
    let cp = poincare_constant(grid)?;
    let kinds = [InequalityKind::Poincare, InequalityKind::Ladyzhenskaya, InequalityKind::Agmon];
    Ok(kinds
        .into_iter()
        .zip(worst)
        .map(|(name, worst_ratio)| InequalityReport {
            name,
            worst_ratio,
            sample_count,
            constant_estimate: if name == InequalityKind::Poincare { cp } else { worst_ratio },
        })
        .collect())
}
