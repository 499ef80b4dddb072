//! Seeded random perturbations built from a fixed basis of smooth bumps.
//!
//! Bump `k` (0-based, `K` bumps on support radius `S`) is
//!
//! ```text
//! b_k(r) = β((r − c_k)/h) + β((r + c_k)/h),   β(x) = (1 − x²)⁴ on |x| < 1,
//! c_k = S·(k + 1)/(K + 1),   h = 2S/(K + 1),
//! ```
//!
//! so every bump is even in `r`, smooth, and supported in `r < S + h`.
//! Coefficients are drawn uniformly from `[−1, 1]` by a ChaCha8 generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{l2_norm_sq, Grid, RadialField, RadialPair};

pub const DEFAULT_BUMPS: usize = 8;
pub const DEFAULT_SUPPORT: f64 = 5.0;

pub fn beta(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 - x * x).powi(4)
    } else {
        0.0
    }
}

/// The basis function `b_k`.
pub fn bump(r: f64, k: usize, n_bumps: usize, support: f64) -> f64 {
    let c = support * (k + 1) as f64 / (n_bumps + 1) as f64;
    let h = 2.0 * support / (n_bumps + 1) as f64;
    beta((r - c) / h) + beta((r + c) / h)
}

pub fn bump_basis(grid: Grid, n_bumps: usize, support: f64) -> Vec<RadialField> {
    (0..n_bumps).map(|k| RadialField::from_fn(grid, |r| bump(r, k, n_bumps, support))).collect()
}

pub fn random_coefficients(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// `Σ c_k b_k` with seeded coefficients, scaled to `L²` norm `eps`.
pub fn random_field(grid: Grid, seed: u64, eps: f64) -> Result<RadialField> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("perturbation amplitude must be nonnegative, got {eps}")));
    }
    let coeffs = random_coefficients(seed, DEFAULT_BUMPS);
    let f = RadialField::from_fn(grid, |r| {
        coeffs.iter().enumerate().map(|(k, c)| c * bump(r, k, DEFAULT_BUMPS, DEFAULT_SUPPORT)).sum()
    });
    let nrm = l2_norm_sq(&f).sqrt();
    if nrm == 0.0 {
        return Err(Error::Domain("grid too coarse to resolve the bump basis".into()));
    }
    Ok(f.scaled(eps / nrm))
}

/// `(u₀, u₁ + ε·Σ c_k b_k)` with `‖Σ c_k b_k‖_{L²} = 1`.
pub fn perturb_velocity(pair: &RadialPair, seed: u64, eps: f64) -> Result<RadialPair> {
    let du = random_field(*pair.grid(), seed, eps)?;
    RadialPair::new(pair.u.clone(), pair.ut.add(&du)?)
}
