//! Radial spectrum of the linearized operator `L_φ = −Δ − V + 5φ⁴`.
//!
//! In `w = r·ρ` the operator is `−d²/dr² − V + 5φ⁴` with Dirichlet conditions
//! at both ends. Negative eigenvalues `−k²` are isolated by Sturm bisection
//! and their eigenvectors recovered by inverse iteration; each negative
//! eigenvalue contributes a pair of modes growing and decaying like `e^{±kt}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{count_sign_changes, inner_product, Grid, RadialField, RadialPair, FOUR_PI};
use crate::ode::{Dopri, State, Stop, Tolerances};
use crate::potentials::Potential;
use crate::tridiag::SymTridiag;

/// Eigenvalues within this distance of zero leave hyperbolicity undecided.
pub const GAP_TOL: f64 = 1e-6;
pub const EIG_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const TAIL_MASS_TOL: f64 = 1e-8;
pub const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    /// Growth rate `k`, eigenvalue `−k²`.
    pub k: f64,
    pub eigenvalue: f64,
    /// `L²(ℝ³)`-normalized eigenfunction, positive near the origin.
    pub rho: RadialField,
    /// `‖L_φ ρ + k² ρ‖_{L²}`.
    pub residual: f64,
    /// `L²` mass in the outer tenth of the domain.
    pub tail_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralFlag {
    /// Nearest eigenvalue within [`GAP_TOL`] of zero.
    NearDegenerate,
    /// Eigenfunction tail too heavy for the Dirichlet truncation.
    TailMass { mode: usize, mass: f64 },
    Residual { mode: usize, residual: f64 },
    NotDecaying { mode: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub n_neg: usize,
    /// Ordered `−k₁² ≤ −k₂² ≤ … < 0`.
    pub eigs: Vec<Eigenpair>,
    /// Signed distance from zero to the nearest computed eigenvalue.
    pub gap: f64,
    pub flags: Vec<SpectralFlag>,
}

impl SpectralData {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigs.iter().map(|e| e.eigenvalue).collect()
    }
}

/// The symmetric tridiagonal matrix of `L_φ` on interior nodes `1..n−1`:
/// diagonal `2/dr² − V + 5φ⁴`, off-diagonal `−1/dr²`.
pub fn assemble_linearized(v: &Potential, phi: &RadialField) -> Result<SymTridiag> {
    v.grid().check_same(phi.grid())?;
    let g = *v.grid();
    let n = g.n();
    let h2 = g.dr() * g.dr();
    let vv = v.values().values();
    let pv = phi.values();
    let diag = (1..n).map(|i| 2.0 / h2 - vv[i] + 5.0 * pv[i].powi(4)).collect();
    Ok(SymTridiag::new(diag, vec![-1.0 / h2; n - 2]))
}

/// Negative eigenpairs of a matrix produced by [`assemble_linearized`] on `grid`.
pub fn negative_eigenpairs(grid: Grid, m: &SymTridiag) -> Result<SpectralData> {
    let n = grid.n();
    if m.dim() != n - 1 {
        return Err(Error::Contract(format!("matrix of dimension {} does not match grid with n = {n}", m.dim())));
    }
    let negatives = m.eigenvalues_below(0.0, EIG_TOL);
    let n_neg = negatives.len();
    let (_, hi) = m.gershgorin();
    let first_nonneg = m.eigenvalue_in(n_neg, -EIG_TOL, hi + 1.0, EIG_TOL);
    let gap = match negatives.last() {
        Some(&last) if last.abs() < first_nonneg.abs() => last,
        _ => first_nonneg,
    };

    let norm = (FOUR_PI * grid.dr()).sqrt();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n_neg);
    let mut eigs = Vec::with_capacity(n_neg);
    let mut flags = Vec::new();
    for (mode, &mu) in negatives.iter().enumerate() {
        let mut x = m.inverse_iteration(mu, &vectors)?;
        if x[0] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let ax = m.matvec(&x);
        let residual = ax.iter().zip(&x).map(|(a, xi)| (a - mu * xi).powi(2)).sum::<f64>().sqrt();
        let mut w = vec![0.0; n + 1];
        for (i, xi) in x.iter().enumerate() {
            w[i + 1] = xi / norm;
        }
        let tail_start = grid.index_below(0.9 * grid.r_max());
        let tail_mass = FOUR_PI * grid.dr() * w[tail_start..].iter().map(|v| v * v).sum::<f64>();
        let rho = RadialField::from_w(grid, &w);
        if residual > RESIDUAL_TOL {
            flags.push(SpectralFlag::Residual { mode, residual });
        }
        if tail_mass > TAIL_MASS_TOL {
            flags.push(SpectralFlag::TailMass { mode, mass: tail_mass });
        }
        if !decays(&rho) {
            flags.push(SpectralFlag::NotDecaying { mode });
        }
        vectors.push(x);
        eigs.push(Eigenpair { k: (-mu).sqrt(), eigenvalue: mu, rho, residual, tail_mass });
    }
    if gap.abs() <= GAP_TOL {
        flags.push(SpectralFlag::NearDegenerate);
    }
    Ok(SpectralData { n_neg, eigs, gap, flags })
}

/// `(1+r)²|ρ|` over the outer half must stay below its inner-half maximum.
fn decays(rho: &RadialField) -> bool {
    let g = rho.grid();
    let weighted = |i: usize| (1.0 + g.r(i)).powi(2) * rho.values()[i].abs();
    let half = g.n() / 2;
    let inner = (0..half).map(weighted).fold(0.0, f64::max);
    let outer = (half..=g.n()).map(weighted).fold(0.0, f64::max);
    outer <= inner
}

/// Assembles and decomposes `L_φ` in one call.
pub fn spectrum(v: &Potential, phi: &RadialField) -> Result<SpectralData> {
    let m = assemble_linearized(v, phi)?;
    negative_eigenpairs(*v.grid(), &m)
}

/// Number of negative eigenvalues of `L_φ` (Sturm count only).
pub fn count_negative(v: &Potential, phi: &RadialField) -> Result<usize> {
    Ok(assemble_linearized(v, phi)?.sturm_count(0.0))
}

/// Sign changes in `(0, r_max)` of the zero-energy solution
/// `w'' = (5φ⁴ − V) w`, `w(0) = 0`, `w'(0) = 1`, integrated as an ODE.
/// By the oscillation theorem this equals the number of negative Dirichlet
/// eigenvalues.
pub fn zero_energy_sign_changes(v: &Potential, phi: &RadialField) -> Result<usize> {
    v.grid().check_same(phi.grid())?;
    let g = *v.grid();
    let rhs = |r: f64, y: &State| -> State {
        let p = phi.value_at(r);
        [y[1], (5.0 * p.powi(4) - v.eval(r)) * y[0]]
    };
    let mut ode = Dopri::new(rhs, 0.0, [0.0, 1.0], g.dr() / 4.0, Tolerances { rtol: 1e-10, atol: 1e-14, ..Tolerances::default() });
    let mut w = Vec::with_capacity(g.n());
    for i in 1..g.n() {
        loop {
            match ode.advance_to(g.r(i), |_, y| y[0].abs().max(y[1].abs()) > 1e100) {
                Stop::Reached => break,
                Stop::Event => {
                    let s = 1e-100;
                    ode.y = [ode.y[0] * s, ode.y[1] * s];
                    w.iter_mut().for_each(|x: &mut f64| *x *= s);
                }
                other => return Err(Error::Eigen(format!("zero-energy shot failed: {other:?}"))),
            }
        }
        w.push(ode.y[0]);
    }
    Ok(count_sign_changes(&w, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Stable,
    Unstable(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub classification: Classification,
    pub n_neg: usize,
    pub gap: f64,
    /// Hyperbolicity is numerically undecided.
    pub near_degenerate: bool,
}

/// Stable iff `L_φ` has no negative eigenvalue and the gap exceeds
/// [`GAP_TOL`]; otherwise `Unstable(n)` with `n` the negative count.
pub fn classify(v: &Potential, phi: &RadialField) -> Result<StabilityReport> {
    let m = assemble_linearized(v, phi)?;
    let n_neg = m.sturm_count(0.0);
    let negatives = m.eigenvalues_below(0.0, EIG_TOL);
    let (_, hi) = m.gershgorin();
    let first_nonneg = m.eigenvalue_in(n_neg, -EIG_TOL, hi + 1.0, EIG_TOL);
    let gap = match negatives.last() {
        Some(&last) if last.abs() < first_nonneg.abs() => last,
        _ => first_nonneg,
    };
    let near_degenerate = gap.abs() <= GAP_TOL;
    let classification = if n_neg > 0 { Classification::Unstable(n_neg) } else { Classification::Stable };
    Ok(StabilityReport { classification, n_neg, gap, near_degenerate })
}

/// Coefficient of the growing mode `(ρ_j, k_j ρ_j)` in `pair − (φ, 0)`:
/// `(k_j⟨u−φ, ρ_j⟩ + ⟨u_t, ρ_j⟩) / (2k_j)`. `mode` is 0-based.
pub fn unstable_coefficient(pair: &RadialPair, phi: &RadialField, spec: &SpectralData, mode: usize) -> Result<f64> {
    let e = spec
        .eigs
        .get(mode)
        .ok_or_else(|| Error::Contract(format!("mode {mode} out of range (n_neg = {})", spec.n_neg)))?;
    let du = pair.u.sub(phi)?;
    let a = inner_product(&du, &e.rho)?;
    let b = inner_product(&pair.ut, &e.rho)?;
    Ok((e.k * a + b) / (2.0 * e.k))
}

/// Coefficient of the decaying mode `(ρ_j, −k_j ρ_j)`.
pub fn stable_coefficient(pair: &RadialPair, phi: &RadialField, spec: &SpectralData, mode: usize) -> Result<f64> {
    let e = spec
        .eigs
        .get(mode)
        .ok_or_else(|| Error::Contract(format!("mode {mode} out of range (n_neg = {})", spec.n_neg)))?;
    let du = pair.u.sub(phi)?;
    let a = inner_product(&du, &e.rho)?;
    let b = inner_product(&pair.ut, &e.rho)?;
    Ok((e.k * a - b) / (2.0 * e.k))
}

/// The growing-mode direction `(ρ_j, k_j ρ_j)`.
pub fn growing_mode(spec: &SpectralData, mode: usize) -> Result<RadialPair> {
    let e = spec
        .eigs
        .get(mode)
        .ok_or_else(|| Error::Contract(format!("mode {mode} out of range (n_neg = {})", spec.n_neg)))?;
    RadialPair::new(e.rho.clone(), e.rho.scaled(e.k))
}
