//! Uniform radial mesh, radial fields and the quadratures used everywhere else.
//!
//! Fields store the physical amplitude `u(r)`; the differential operators work
//! on `w = r·u`, which turns the radial Laplacian into `w''/r` and removes the
//! coordinate singularity. All integrals carry the `4π` solid-angle factor, so
//! they equal the corresponding integrals over ℝ³.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FOUR_PI: f64 = 4.0 * PI;

/// Uniform mesh `r_i = i·dr`, `i = 0..=n`, on `[0, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    r_max: f64,
    dr: f64,
}

impl Grid {
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < 16 {
            return Err(Error::Domain(format!("grid needs at least 16 intervals, got {n}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::Domain(format!("r_max must be positive and finite, got {r_max}")));
        }
        Ok(Self { n, r_max, dr: r_max / n as f64 })
    }

    /// Number of intervals; the grid has `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.r(i)).collect()
    }

    /// Index of the last node with `r_i <= r`, clamped to the grid.
    pub fn index_below(&self, r: f64) -> usize {
        ((r / self.dr).floor().max(0.0) as usize).min(self.n)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n || self.r_max != other.r_max {
            return Err(Error::Contract(format!(
                "grid mismatch: (n = {}, r_max = {}) vs (n = {}, r_max = {})",
                self.n, self.r_max, other.n, other.r_max
            )));
        }
        Ok(())
    }

    /// Doubles the resolution on the same domain.
    pub fn refined(&self) -> Grid {
        Grid { n: 2 * self.n, r_max: self.r_max, dr: self.r_max / (2 * self.n) as f64 }
    }
}

/// A radial function sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Grid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: (0..=grid.n()).map(|i| f(grid.r(i))).collect() }
    }

    /// Builds `u = w/r` from samples of `w`, recovering `u(0)` from evenness
    /// of `u` (`u(0) = (4u_1 - u_2)/3`).
    pub fn from_w(grid: Grid, w: &[f64]) -> Self {
        debug_assert_eq!(w.len(), grid.len());
        let mut values = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            values[i] = w[i] / grid.r(i);
        }
        values[0] = (4.0 * values[1] - values[2]) / 3.0;
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `w_i = r_i·u_i`.
    pub fn to_w(&self) -> Vec<f64> {
        self.values.iter().enumerate().map(|(i, u)| self.grid.r(i) * u).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &RadialField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &RadialField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &RadialField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self.zip_with(other, |a, b| a + s * b))
    }

    fn zip_with(&self, other: &RadialField, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    /// Linear interpolation; beyond `r_max` the field is continued with the
    /// harmonic tail `u(r_max)·r_max/r`.
    pub fn value_at(&self, r: f64) -> f64 {
        let g = &self.grid;
        if r >= g.r_max() {
            return self.values[g.n()] * g.r_max() / r;
        }
        let x = (r / g.dr()).max(0.0);
        let i = (x.floor() as usize).min(g.n() - 1);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Number of sign changes, ignoring entries below `rel_floor·max|u|`.
    pub fn sign_changes(&self, rel_floor: f64) -> usize {
        count_sign_changes(&self.values, rel_floor * self.max_abs())
    }
}

pub(crate) fn count_sign_changes(values: &[f64], floor: f64) -> usize {
    let mut last = 0.0_f64;
    let mut changes = 0;
    for &v in values {
        if v.abs() <= floor || v == 0.0 {
            continue;
        }
        if last != 0.0 && v.signum() != last {
            changes += 1;
        }
        last = v.signum();
    }
    changes
}

/// A phase-space point `(u, u_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPair {
    pub u: RadialField,
    pub ut: RadialField,
}

impl RadialPair {
    pub fn new(u: RadialField, ut: RadialField) -> Result<Self> {
        u.grid().check_same(ut.grid())?;
        if !u.is_finite() || !ut.is_finite() {
            return Err(Error::Domain("state contains non-finite values".into()));
        }
        Ok(Self { u, ut })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { u: RadialField::zeros(grid), ut: RadialField::zeros(grid) }
    }

    /// Static state `(φ, 0)`.
    pub fn stationary(phi: &RadialField) -> Self {
        Self { u: phi.clone(), ut: RadialField::zeros(*phi.grid()) }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &RadialPair) -> Result<Self> {
        Ok(Self { u: self.u.axpy(s, &other.u)?, ut: self.ut.axpy(s, &other.ut)? })
    }

    pub fn sub(&self, other: &RadialPair) -> Result<Self> {
        Ok(Self { u: self.u.sub(&other.u)?, ut: self.ut.sub(&other.ut)? })
    }

    /// `(u, u_t) -> (u, -u_t)`.
    pub fn time_reversed(&self) -> Self {
        Self { u: self.u.clone(), ut: self.ut.scaled(-1.0) }
    }
}

/// Second-order approximation of `Δu = (r·u)''/r`.
///
/// Interior nodes use the three-point stencil on `w`; the origin uses
/// `Δu(0) ≈ 6(u_1 - u_0)/dr²` and the outer node a one-sided second-order
/// stencil.
pub fn laplacian_w(field: &RadialField) -> RadialField {
    let g = *field.grid();
    let n = g.n();
    let dr2 = g.dr() * g.dr();
    let u = field.values();
    let w = field.to_w();
    let mut out = vec![0.0; n + 1];
    out[0] = 6.0 * (u[1] - u[0]) / dr2;
    for i in 1..n {
        out[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (dr2 * g.r(i));
    }
    out[n] = (2.0 * w[n] - 5.0 * w[n - 1] + 4.0 * w[n - 2] - w[n - 3]) / (dr2 * g.r(n));
    RadialField { grid: g, values: out }
}

/// Checked variant of [`laplacian_w`] for callers that carry a grid of their own.
pub fn laplacian_on(grid: &Grid, field: &RadialField) -> Result<RadialField> {
    grid.check_same(field.grid())?;
    Ok(laplacian_w(field))
}

/// `u'` at the nodes: zero at the origin (evenness), central differences in
/// the interior, one-sided second order at `r_max`.
pub fn radial_derivative(field: &RadialField) -> Vec<f64> {
    let g = field.grid();
    let n = g.n();
    let u = field.values();
    let h = g.dr();
    let mut du = vec![0.0; n + 1];
    for i in 1..n {
        du[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    du[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
    du
}

/// `4π ∫ f(r) r² dr` by the trapezoid rule, `f` given at the nodes.
pub fn radial_integral(grid: &Grid, f: &[f64]) -> f64 {
    debug_assert_eq!(f.len(), grid.len());
    let n = grid.n();
    let mut s = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        let r = grid.r(i);
        let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
        s += wgt * fi * r * r;
    }
    FOUR_PI * grid.dr() * s
}

/// `‖∇u‖²_{L²(ℝ³)}`.
pub fn h1_seminorm_sq(field: &RadialField) -> f64 {
    let du = radial_derivative(field);
    let sq: Vec<f64> = du.iter().map(|d| d * d).collect();
    radial_integral(field.grid(), &sq)
}

/// `‖u‖²_{L²(ℝ³)}`.
pub fn l2_norm_sq(field: &RadialField) -> f64 {
    let sq: Vec<f64> = field.values().iter().map(|u| u * u).collect();
    radial_integral(field.grid(), &sq)
}

/// `‖u‖_{L^p(ℝ³)}`.
pub fn lp_norm(field: &RadialField, p: f64) -> f64 {
    let pw: Vec<f64> = field.values().iter().map(|u| u.abs().powf(p)).collect();
    radial_integral(field.grid(), &pw).powf(1.0 / p)
}

/// `‖u‖_{L⁶(ℝ³)}`, the scale-critical norm.
pub fn l6_norm(field: &RadialField) -> f64 {
    let pw: Vec<f64> = field.values().iter().map(|u| u.powi(6)).collect();
    radial_integral(field.grid(), &pw).powf(1.0 / 6.0)
}

/// `⟨f, g⟩_{L²(ℝ³)}`.
pub fn inner_product(f: &RadialField, g: &RadialField) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let prod: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| a * b).collect();
    Ok(radial_integral(f.grid(), &prod))
}

/// `‖(u, u_t)‖_{Ḣ¹×L²}`.
pub fn energy_norm(pair: &RadialPair) -> f64 {
    (h1_seminorm_sq(&pair.u) + l2_norm_sq(&pair.ut)).sqrt()
}

/// Integral over `[a, b]` of the piecewise-linear interpolant of the nodal
/// samples `g` (no `4π`, no `r²`). Built from a cumulative sum so that
/// integrals over adjacent intervals add up exactly.
fn piecewise_linear_integral(grid: &Grid, g: &[f64], a: f64, b: f64) -> f64 {
    let cumulative = |x: f64| -> f64 {
        let h = grid.dr();
        let n = grid.n();
        let xi = (x / h).clamp(0.0, n as f64);
        let j = (xi.floor() as usize).min(n - 1);
        let t = xi - j as f64;
        let mut c = 0.0;
        for k in 0..j {
            c += 0.5 * h * (g[k] + g[k + 1]);
        }
        c + h * (g[j] * t + 0.5 * (g[j + 1] - g[j]) * t * t)
    };
    cumulative(b) - cumulative(a)
}

fn check_annulus(grid: &Grid, rho_in: f64, rho_out: f64) -> Result<()> {
    let slack = 1e-12 * grid.r_max();
    if rho_out > grid.r_max() + slack {
        return Err(Error::Domain(format!(
            "annulus outer radius {rho_out} exceeds r_max = {}; enlarge the grid",
            grid.r_max()
        )));
    }
    if !(rho_in >= 0.0 && rho_in <= rho_out) {
        return Err(Error::Domain(format!("invalid annulus [{rho_in}, {rho_out}]")));
    }
    Ok(())
}

/// `4π ∫_{ρ_in}^{ρ_out} (u_r² + u_t²) r² dr`.
pub fn annulus_energy(pair: &RadialPair, rho_in: f64, rho_out: f64) -> Result<f64> {
    let g = *pair.grid();
    check_annulus(&g, rho_in, rho_out)?;
    let du = radial_derivative(&pair.u);
    let integrand: Vec<f64> = (0..g.len())
        .map(|i| {
            let r = g.r(i);
            (du[i] * du[i] + pair.ut.values()[i].powi(2)) * r * r
        })
        .collect();
    let rho_out = rho_out.min(g.r_max());
    Ok(FOUR_PI * piecewise_linear_integral(&g, &integrand, rho_in, rho_out))
}

/// `4π ∫_{ρ_in}^{ρ_out} (w_r² + w_t²) dr` with `w = r·u`.
///
/// Differs from [`annulus_energy`] by the boundary term
/// `4π [w²/r]_{ρ_in}^{ρ_out}`, which is exactly the energy of the static
/// `c/r` tail carried by every finite-energy steady state. What remains is the
/// radiative part of the exterior energy.
pub fn radiative_annulus_energy(pair: &RadialPair, rho_in: f64, rho_out: f64) -> Result<f64> {
    let g = *pair.grid();
    check_annulus(&g, rho_in, rho_out)?;
    let n = g.n();
    let h = g.dr();
    let w = pair.u.to_w();
    let wt = pair.ut.to_w();
    let mut dw = vec![0.0; n + 1];
    dw[0] = pair.u.values()[0];
    for i in 1..n {
        dw[i] = (w[i + 1] - w[i - 1]) / (2.0 * h);
    }
    dw[n] = (3.0 * w[n] - 4.0 * w[n - 1] + w[n - 2]) / (2.0 * h);
    let integrand: Vec<f64> = (0..=n).map(|i| dw[i] * dw[i] + wt[i] * wt[i]).collect();
    let rho_out = rho_out.min(g.r_max());
    Ok(FOUR_PI * piecewise_linear_integral(&g, &integrand, rho_in, rho_out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(400, 10.0).unwrap()
    }

    #[test]
    fn grid_nodes_are_uniform() {
        let g = grid();
        assert_eq!(g.r(0), 0.0);
        assert!((g.dr() * g.n() as f64 - g.r_max()).abs() < 1e-12);
        let r = g.nodes();
        assert!(r.windows(2).all(|p| (p[1] - p[0] - g.dr()).abs() < 1e-12));
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(32, -1.0).is_err());
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let f = RadialField::from_fn(grid(), |_| 1.0);
        let lap = laplacian_w(&f);
        assert!(lap.max_abs() < 1e-9);
    }

    #[test]
    fn laplacian_of_r_squared_is_six() {
        let f = RadialField::from_fn(grid(), |r| r * r);
        let lap = laplacian_w(&f);
        let g = grid();
        for i in 0..g.n() {
            assert!((lap.values()[i] - 6.0).abs() < 1e-7, "node {i}: {}", lap.values()[i]);
        }
    }

    #[test]
    fn laplacian_rejects_other_grid() {
        let f = RadialField::from_fn(grid(), |r| r);
        let other = Grid::new(100, 10.0).unwrap();
        assert!(matches!(laplacian_on(&other, &f), Err(Error::Contract(_))));
    }

    #[test]
    fn norms_of_zero_field() {
        let z = RadialField::zeros(grid());
        assert_eq!(h1_seminorm_sq(&z), 0.0);
        assert_eq!(l2_norm_sq(&z), 0.0);
        assert_eq!(l6_norm(&z), 0.0);
    }

    #[test]
    fn annulus_of_zero_pair_is_zero() {
        let p = RadialPair::zeros(grid());
        assert_eq!(annulus_energy(&p, 0.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn annulus_rejects_radius_beyond_grid() {
        let p = RadialPair::zeros(grid());
        assert!(matches!(annulus_energy(&p, 0.0, 10.5), Err(Error::Domain(_))));
        assert!(matches!(annulus_energy(&p, 3.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn full_annulus_equals_norm_sum() {
        let g = grid();
        let p = RadialPair::new(
            RadialField::from_fn(g, |r| (-r * r).exp()),
            RadialField::from_fn(g, |r| r * (-r * r / 2.0).exp()),
        )
        .unwrap();
        let full = annulus_energy(&p, 0.0, g.r_max()).unwrap();
        let sum = h1_seminorm_sq(&p.u) + l2_norm_sq(&p.ut);
        assert!((full - sum).abs() < 1e-12 * sum.max(1.0));
    }

    #[test]
    fn compact_support_gives_zero_exterior() {
        let g = grid();
        let bump = |r: f64| if r < 1.0 { (1.0 - r * r).powi(4) } else { 0.0 };
        let p = RadialPair::new(RadialField::from_fn(g, bump), RadialField::from_fn(g, bump)).unwrap();
        assert_eq!(annulus_energy(&p, 2.0, g.r_max()).unwrap(), 0.0);
        assert!(annulus_energy(&p, 0.0, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn radiative_energy_removes_harmonic_tail() {
        let g = Grid::new(4000, 40.0).unwrap();
        // u = 3/r outside r = 2: static tail, zero radiative content there.
        let u = RadialField::from_fn(g, |r| if r < 2.0 { 3.0 * (3.0 - r * r / 4.0) / 4.0 } else { 3.0 / r });
        let p = RadialPair::stationary(&u);
        let rad = radiative_annulus_energy(&p, 5.0, 40.0).unwrap();
        let full = annulus_energy(&p, 5.0, 40.0).unwrap();
        assert!(rad < 1e-12, "{rad}");
        let tail = FOUR_PI * 9.0 * (1.0 / 5.0 - 1.0 / 40.0);
        assert!((full - tail).abs() < 1e-3 * tail);
    }

    #[test]
    fn value_at_interpolates_and_extends() {
        let g = grid();
        let f = RadialField::from_fn(g, |r| 2.0 * r + 1.0);
        assert!((f.value_at(3.3) - 7.6).abs() < 1e-12);
        assert!((f.value_at(20.0) - 21.0 * 10.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn from_w_recovers_even_origin_value() {
        let g = grid();
        let w: Vec<f64> = g.nodes().iter().map(|r| r * (1.0 + r * r)).collect();
        let f = RadialField::from_w(g, &w);
        assert!((f.values()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_changes_counts_crossings() {
        let g = grid();
        let f = RadialField::from_fn(g, |r| (r - 2.0) * (r - 5.0));
        assert_eq!(f.sign_changes(1e-12), 2);
    }
}
